// Copyright 2026 The tmdstat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tmd/pipeline.h"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <system_error>

#include "tmd/error.h"
#include "tmd/stats.h"

namespace tmd {

namespace {

constexpr std::uint64_t kDefaultReplicateSeed = 1;

std::vector<double> uniform_bins(int k) {
    return std::vector<double>(static_cast<std::size_t>(k), 1.0 / k);
}

TMDConfig arm_tmd(const std::vector<double> &bins, double efficiency, int n_max) {
    TMDConfig tmd;
    tmd.bin_probs = bins;
    tmd.efficiency = efficiency;
    tmd.n_max = n_max;
    return tmd;
}

// JSON has no NaN or infinity; those become null.
Json finite_or_null(double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

double or_nan_if_degenerate(const std::function<double()> &f) {
    try {
        return f();
    } catch (const Error &e) {
        if (e.code() != ErrorCode::kDegenerate) {
            throw;
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
}

Json vector_json(const Eigen::VectorXd &v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i]);
    }
    return a;
}

Json sigma_json(const Eigen::MatrixXd &cov) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        a.push_back(std::sqrt(std::max(0.0, cov(i, i))));
    }
    return a;
}

Json rates_json(const ExperimentTally &tally) {
    const double shots = static_cast<double>(tally.shots());
    Json r;
    r["singles_signal_per_shot"] = static_cast<double>(tally.singles_signal()) / shots;
    r["singles_idler_per_shot"] = static_cast<double>(tally.singles_idler()) / shots;
    r["coincidences_per_shot"] = static_cast<double>(tally.coincidences()) / shots;
    r["repetition_rate_hz"] = kRepetitionRateHz;
    r["singles_signal_per_second"] = static_cast<double>(tally.singles_signal()) / shots * kRepetitionRateHz;
    r["singles_idler_per_second"] = static_cast<double>(tally.singles_idler()) / shots * kRepetitionRateHz;
    r["coincidences_per_second"] = static_cast<double>(tally.coincidences()) / shots * kRepetitionRateHz;
    return r;
}

double collective_sigma(const ExperimentConfig &e) {
    // Uncertainty of the mean of two independent calibrations.
    return 0.5 * std::hypot(e.signal.efficiency_sigma, e.idler.efficiency_sigma);
}

JointReconstructionResult reconstruct_joint(const RunConfig &config, const JointClickStatistics &clicks) {
    const ExperimentConfig &e = config.experiment;
    JointInversionOptions options;
    options.method = config.method;
    options.sigma_eta_signal = e.signal.efficiency_sigma;
    options.sigma_eta_idler = e.idler.efficiency_sigma;
    return invert_joint(arm_tmd(e.signal.bin_probs, e.signal.efficiency, config.reconstruction_n_max),
                        arm_tmd(e.idler.bin_probs, e.idler.efficiency, config.reconstruction_n_max), clicks, options);
}

ReconstructionResult reconstruct_idler(const RunConfig &config, const ClickStatistics &clicks, int n_max) {
    const ExperimentConfig &e = config.experiment;
    InversionOptions options;
    options.method = config.method;
    options.sigma_eta = e.idler.efficiency_sigma;
    return invert_single(arm_tmd(e.idler.bin_probs, e.idler.efficiency, n_max), clicks, options);
}

ReconstructionResult reconstruct_collective(const RunConfig &config, const ClickStatistics &clicks) {
    const ExperimentConfig &e = config.experiment;
    InversionOptions options;
    options.method = config.method;
    options.sigma_eta = collective_sigma(e);
    return invert_collective(arm_tmd(e.shared_bins, 1.0, config.reconstruction_n_max), clicks, e.signal.efficiency,
                             e.idler.efficiency, options);
}

PhotonDistribution marginal_of(const JointPhotonDistribution &joint, Axis axis) {
    auto [s, i] = marginals(joint);
    return axis == Axis::kSignal ? s : i;
}

// Odd entry over the larger of its even neighbours; the collective signature of pairs.
Json odd_suppression(const PhotonDistribution &collective) {
    Json rows = Json::array();
    for (int j = 1; j <= collective.n_max(); j += 2) {
        double neighbour = std::max(collective.at(j - 1), collective.at(j + 1));
        Json row;
        row["n"] = j;
        row["p"] = collective[j];
        row["max_adjacent_even"] = neighbour;
        row["ratio"] = finite_or_null(collective[j] / neighbour);
        rows.push_back(row);
    }
    return rows;
}

Json base_summary(std::string_view kind, const RunConfig &config) {
    Json s;
    s["format_version"] = kFormatVersion;
    s["type"] = kind;
    s["setup"] = to_string(config.experiment.setup);
    s["shots"] = config.experiment.shots;
    s["seed"] = config.experiment.seed;
    return s;
}

// Field of a calibration record that may itself be null.
Json entry_or_null(const Json &record, const char *key) {
    return record.is_object() ? record.at(key) : Json(nullptr);
}

void merge_files(Report &into, Report &&from) {
    for (auto &f : from.files) {
        into.files.push_back(std::move(f));
    }
}

}  // namespace

RunConfig default_replicate_config(Setup setup) {
    RunConfig c;
    ExperimentConfig &e = c.experiment;
    e.setup = setup;
    e.seed = kDefaultReplicateSeed;
    e.signal.bin_probs = uniform_bins(kDefaultBins);
    e.idler.bin_probs = uniform_bins(kDefaultBins);
    e.signal.efficiency_sigma = 0.009;
    e.idler.efficiency_sigma = 0.009;
    c.reconstruction_n_max = kDefaultBins;
    switch (setup) {
        case Setup::kA:
            // One pair per pulse keeps accidental coincidences out of the
            // ratio; a Poisson source at the same singles rate reads ~0.004 high.
            e.source = SourceModel::fock_pairs(1);
            e.signal.efficiency = 0.117;
            e.idler.efficiency = 0.137;
            e.shots = 10000000;
            break;
        case Setup::kB:
            e.source = SourceModel::multimode(100, 1.0);
            e.signal.efficiency = 0.117;
            e.idler.efficiency = 0.113;
            e.shots = 10000000;
            c.reconstruction_n_max = 4;
            break;
        case Setup::kC:
            // Binomial loss of the summed photon number needs equal arm efficiencies.
            e.source = SourceModel::poisson_pairs(0.2);
            e.signal.efficiency = 0.8;
            e.idler.efficiency = 0.8;
            e.signal.efficiency_sigma = 0.0;
            e.idler.efficiency_sigma = 0.0;
            e.shared_bins = uniform_bins(kDefaultBins);
            e.shots = 1000000;
            // Up to three pairs; the top click cells are too sparse at this shot count.
            c.reconstruction_n_max = 6;
            break;
        case Setup::kD:
            e.source = SourceModel::poisson_pairs(0.2);
            e.signal.efficiency = 0.0274;
            e.idler.efficiency = 0.111;
            e.shots = 10000000;
            break;
    }
    e.validate();
    return c;
}

Json joint_metrics(const JointPhotonDistribution &joint) {
    auto [s, i] = marginals(joint);
    Json m;
    m["mean_signal"] = s.mean();
    m["mean_idler"] = i.mean();
    m["variance_signal"] = variance(s);
    m["variance_idler"] = variance(i);
    m["correlation"] = finite_or_null(or_nan_if_degenerate([&] { return correlation(joint); }));
    m["difference_variance"] = difference_variance(joint);
    double product = or_nan_if_degenerate([&] { return number_squeezing_db(joint); });
    double sum = or_nan_if_degenerate(
        [&] { return number_squeezing_db(joint, SqueezingNormalization::kSumOfMeans); });
    m["squeezing_db"] = render_db(product);
    m["squeezing_db_value"] = finite_or_null(product);
    m["squeezing_sum_norm_db"] = render_db(sum);
    m["squeezing_sum_norm_db_value"] = finite_or_null(sum);
    return m;
}

Json single_metrics(const PhotonDistribution &dist) {
    Json m;
    const double mean = dist.mean();
    m["mean"] = mean;
    m["variance"] = variance(dist);
    Json moments = Json::array();
    for (int k = 1; k <= 4; ++k) {
        moments.push_back(moment(dist, k));
    }
    m["moments"] = moments;
    m["mandel_q"] = mean > 0.0 ? Json(variance(dist) / mean - 1.0) : Json(nullptr);
    return m;
}

Json fit_report(const PhotonDistribution &dist) {
    FitResult poisson = fit_poisson(dist);
    FitResult thermal = fit_thermal(dist);
    Json f;
    f["format_version"] = kFormatVersion;
    f["type"] = "fit_comparison";
    f["poisson"] = to_json(poisson);
    f["thermal"] = to_json(thermal);
    f["preferred"] = poisson.residual_l2 <= thermal.residual_l2 ? "poisson" : "thermal";
    if (dist.n_max() >= 1) {
        f["poisson_p1_deviation"] = poisson.per_bin_deviation[1];
        f["thermal_p1_deviation"] = thermal.per_bin_deviation[1];
    }
    return f;
}

Report calibrate_report(const RunConfig &config, const ExperimentTally &tally) {
    if (config.experiment.setup == Setup::kC) {
        fail(ErrorCode::kConfig, "setup: a shared detector cannot measure signal-idler coincidences");
    }
    KlyshkoCalibration cal = klyshko_from_tally(tally);
    Report r;
    r.summary = base_summary("calibration_summary", config);
    r.summary["signal"] = cal.signal ? to_json(*cal.signal) : Json(nullptr);
    r.summary["idler"] = cal.idler ? to_json(*cal.idler) : Json(nullptr);
    r.summary["true_efficiency_signal"] = config.experiment.signal.efficiency;
    r.summary["true_efficiency_idler"] = config.experiment.idler.efficiency;
    r.summary["rates"] = rates_json(tally);
    r.files.emplace_back("calibration.json", dump(r.summary));
    return r;
}

Report reconstruct_report(const RunConfig &config, const ExperimentTally &tally, unsigned) {
    const ExperimentConfig &e = config.experiment;
    Report r;
    r.summary = base_summary("reconstruction_summary", config);
    r.summary["method"] = to_string(config.method);
    r.summary["n_max"] = config.reconstruction_n_max;
    r.files.emplace_back("clicks.json", dump(to_json(tally.joint())));
    switch (e.setup) {
        case Setup::kA:
        case Setup::kD: {
            JointReconstructionResult res = reconstruct_joint(config, tally.joint());
            auto [s, i] = marginals(res.dist);
            r.summary["condition_number"] = res.condition_number;
            r.summary["residual"] = res.residual;
            r.summary["raw_metrics"] = joint_metrics(tally.joint().frequencies());
            r.summary["metrics"] = joint_metrics(res.dist);
            r.summary["signal_marginal"] = vector_json(s.probs());
            r.summary["signal_sigma"] = sigma_json(res.signal_covariance);
            r.summary["idler_marginal"] = vector_json(i.probs());
            r.summary["idler_sigma"] = sigma_json(res.idler_covariance);
            r.files.emplace_back("reconstruction.json", dump(to_json(res)));
            r.files.emplace_back("joint.csv", joint_csv(res.dist));
            r.files.emplace_back("signal_marginal.csv", distribution_csv(s, &res.signal_covariance));
            r.files.emplace_back("idler_marginal.csv", distribution_csv(i, &res.idler_covariance));
            r.files.emplace_back("raw_clicks.csv", joint_csv(tally.joint().frequencies()));
            break;
        }
        case Setup::kB: {
            ReconstructionResult res = reconstruct_idler(config, tally.idler(), config.reconstruction_n_max);
            r.summary["condition_number"] = res.condition_number;
            r.summary["residual"] = res.residual;
            r.summary["idler"] = vector_json(res.dist.probs());
            r.summary["idler_sigma"] = sigma_json(res.covariance);
            r.summary["metrics"] = single_metrics(res.dist);
            r.files.emplace_back("reconstruction.json", dump(to_json(res)));
            r.files.emplace_back("idler.csv", distribution_csv(res.dist, &res.covariance));
            r.files.emplace_back("raw_clicks.csv", distribution_csv(tally.idler().frequencies()));
            break;
        }
        case Setup::kC: {
            ReconstructionResult res = reconstruct_collective(config, tally.signal());
            r.summary["condition_number"] = res.condition_number;
            r.summary["residual"] = res.residual;
            r.summary["effective_efficiency"] = 0.5 * (e.signal.efficiency + e.idler.efficiency);
            r.summary["collective"] = vector_json(res.dist.probs());
            r.summary["collective_sigma"] = sigma_json(res.covariance);
            r.summary["odd_suppression"] = odd_suppression(res.dist);
            r.summary["metrics"] = single_metrics(res.dist);
            r.files.emplace_back("reconstruction.json", dump(to_json(res)));
            r.files.emplace_back("collective.csv", distribution_csv(res.dist, &res.covariance));
            r.files.emplace_back("raw_clicks.csv", distribution_csv(tally.signal().frequencies()));
            break;
        }
    }
    return r;
}

Report replicate(const RunConfig &config, unsigned workers) {
    const ExperimentConfig &e = config.experiment;
    ExperimentTally tally = run_experiment(e, workers);
    Report r;
    r.summary = base_summary("replicate_summary", config);
    switch (e.setup) {
        case Setup::kA: {
            Report cal = calibrate_report(config, tally);
            r.summary["eta_k_signal"] = entry_or_null(cal.summary["signal"], "eta_estimate");
            r.summary["eta_k_signal_sigma"] = entry_or_null(cal.summary["signal"], "eta_uncertainty");
            r.summary["eta_k_idler"] = entry_or_null(cal.summary["idler"], "eta_estimate");
            r.summary["eta_k_idler_sigma"] = entry_or_null(cal.summary["idler"], "eta_uncertainty");
            r.summary["true_efficiency_signal"] = e.signal.efficiency;
            r.summary["true_efficiency_idler"] = e.idler.efficiency;
            r.summary["rates"] = cal.summary["rates"];
            merge_files(r, std::move(cal));
            r.files.emplace_back("clicks.json", dump(to_json(tally.joint())));
            break;
        }
        case Setup::kB: {
            Report cal = calibrate_report(config, tally);
            Report rec = reconstruct_report(config, tally, workers);
            Json fits = fit_report(reconstruct_idler(config, tally.idler(), config.reconstruction_n_max).dist);
            r.summary["eta_k_idler"] = entry_or_null(cal.summary["idler"], "eta_estimate");
            r.summary["eta_k_idler_sigma"] = entry_or_null(cal.summary["idler"], "eta_uncertainty");
            r.summary["true_efficiency_idler"] = e.idler.efficiency;
            r.summary["rates"] = cal.summary["rates"];
            r.summary["reconstruction"] = rec.summary;
            r.summary["fits"] = fits;
            r.files.emplace_back("fit.json", dump(fits));
            merge_files(r, std::move(cal));
            merge_files(r, std::move(rec));
            break;
        }
        case Setup::kC: {
            Report rec = reconstruct_report(config, tally, workers);
            ReconstructionResult collective = reconstruct_collective(config, tally.signal());

            // Companion marginal measurement: the idler arm alone on the same detector geometry.
            RunConfig companion = config;
            companion.experiment.setup = Setup::kB;
            companion.experiment.idler.bin_probs = e.shared_bins;
            companion.experiment.shared_bins.clear();
            companion.experiment.seed = e.seed + 1;
            ExperimentTally companion_tally = run_experiment(companion.experiment, workers);
            const int marginal_n_max = config.reconstruction_n_max / 2;
            ReconstructionResult marginal = reconstruct_idler(companion, companion_tally.idler(), marginal_n_max);

            Json comparison = Json::array();
            for (int n = 0; n <= marginal.dist.n_max(); ++n) {
                const double sigma = std::hypot(collective.sigma(2 * n), marginal.sigma(n));
                Json row;
                row["n"] = n;
                row["collective_2n"] = collective.dist[2 * n];
                row["collective_sigma"] = collective.sigma(2 * n);
                row["marginal_n"] = marginal.dist[n];
                row["marginal_sigma"] = marginal.sigma(n);
                row["z"] = finite_or_null((collective.dist[2 * n] - marginal.dist[n]) / sigma);
                comparison.push_back(row);
            }
            r.summary["reconstruction"] = rec.summary;
            r.summary["companion_seed"] = companion.experiment.seed;
            r.summary["marginal"] = vector_json(marginal.dist.probs());
            r.summary["marginal_sigma"] = sigma_json(marginal.covariance);
            r.summary["even_vs_marginal"] = comparison;
            merge_files(r, std::move(rec));
            r.files.emplace_back("marginal.json", dump(to_json(marginal)));
            r.files.emplace_back("marginal.csv", distribution_csv(marginal.dist, &marginal.covariance));
            break;
        }
        case Setup::kD: {
            Report rec = reconstruct_report(config, tally, workers);
            const Json &raw = rec.summary["raw_metrics"];
            const Json &rc = rec.summary["metrics"];
            r.summary["raw_correlation"] = raw["correlation"];
            r.summary["reconstructed_correlation"] = rc["correlation"];
            r.summary["raw_squeezing_db"] = raw["squeezing_db"];
            r.summary["raw_squeezing_db_value"] = raw["squeezing_db_value"];
            r.summary["reconstructed_squeezing_db"] = rc["squeezing_db"];
            r.summary["reconstructed_squeezing_db_value"] = rc["squeezing_db_value"];
            r.summary["raw_squeezing_sum_norm_db"] = raw["squeezing_sum_norm_db"];
            r.summary["reconstructed_squeezing_sum_norm_db"] = rc["squeezing_sum_norm_db"];
            r.summary["reconstruction"] = rec.summary;
            merge_files(r, std::move(rec));
            break;
        }
    }
    return r;
}

namespace {

RunConfig resolve_config(const CommandOptions &options, std::optional<Setup> target) {
    RunConfig config;
    if (options.config) {
        config = parse_config_file(*options.config);
        if (target && config.experiment.setup != *target) {
            fail(ErrorCode::kConfig, "setup: config describes setup " + std::string(to_string(config.experiment.setup)) +
                                         " but replicate " + std::string(to_string(*target)) + " was requested");
        }
    } else if (target) {
        config = default_replicate_config(*target);
    } else {
        fail(ErrorCode::kConfig, "--config is required for this command");
    }
    if (options.seed) {
        config.experiment.seed = *options.seed;
    }
    if (options.shots) {
        config.experiment.shots = *options.shots;
    }
    if (options.constrained) {
        config.method = InversionMethod::kConstrained;
    }
    config.experiment.validate();
    return config;
}

ExperimentTally load_or_simulate(const RunConfig &config, const CommandOptions &options) {
    if (options.input) {
        return ingest_shots(*options.input, config.experiment);
    }
    return run_experiment(config.experiment, options.workers);
}

// Distribution-like input for metrics and fit.
struct LoadedDistribution {
    std::optional<PhotonDistribution> single;
    std::optional<JointPhotonDistribution> joint;
};

LoadedDistribution load_distribution(const std::filesystem::path &path) {
    Json doc = read_json_file(path);
    if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) {
        fail(ErrorCode::kData, "type: input is not a distribution document");
    }
    const std::string type = doc["type"].get<std::string>();
    LoadedDistribution out;
    if (type == "photon_distribution") {
        out.single = photon_distribution_from_json(doc);
    } else if (type == "reconstruction") {
        out.single = reconstruction_from_json(doc).dist;
    } else if (type == "joint_photon_distribution") {
        out.joint = joint_distribution_from_json(doc);
    } else if (type == "joint_reconstruction") {
        out.joint = joint_reconstruction_from_json(doc).dist;
    } else {
        fail(ErrorCode::kData, "type: '" + type + "' is not a distribution document");
    }
    return out;
}

}  // namespace

Json run_command(std::string_view command, std::optional<Setup> target, const CommandOptions &options) {
    const auto start = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.command = std::string(command);
    if (target) {
        manifest.command += " " + std::string(to_string(*target));
    }
    if (options.input) {
        manifest.inputs.push_back(options.input->string());
    }

    const bool needs_config = command != "metrics" && command != "fit";
    std::optional<RunConfig> config;
    if (needs_config || options.config || !options.input) {
        config = resolve_config(options, command == "replicate" ? target : std::nullopt);
        manifest.config = serialize_config(*config);
        manifest.seed = config->experiment.seed;
    }

    std::error_code ec;
    std::filesystem::create_directories(options.out, ec);
    if (ec) {
        fail(ErrorCode::kData, "cannot create output directory '" + options.out.string() + "'");
    }

    Report report;
    if (command == "simulate") {
        ExperimentTally tally = write_shots_csv(options.out / "shots.csv", config->experiment);
        manifest.outputs.push_back("shots.csv");
        report.summary = base_summary("simulation_summary", *config);
        report.summary["rates"] = rates_json(tally);
        report.files.emplace_back("clicks.json", dump(to_json(tally.joint())));
    } else if (command == "calibrate") {
        report = calibrate_report(*config, load_or_simulate(*config, options));
    } else if (command == "reconstruct") {
        report = reconstruct_report(*config, load_or_simulate(*config, options), options.workers);
    } else if (command == "metrics" || command == "fit") {
        LoadedDistribution dist;
        if (options.input) {
            dist = load_distribution(*options.input);
        } else {
            dist.joint = config->experiment.source.joint();
        }
        report.summary["format_version"] = kFormatVersion;
        report.summary["type"] = command == "metrics" ? "metrics" : "fit_summary";
        if (command == "metrics") {
            report.summary["metrics"] = dist.joint ? joint_metrics(*dist.joint) : single_metrics(*dist.single);
            report.files.emplace_back("metrics.json", dump(report.summary));
        } else if (dist.single) {
            report.summary["fit"] = fit_report(*dist.single);
            report.files.emplace_back("fit.json", dump(report.summary));
        } else {
            report.summary["signal"] = fit_report(marginal_of(*dist.joint, Axis::kSignal));
            report.summary["idler"] = fit_report(marginal_of(*dist.joint, Axis::kIdler));
            report.files.emplace_back("fit.json", dump(report.summary));
        }
    } else if (command == "replicate") {
        if (!target) {
            fail(ErrorCode::kConfig, "replicate: expected a setup A, B, C or D");
        }
        report = replicate(*config, options.workers);
    } else {
        fail(ErrorCode::kConfig, "unknown command '" + std::string(command) + "'");
    }

    for (const auto &[name, content] : report.files) {
        write_file_atomic(options.out / name, content);
        manifest.outputs.push_back(name);
    }
    write_file_atomic(options.out / "summary.json", dump(report.summary));
    manifest.outputs.push_back("summary.json");

    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file_atomic(options.out / "manifest.json", dump(to_json(manifest)));
    return report.summary;
}

}  // namespace tmd
