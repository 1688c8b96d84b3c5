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

#include "tmd/io.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <system_error>

#include "tmd/error.h"
#include "tmd/sources.h"

namespace tmd {

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown fields.
class ObjectReader {
   public:
    ObjectReader(const Json &obj, std::string path, ErrorCode code) : obj_(obj), path_(std::move(path)), code_(code) {
        if (!obj_.is_object()) {
            fail(code_, (path_.empty() ? std::string("document") : path_) + ": expected an object");
        }
    }

    std::string field(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    [[noreturn]] void reject(std::string_view key, const std::string &why) const {
        fail(code_, field(key) + ": " + why);
    }

    bool has(std::string_view key) const {
        return obj_.contains(key);
    }

    const Json &raw(std::string_view key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            reject(key, "required field is missing");
        }
        seen_.insert(std::string(key));
        return *it;
    }

    double number(std::string_view key) {
        const Json &v = raw(key);
        if (!v.is_number()) {
            reject(key, "expected a number");
        }
        return v.get<double>();
    }

    std::optional<double> optional_number(std::string_view key) {
        if (!has(key) || obj_.at(key).is_null()) {
            seen_.insert(std::string(key));
            return std::nullopt;
        }
        return number(key);
    }

    std::uint64_t unsigned_integer(std::string_view key) {
        const Json &v = raw(key);
        if (v.is_number_unsigned()) {
            return v.get<std::uint64_t>();
        }
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) {
                reject(key, "must not be negative");
            }
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        reject(key, "expected a non-negative integer");
    }

    int small_integer(std::string_view key) {
        std::uint64_t v = unsigned_integer(key);
        if (v > 1000000) {
            reject(key, "value too large");
        }
        return static_cast<int>(v);
    }

    bool boolean(std::string_view key) {
        const Json &v = raw(key);
        if (!v.is_boolean()) {
            reject(key, "expected true or false");
        }
        return v.get<bool>();
    }

    std::string string(std::string_view key) {
        const Json &v = raw(key);
        if (!v.is_string()) {
            reject(key, "expected a string");
        }
        return v.get<std::string>();
    }

    std::vector<double> numbers(std::string_view key) {
        const Json &v = raw(key);
        if (!v.is_array()) {
            reject(key, "expected an array of numbers");
        }
        std::vector<double> out;
        out.reserve(v.size());
        for (const auto &e : v) {
            if (!e.is_number()) {
                reject(key, "expected an array of numbers");
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::uint64_t> counts(std::string_view key) {
        const Json &v = raw(key);
        if (!v.is_array()) {
            reject(key, "expected an array of counts");
        }
        std::vector<std::uint64_t> out;
        for (const auto &e : v) {
            if (!e.is_number_unsigned()) {
                reject(key, "expected an array of counts");
            }
            out.push_back(e.get<std::uint64_t>());
        }
        return out;
    }

    Eigen::MatrixXd matrix(std::string_view key) {
        const Json &v = raw(key);
        if (!v.is_array() || v.empty()) {
            reject(key, "expected a non-empty array of rows");
        }
        const std::size_t cols = v.front().is_array() ? v.front().size() : 0;
        if (cols == 0) {
            reject(key, "expected a non-empty array of rows");
        }
        Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < v.size(); ++r) {
            if (!v[r].is_array() || v[r].size() != cols) {
                reject(key, "rows must all have the same length");
            }
            for (std::size_t c = 0; c < cols; ++c) {
                if (!v[r][c].is_number()) {
                    reject(key, "expected numbers");
                }
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c].get<double>();
            }
        }
        return m;
    }

    ObjectReader object(std::string_view key) {
        return ObjectReader(raw(key), field(key), code_);
    }

    void skip(std::string_view key) {
        seen_.insert(std::string(key));
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) {
                reject(it.key(), "unknown field");
            }
        }
    }

   private:
    const Json &obj_;
    std::string path_;
    ErrorCode code_;
    std::set<std::string> seen_;
};

void check_version(ObjectReader &r, bool required) {
    if (!required && !r.has("format_version")) {
        return;
    }
    if (r.unsigned_integer("format_version") != static_cast<std::uint64_t>(kFormatVersion)) {
        r.reject("format_version", "unsupported version, expected " + std::to_string(kFormatVersion));
    }
}

ObjectReader open_document(const Json &doc, std::string_view type) {
    ObjectReader r(doc, "", ErrorCode::kData);
    check_version(r, true);
    if (r.string("type") != type) {
        r.reject("type", "expected '" + std::string(type) + "'");
    }
    return r;
}

Json header(std::string_view type) {
    Json doc;
    doc["format_version"] = kFormatVersion;
    doc["type"] = type;
    return doc;
}

Json vector_json(const Eigen::VectorXd &v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i]);
    }
    return a;
}

Json matrix_json(const Eigen::MatrixXd &m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        rows.push_back(vector_json(m.row(r).transpose()));
    }
    return rows;
}

// Rethrows domain errors from the model constructors as config errors on `field`.
template <typename F>
auto as_config(const std::string &field, F &&make) {
    try {
        return make();
    } catch (const Error &e) {
        if (e.code() == ErrorCode::kConfig) {
            throw;
        }
        fail(ErrorCode::kConfig, field + ": " + e.message());
    }
}

SourceModel parse_source(ObjectReader r) {
    const std::string type = r.string("type");
    SourceFamily family = as_config(r.field("type"), [&] { return source_family_from_string(type); });
    std::optional<int> n_max;
    if (r.has("n_max")) {
        n_max = r.small_integer("n_max");
    }
    auto positive_mean = [&] {
        double mean = r.number("mean");
        if (!(mean >= 0.0 && std::isfinite(mean))) {
            r.reject("mean", "must be finite and >= 0");
        }
        return mean;
    };
    SourceModel source = as_config(r.field("type"), [&] {
        switch (family) {
            case SourceFamily::kThermalPairs:
                return SourceModel::single_mode(positive_mean(), n_max);
            case SourceFamily::kPoissonPairs:
                return SourceModel::poisson_pairs(positive_mean(), n_max);
            case SourceFamily::kFockPairs:
                return SourceModel::fock_pairs(r.small_integer("n"), n_max);
            case SourceFamily::kMultimodePairs:
                if (r.has("mode_means")) {
                    if (r.has("modes") || r.has("mean")) {
                        r.reject("mode_means", "give either mode_means or modes with mean, not both");
                    }
                    return SourceModel::multimode(r.numbers("mode_means"), n_max);
                }
                return SourceModel::multimode(r.small_integer("modes"), positive_mean(), n_max);
        }
        fail(ErrorCode::kConfig, "source.type: unsupported");
    });
    r.finish();
    return source;
}

Json serialize_source(const SourceModel &source) {
    Json s;
    s["type"] = to_string(source.family());
    switch (source.family()) {
        case SourceFamily::kThermalPairs:
        case SourceFamily::kPoissonPairs:
            s["mean"] = source.mean();
            break;
        case SourceFamily::kFockPairs:
            s["n"] = source.fock_number();
            break;
        case SourceFamily::kMultimodePairs:
            if (!source.mode_means().empty()) {
                s["mode_means"] = source.mode_means();
            } else {
                s["modes"] = source.modes();
                s["mean"] = source.mean();
            }
            break;
    }
    s["n_max"] = source.n_max();
    return s;
}

std::vector<double> parse_bins(ObjectReader &r) {
    if (r.has("bins") && r.has("bin_probs")) {
        r.reject("bin_probs", "give either bins or bin_probs, not both");
    }
    std::vector<double> probs;
    if (r.has("bin_probs")) {
        probs = r.numbers("bin_probs");
        as_config(r.field("bin_probs"), [&] {
            validate_bin_probs(probs);
            return 0;
        });
    } else if (r.has("bins")) {
        int bins = r.small_integer("bins");
        if (bins < 1) {
            r.reject("bins", "must be at least 1");
        }
        if (bins > kMaxBins) {
            r.reject("bins", "at most " + std::to_string(kMaxBins) + " bins are supported");
        }
        probs.assign(static_cast<std::size_t>(bins), 1.0 / bins);
    } else {
        probs.assign(kDefaultBins, 1.0 / kDefaultBins);
    }
    return probs;
}

ArmDetector parse_arm(ObjectReader r, bool with_bins) {
    ArmDetector arm;
    if (r.has("efficiency")) {
        arm.efficiency = r.number("efficiency");
    }
    if (r.has("efficiency_sigma")) {
        arm.efficiency_sigma = r.number("efficiency_sigma");
    }
    if (with_bins) {
        arm.bin_probs = parse_bins(r);
    } else if (r.has("bins") || r.has("bin_probs")) {
        r.reject(r.has("bins") ? "bins" : "bin_probs", "setup C records both arms on detectors.shared");
    }
    r.finish();
    return arm;
}

int default_reconstruction_n_max(const ExperimentConfig &e) {
    switch (e.setup) {
        case Setup::kB:
            return static_cast<int>(e.idler.bin_probs.size());
        case Setup::kC:
            return static_cast<int>(e.shared_bins.size());
        default:
            return static_cast<int>(std::min(e.signal.bin_probs.size(), e.idler.bin_probs.size()));
    }
}

}  // namespace

RunConfig parse_config(const Json &doc) {
    ObjectReader r(doc, "", ErrorCode::kConfig);
    check_version(r, false);
    RunConfig config;
    ExperimentConfig &e = config.experiment;
    {
        const std::string setup = r.string("setup");
        e.setup = setup_from_string(setup);
    }
    e.source = parse_source(r.object("source"));

    const bool collective = e.setup == Setup::kC;
    if (r.has("detectors")) {
        ObjectReader d = r.object("detectors");
        if (d.has("signal")) {
            e.signal = parse_arm(d.object("signal"), !collective);
        }
        if (d.has("idler")) {
            e.idler = parse_arm(d.object("idler"), !collective);
        }
        if (d.has("shared")) {
            if (!collective) {
                d.reject("shared", "only setup C uses a shared detector");
            }
            ObjectReader s = d.object("shared");
            e.shared_bins = parse_bins(s);
            s.finish();
        }
        d.finish();
    }
    if (collective && e.shared_bins.empty()) {
        e.shared_bins.assign(kDefaultBins, 1.0 / kDefaultBins);
    }

    e.shots = r.unsigned_integer("shots");
    e.seed = r.unsigned_integer("seed");
    e.validate();

    config.reconstruction_n_max = default_reconstruction_n_max(e);
    if (r.has("reconstruction")) {
        ObjectReader rec = r.object("reconstruction");
        if (rec.has("n_max")) {
            config.reconstruction_n_max = rec.small_integer("n_max");
        }
        if (rec.has("constrained")) {
            config.method = rec.boolean("constrained") ? InversionMethod::kConstrained : InversionMethod::kDirect;
        }
        rec.finish();
    }
    r.finish();
    return config;
}

RunConfig parse_config_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::kConfig, "cannot open config file '" + path.string() + "'");
    }
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        fail(ErrorCode::kConfig, "config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

Json serialize_config(const RunConfig &config) {
    const ExperimentConfig &e = config.experiment;
    Json doc;
    doc["format_version"] = kFormatVersion;
    doc["setup"] = to_string(e.setup);
    doc["source"] = serialize_source(e.source);
    const bool collective = e.setup == Setup::kC;
    auto arm = [&](const ArmDetector &a) {
        Json j;
        j["efficiency"] = a.efficiency;
        j["efficiency_sigma"] = a.efficiency_sigma;
        if (!collective) {
            j["bin_probs"] = a.bin_probs;
        }
        return j;
    };
    Json det;
    det["signal"] = arm(e.signal);
    det["idler"] = arm(e.idler);
    if (collective) {
        det["shared"] = Json{{"bin_probs", e.shared_bins}};
    }
    doc["detectors"] = det;
    doc["reconstruction"] = Json{{"n_max", config.reconstruction_n_max},
                                 {"constrained", config.method == InversionMethod::kConstrained}};
    doc["shots"] = e.shots;
    doc["seed"] = e.seed;
    return doc;
}

Json to_json(const PhotonDistribution &dist) {
    Json doc = header("photon_distribution");
    doc["probs"] = vector_json(dist.probs());
    return doc;
}

Json to_json(const JointPhotonDistribution &dist) {
    Json doc = header("joint_photon_distribution");
    doc["probs"] = matrix_json(dist.probs());
    return doc;
}

Json to_json(const ClickStatistics &clicks) {
    Json doc = header("click_statistics");
    doc["total_shots"] = clicks.total_shots();
    doc["counts"] = clicks.counts();
    return doc;
}

Json to_json(const JointClickStatistics &clicks) {
    Json doc = header("joint_click_statistics");
    doc["total_shots"] = clicks.total_shots();
    Json rows = Json::array();
    for (int k = 0; k <= clicks.max_clicks_signal(); ++k) {
        Json row = Json::array();
        for (int l = 0; l <= clicks.max_clicks_idler(); ++l) {
            row.push_back(clicks.count(k, l));
        }
        rows.push_back(row);
    }
    doc["counts"] = rows;
    return doc;
}

Json to_json(const CalibrationRecord &record) {
    Json doc = header("calibration");
    doc["rate_coincidence"] = record.rate_coincidence;
    doc["rate_singles"] = record.rate_singles;
    doc["eta_estimate"] = record.eta_estimate;
    doc["eta_uncertainty"] = record.eta_uncertainty ? Json(*record.eta_uncertainty) : Json(nullptr);
    return doc;
}

Json to_json(const FitResult &fit) {
    Json doc = header("fit");
    doc["mean"] = fit.mean;
    doc["residual_l2"] = fit.residual_l2;
    doc["per_bin_deviation"] = fit.per_bin_deviation;
    doc["iterations"] = fit.iterations;
    return doc;
}

Json to_json(const ReconstructionResult &result) {
    Json doc = header("reconstruction");
    doc["method"] = to_string(result.method);
    doc["condition_number"] = result.condition_number;
    doc["residual"] = result.residual;
    doc["probs"] = vector_json(result.dist.probs());
    Json sigma = Json::array();
    for (int n = 0; n <= result.dist.n_max(); ++n) {
        sigma.push_back(result.sigma(n));
    }
    doc["sigma"] = sigma;
    doc["covariance"] = matrix_json(result.covariance);
    return doc;
}

Json to_json(const JointReconstructionResult &result) {
    Json doc = header("joint_reconstruction");
    doc["method"] = to_string(result.method);
    doc["condition_number"] = result.condition_number;
    doc["residual"] = result.residual;
    doc["probs"] = matrix_json(result.dist.probs());
    doc["signal_covariance"] = matrix_json(result.signal_covariance);
    doc["idler_covariance"] = matrix_json(result.idler_covariance);
    return doc;
}

namespace {

template <typename T, typename F>
T data_guard(F &&make) {
    try {
        return make();
    } catch (const Error &e) {
        if (e.code() == ErrorCode::kData) {
            throw;
        }
        fail(ErrorCode::kData, e.message());
    }
}

InversionMethod parse_method(ObjectReader &r) {
    const std::string m = r.string("method");
    if (m == to_string(InversionMethod::kDirect)) {
        return InversionMethod::kDirect;
    }
    if (m == to_string(InversionMethod::kConstrained)) {
        return InversionMethod::kConstrained;
    }
    r.reject("method", "expected 'direct' or 'constrained'");
}

}  // namespace

PhotonDistribution photon_distribution_from_json(const Json &doc) {
    auto r = open_document(doc, "photon_distribution");
    auto probs = r.numbers("probs");
    r.finish();
    return data_guard<PhotonDistribution>([&] { return PhotonDistribution(probs); });
}

JointPhotonDistribution joint_distribution_from_json(const Json &doc) {
    auto r = open_document(doc, "joint_photon_distribution");
    Eigen::MatrixXd probs = r.matrix("probs");
    r.finish();
    return data_guard<JointPhotonDistribution>([&] { return JointPhotonDistribution(probs); });
}

ClickStatistics click_statistics_from_json(const Json &doc) {
    auto r = open_document(doc, "click_statistics");
    auto total = r.unsigned_integer("total_shots");
    auto counts = r.counts("counts");
    r.finish();
    return ClickStatistics(std::move(counts), total);
}

JointClickStatistics joint_click_statistics_from_json(const Json &doc) {
    auto r = open_document(doc, "joint_click_statistics");
    auto total = r.unsigned_integer("total_shots");
    const Json &rows = r.raw("counts");
    r.finish();
    if (!rows.is_array() || rows.empty() || !rows.front().is_array() || rows.front().empty()) {
        fail(ErrorCode::kData, "counts: expected a non-empty array of rows");
    }
    JointClickStatistics clicks(static_cast<int>(rows.size()) - 1, static_cast<int>(rows.front().size()) - 1);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!rows[k].is_array() || rows[k].size() != rows.front().size()) {
            fail(ErrorCode::kData, "counts: rows must all have the same length");
        }
        for (std::size_t l = 0; l < rows[k].size(); ++l) {
            if (!rows[k][l].is_number_unsigned()) {
                fail(ErrorCode::kData, "counts: expected non-negative integers");
            }
            clicks.add(static_cast<int>(k), static_cast<int>(l), rows[k][l].get<std::uint64_t>());
        }
    }
    if (clicks.total_shots() != total) {
        fail(ErrorCode::kData, "total_shots: does not match the sum of counts");
    }
    return clicks;
}

CalibrationRecord calibration_from_json(const Json &doc) {
    auto r = open_document(doc, "calibration");
    CalibrationRecord record;
    record.rate_coincidence = r.number("rate_coincidence");
    record.rate_singles = r.number("rate_singles");
    record.eta_estimate = r.number("eta_estimate");
    record.eta_uncertainty = r.optional_number("eta_uncertainty");
    r.finish();
    return record;
}

FitResult fit_from_json(const Json &doc) {
    auto r = open_document(doc, "fit");
    FitResult fit;
    fit.mean = r.number("mean");
    fit.residual_l2 = r.number("residual_l2");
    fit.per_bin_deviation = r.numbers("per_bin_deviation");
    fit.iterations = r.small_integer("iterations");
    r.finish();
    return fit;
}

ReconstructionResult reconstruction_from_json(const Json &doc) {
    auto r = open_document(doc, "reconstruction");
    ReconstructionResult result;
    result.method = parse_method(r);
    result.condition_number = r.number("condition_number");
    result.residual = r.number("residual");
    auto probs = r.numbers("probs");
    r.skip("sigma");
    result.covariance = r.matrix("covariance");
    r.finish();
    result.dist = data_guard<PhotonDistribution>([&] { return PhotonDistribution(probs); });
    if (result.covariance.rows() != result.dist.probs().size() || result.covariance.cols() != result.covariance.rows()) {
        fail(ErrorCode::kData, "covariance: shape does not match probs");
    }
    return result;
}

JointReconstructionResult joint_reconstruction_from_json(const Json &doc) {
    auto r = open_document(doc, "joint_reconstruction");
    JointReconstructionResult result;
    result.method = parse_method(r);
    result.condition_number = r.number("condition_number");
    result.residual = r.number("residual");
    Eigen::MatrixXd probs = r.matrix("probs");
    result.signal_covariance = r.matrix("signal_covariance");
    result.idler_covariance = r.matrix("idler_covariance");
    r.finish();
    result.dist = data_guard<JointPhotonDistribution>([&] { return JointPhotonDistribution(probs); });
    return result;
}

std::string render_db(double db) {
    if (std::isnan(db)) {
        return "nan";
    }
    if (std::isinf(db)) {
        return db < 0 ? "-inf" : "inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", db);
    return buf;
}

std::string dump(const Json &doc) {
    return doc.dump(2) + "\n";
}

Json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::kData, "cannot open '" + path.string() + "'");
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        fail(ErrorCode::kData, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

namespace {

std::filesystem::path temp_sibling(const std::filesystem::path &path) {
    auto tmp = path;
    tmp += ".tmp";
    return tmp;
}

void commit_temp(const std::filesystem::path &tmp, const std::filesystem::path &path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorCode::kData, "cannot write '" + path.string() + "'");
    }
}

}  // namespace

void write_file_atomic(const std::filesystem::path &path, std::string_view content) {
    const auto tmp = temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            fail(ErrorCode::kData, "cannot write '" + path.string() + "'");
        }
    }
    commit_temp(tmp, path);
}

std::string shot_csv_header(const ExperimentConfig &config) {
    return config.idler_width() > 0 ? "shot_id,signal_mask,idler_mask" : "shot_id,signal_mask";
}

void write_shot_row(std::ostream &out, const ShotRecord &shot, bool with_idler) {
    char buf[24];
    auto field = [&](std::uint64_t v, char end) {
        char *p = std::to_chars(buf, buf + sizeof buf - 1, v).ptr;
        *p++ = end;
        out.write(buf, p - buf);
    };
    field(shot.shot_id, ',');
    field(shot.signal_bins, with_idler ? ',' : '\n');
    if (with_idler) {
        field(shot.idler_bins, '\n');
    }
}

ExperimentTally write_shots_csv(const std::filesystem::path &path, const ExperimentConfig &config) {
    const auto tmp = temp_sibling(path);
    ExperimentTally tally(config.setup, config.signal_width(), config.idler_width());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        const bool with_idler = config.idler_width() > 0;
        out << shot_csv_header(config) << '\n';
        for_each_shot(config, [&](const ShotRecord &shot) {
            write_shot_row(out, shot, with_idler);
            tally.add(shot);
        });
        if (!out) {
            fail(ErrorCode::kData, "cannot write '" + path.string() + "'");
        }
    }
    commit_temp(tmp, path);
    return tally;
}

namespace {

bool parse_field(std::string_view text, std::uint64_t &value) {
    if (text.empty()) {
        return false;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

ExperimentTally ingest_shots(std::istream &in, Setup setup, int signal_width, int idler_width) {
    std::string line;
    if (!std::getline(in, line)) {
        fail(ErrorCode::kData, "no shots");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    bool with_idler;
    if (line == "shot_id,signal_mask,idler_mask") {
        with_idler = true;
    } else if (line == "shot_id,signal_mask") {
        with_idler = false;
    } else {
        fail(ErrorCode::kData, "line 1: expected header 'shot_id,signal_mask,idler_mask'");
    }
    const std::uint64_t signal_limit = (std::uint64_t{1} << signal_width) - 1;
    const std::uint64_t idler_limit = (std::uint64_t{1} << idler_width) - 1;

    ExperimentTally tally(setup, signal_width, idler_width);
    std::uint64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::string_view rest(line);
        std::uint64_t fields[3] = {0, 0, 0};
        const int expected = with_idler ? 3 : 2;
        int got = 0;
        bool ok = true;
        while (ok) {
            auto comma = rest.find(',');
            std::string_view cell = rest.substr(0, comma);
            if (got >= expected || !parse_field(cell, fields[got])) {
                ok = false;
                break;
            }
            ++got;
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (!ok || got != expected) {
            fail(ErrorCode::kData, "line " + std::to_string(line_no) + ": malformed row '" + line + "'");
        }
        if (fields[1] > signal_limit) {
            fail(ErrorCode::kData, "line " + std::to_string(line_no) + ": signal_mask " + std::to_string(fields[1]) +
                                       " has bits beyond K = " + std::to_string(signal_width));
        }
        if (fields[2] > idler_limit) {
            fail(ErrorCode::kData, "line " + std::to_string(line_no) + ": idler_mask " + std::to_string(fields[2]) +
                                       " has bits beyond K = " + std::to_string(idler_width));
        }
        tally.add(ShotRecord{fields[0], static_cast<std::uint32_t>(fields[1]), static_cast<std::uint32_t>(fields[2])});
    }
    if (tally.shots() == 0) {
        fail(ErrorCode::kData, "no shots");
    }
    return tally;
}

ExperimentTally ingest_shots(const std::filesystem::path &path, const ExperimentConfig &config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::kData, "cannot open '" + path.string() + "'");
    }
    return ingest_shots(in, config.setup, config.signal_width(), config.idler_width());
}

Json to_json(const RunManifest &manifest) {
    Json doc = header("run_manifest");
    doc["command"] = manifest.command;
    doc["tool_version"] = manifest.tool_version;
    doc["seed"] = manifest.seed;
    doc["config"] = manifest.config;
    doc["inputs"] = manifest.inputs;
    doc["outputs"] = manifest.outputs;
    doc["wall_clock_seconds"] = manifest.wall_clock_seconds;
    return doc;
}

RunManifest manifest_from_json(const Json &doc) {
    auto r = open_document(doc, "run_manifest");
    RunManifest m;
    m.command = r.string("command");
    m.tool_version = r.string("tool_version");
    m.seed = r.unsigned_integer("seed");
    m.config = r.raw("config");
    auto strings = [&](std::string_view key) {
        const Json &v = r.raw(key);
        if (!v.is_array()) {
            r.reject(key, "expected an array of paths");
        }
        std::vector<std::string> out;
        for (const auto &e : v) {
            if (!e.is_string()) {
                r.reject(key, "expected an array of paths");
            }
            out.push_back(e.get<std::string>());
        }
        return out;
    };
    m.inputs = strings("inputs");
    m.outputs = strings("outputs");
    m.wall_clock_seconds = r.number("wall_clock_seconds");
    r.finish();
    return m;
}

namespace {

void append_number(std::string &out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

}  // namespace

std::string distribution_csv(const PhotonDistribution &dist, const Eigen::MatrixXd *covariance) {
    std::string out = "n,p,sigma\n";
    for (int n = 0; n <= dist.n_max(); ++n) {
        out += std::to_string(n);
        out += ',';
        append_number(out, dist[n]);
        out += ',';
        if (covariance != nullptr) {
            append_number(out, std::sqrt(std::max(0.0, (*covariance)(n, n))));
        }
        out += '\n';
    }
    return out;
}

std::string joint_csv(const JointPhotonDistribution &dist) {
    std::string out = "n,m,p\n";
    for (int n = 0; n <= dist.n_max_signal(); ++n) {
        for (int m = 0; m <= dist.n_max_idler(); ++m) {
            out += std::to_string(n) + "," + std::to_string(m) + ",";
            append_number(out, dist(n, m));
            out += '\n';
        }
    }
    return out;
}

}  // namespace tmd
