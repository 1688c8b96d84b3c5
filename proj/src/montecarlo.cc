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

#include "tmd/montecarlo.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <thread>

#include "tmd/detector.h"
#include "tmd/error.h"

namespace tmd {

std::string_view to_string(Setup setup) {
    switch (setup) {
        case Setup::kA:
            return "A";
        case Setup::kB:
            return "B";
        case Setup::kC:
            return "C";
        case Setup::kD:
            return "D";
    }
    return "?";
}

Setup setup_from_string(std::string_view name) {
    for (auto s : {Setup::kA, Setup::kB, Setup::kC, Setup::kD}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    fail(ErrorCode::kConfig, "setup: expected one of A, B, C, D, got '" + std::string(name) + "'");
}

namespace {

void check_arm(const ArmDetector &arm, const char *name) {
    if (!(arm.efficiency >= 0.0 && arm.efficiency <= 1.0)) {
        fail(ErrorCode::kConfig, std::string("detectors.") + name + ".efficiency: must lie in [0, 1]");
    }
    if (!(arm.efficiency_sigma >= 0.0 && std::isfinite(arm.efficiency_sigma))) {
        fail(ErrorCode::kConfig, std::string("detectors.") + name + ".efficiency_sigma: must be finite and >= 0");
    }
    try {
        validate_bin_probs(arm.bin_probs);
    } catch (const Error &e) {
        fail(ErrorCode::kConfig, std::string("detectors.") + name + ".bin_probs: " + e.message());
    }
}

std::vector<double> cumulative(std::span<const double> probs) {
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cdf[i] = acc;
    }
    return cdf;
}

// Index of the first cdf entry above u, skipping zero-probability tails.
int categorical(const std::vector<double> &cdf, double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) {
        // u landed in the rounding gap above the last cumulative value.
        auto last = std::prev(cdf.end());
        while (last != cdf.begin() && *std::prev(last) == *last) {
            --last;
        }
        return static_cast<int>(last - cdf.begin());
    }
    return static_cast<int>(it - cdf.begin());
}

bool is_uniform(const std::vector<double> &bins) {
    return std::all_of(bins.begin(), bins.end(), [&](double p) { return p == bins.front(); });
}

}  // namespace

void ExperimentConfig::validate() const {
    if (shots < 1) {
        fail(ErrorCode::kConfig, "shots: must be at least 1");
    }
    check_arm(signal, "signal");
    check_arm(idler, "idler");
    if (setup == Setup::kC) {
        if (shared_bins.empty()) {
            fail(ErrorCode::kConfig, "detectors.shared: setup C needs one detector shared by both arms");
        }
        try {
            validate_bin_probs(shared_bins);
        } catch (const Error &e) {
            fail(ErrorCode::kConfig, std::string("detectors.shared.bin_probs: ") + e.message());
        }
    } else if (!shared_bins.empty()) {
        fail(ErrorCode::kConfig, "detectors.shared: only setup C uses a shared detector");
    }
}

int ExperimentConfig::signal_width() const {
    return setup == Setup::kC ? static_cast<int>(shared_bins.size()) : static_cast<int>(signal.bin_probs.size());
}

int ExperimentConfig::idler_width() const {
    return setup == Setup::kC ? 0 : static_cast<int>(idler.bin_probs.size());
}

ShotSampler::ShotSampler(const ExperimentConfig &config) : setup_(config.setup) {
    config.validate();
    pair_cdf_ = cumulative(std::span<const double>(config.source.pair_dist().probs().data(),
                                                   static_cast<std::size_t>(config.source.n_max()) + 1));
    auto make_arm = [](double eta, const std::vector<double> &bins) {
        return Arm{eta, cumulative(bins), is_uniform(bins)};
    };
    signal_ = make_arm(config.signal.efficiency, config.signal.bin_probs);
    idler_ = make_arm(config.idler.efficiency, config.idler.bin_probs);
    if (setup_ == Setup::kC) {
        shared_ = make_arm(1.0, config.shared_bins);
    }
}

int ShotSampler::survivors(Rng &rng, int photons, double efficiency) const {
    int kept = 0;
    for (int j = 0; j < photons; ++j) {
        kept += rng.uniform() < efficiency ? 1 : 0;
    }
    return kept;
}

std::uint32_t ShotSampler::place(Rng &rng, int photons, const Arm &arm) const {
    std::uint32_t mask = 0;
    const int bins = static_cast<int>(arm.bin_cdf.size());
    for (int j = 0; j < photons; ++j) {
        int bin;
        if (arm.uniform) {
            bin = std::min(bins - 1, static_cast<int>(rng.uniform() * bins));
        } else {
            bin = categorical(arm.bin_cdf, rng.uniform());
        }
        mask |= 1u << bin;
    }
    return mask;
}

ShotRecord ShotSampler::sample(Rng &rng, std::uint64_t shot_id) const {
    ShotRecord shot;
    shot.shot_id = shot_id;
    int pairs = categorical(pair_cdf_, rng.uniform());
    if (pairs == 0) {
        return shot;
    }
    int kept_signal = survivors(rng, pairs, signal_.efficiency);
    int kept_idler = survivors(rng, pairs, idler_.efficiency);
    if (setup_ == Setup::kC) {
        shot.signal_bins = place(rng, kept_signal + kept_idler, shared_);
    } else {
        shot.signal_bins = place(rng, kept_signal, signal_);
        shot.idler_bins = place(rng, kept_idler, idler_);
    }
    return shot;
}

ShotRecord sample_shot(const ShotSampler &sampler, Rng &rng, std::uint64_t shot_id) {
    return sampler.sample(rng, shot_id);
}

void for_each_shot(const ExperimentConfig &config, const std::function<void(const ShotRecord &)> &visit) {
    ShotSampler sampler(config);
    const std::uint64_t shards = (config.shots + kShardSize - 1) / kShardSize;
    for (std::uint64_t shard = 0; shard < shards; ++shard) {
        Rng rng = Rng::substream(config.seed, shard);
        const std::uint64_t begin = shard * kShardSize;
        const std::uint64_t end = std::min(config.shots, begin + kShardSize);
        for (std::uint64_t id = begin; id < end; ++id) {
            visit(sampler.sample(rng, id));
        }
    }
}

ExperimentTally::ExperimentTally(Setup setup, int signal_width, int idler_width)
    : setup_(setup), signal_width_(signal_width), idler_width_(idler_width), joint_(signal_width, idler_width) {
}

void ExperimentTally::add(const ShotRecord &shot) {
    joint_.add(std::popcount(shot.signal_bins), std::popcount(shot.idler_bins));
}

void ExperimentTally::merge(const ExperimentTally &other) {
    joint_.merge(other.joint_);
}

std::uint64_t ExperimentTally::singles_signal() const {
    auto s = signal();
    return s.total_shots() - s.counts()[0];
}

std::uint64_t ExperimentTally::singles_idler() const {
    auto i = idler();
    return i.total_shots() - i.counts()[0];
}

std::uint64_t ExperimentTally::coincidences() const {
    std::uint64_t total = 0;
    for (int k = 1; k <= joint_.max_clicks_signal(); ++k) {
        for (int l = 1; l <= joint_.max_clicks_idler(); ++l) {
            total += joint_.count(k, l);
        }
    }
    return total;
}

ExperimentTally run_experiment(const ExperimentConfig &config, unsigned workers) {
    ShotSampler sampler(config);
    const std::uint64_t shards = (config.shots + kShardSize - 1) / kShardSize;
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, shards));

    std::vector<ExperimentTally> partial(workers,
                                         ExperimentTally(config.setup, config.signal_width(), config.idler_width()));
    auto work = [&](unsigned w) {
        for (std::uint64_t shard = w; shard < shards; shard += workers) {
            Rng rng = Rng::substream(config.seed, shard);
            const std::uint64_t begin = shard * kShardSize;
            const std::uint64_t end = std::min(config.shots, begin + kShardSize);
            for (std::uint64_t id = begin; id < end; ++id) {
                partial[w].add(sampler.sample(rng, id));
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back(work, w);
        }
        for (auto &t : threads) {
            t.join();
        }
    }

    ExperimentTally total(config.setup, config.signal_width(), config.idler_width());
    for (const auto &p : partial) {
        total.merge(p);
    }
    return total;
}

KlyshkoCalibration klyshko_from_tally(const ExperimentTally &tally) {
    const auto coinc = tally.coincidences();
    const auto s = tally.singles_signal();
    const auto i = tally.singles_idler();
    if (s == 0 && i == 0) {
        fail(ErrorCode::kDegenerate, "neither arm recorded singles; efficiencies undefined");
    }
    KlyshkoCalibration cal;
    if (i > 0) {
        cal.signal = klyshko_from_counts(coinc, i);
    }
    if (s > 0) {
        cal.idler = klyshko_from_counts(coinc, s);
    }
    return cal;
}

KlyshkoCalibration simulate_klyshko(const SourceModel &source, double eta_signal, double eta_idler,
                                    std::uint64_t shots, std::uint64_t seed, unsigned workers) {
    ExperimentConfig config;
    config.setup = Setup::kA;
    config.source = source;
    config.signal.efficiency = eta_signal;
    config.idler.efficiency = eta_idler;
    config.shots = shots;
    config.seed = seed;
    return klyshko_from_tally(run_experiment(config, workers));
}

}  // namespace tmd
