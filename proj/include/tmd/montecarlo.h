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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tmd/distribution.h"
#include "tmd/reconstruct.h"
#include "tmd/rng.h"
#include "tmd/sources.h"

namespace tmd {

/// Detection configurations: A two threshold detectors (efficiency
/// calibration), B threshold on signal and TMD on idler (marginals), C one
/// TMD shared by both arms (collective statistics), D one TMD per arm (joint).
/// A threshold detector is a TMD read out as "any bin fired", so every arm
/// carries a bin geometry.
enum class Setup { kA, kB, kC, kD };

std::string_view to_string(Setup setup);
/// Accepts "A".."D". Throws kConfig otherwise.
Setup setup_from_string(std::string_view name);

/// One arm's detector as seen by the simulator.
struct ArmDetector {
    double efficiency = 1.0;
    std::vector<double> bin_probs = std::vector<double>(8, 0.125);
    /// Calibration uncertainty of the efficiency; used by reconstruction only.
    double efficiency_sigma = 0.0;

    bool operator==(const ArmDetector &) const = default;
};

struct ExperimentConfig {
    Setup setup = Setup::kD;
    SourceModel source = SourceModel::fock_pairs(1);
    ArmDetector signal;
    ArmDetector idler;
    /// Setup C only: bins of the detector receiving both arms.
    std::vector<double> shared_bins;
    std::uint64_t shots = 1;
    std::uint64_t seed = 0;

    /// Throws kConfig on arity or range violations.
    void validate() const;

    /// Bins of the detector recorded in the signal / idler column (0 = column absent).
    int signal_width() const;
    int idler_width() const;

    bool operator==(const ExperimentConfig &) const = default;
};

/// Bins that fired on one shot; bit k set means bin k clicked.
struct ShotRecord {
    std::uint64_t shot_id = 0;
    std::uint32_t signal_bins = 0;
    std::uint32_t idler_bins = 0;

    bool operator==(const ShotRecord &) const = default;
};

/// Precomputed sampling tables for one configuration.
class ShotSampler {
   public:
    explicit ShotSampler(const ExperimentConfig &config);

    /// Draws a pair number, thins each arm binomially, and drops every
    /// surviving photon into a bin by an independent categorical draw.
    ShotRecord sample(Rng &rng, std::uint64_t shot_id) const;

   private:
    struct Arm {
        double efficiency = 1.0;
        std::vector<double> bin_cdf;
        bool uniform = true;
    };

    int survivors(Rng &rng, int photons, double efficiency) const;
    std::uint32_t place(Rng &rng, int photons, const Arm &arm) const;

    Setup setup_;
    std::vector<double> pair_cdf_;
    Arm signal_;
    Arm idler_;
    Arm shared_;
};

ShotRecord sample_shot(const ShotSampler &sampler, Rng &rng, std::uint64_t shot_id);

/// Shots are simulated in fixed-size shards, shard i drawing from substream i.
inline constexpr std::uint64_t kShardSize = 1u << 16;

/// Streams every shot in shot_id order.
void for_each_shot(const ExperimentConfig &config, const std::function<void(const ShotRecord &)> &visit);

/// Aggregated click data of one run.
class ExperimentTally {
   public:
    ExperimentTally() = default;
    ExperimentTally(Setup setup, int signal_width, int idler_width);

    void add(const ShotRecord &shot);
    void merge(const ExperimentTally &other);

    Setup setup() const {
        return setup_;
    }
    std::uint64_t shots() const {
        return joint_.total_shots();
    }
    /// Click-number coincidence table, (K_s + 1) x (K_i + 1).
    const JointClickStatistics &joint() const {
        return joint_;
    }
    ClickStatistics signal() const {
        return joint_.signal_marginal();
    }
    ClickStatistics idler() const {
        return joint_.idler_marginal();
    }

    /// Threshold view: shots where an arm fired at least one bin.
    std::uint64_t singles_signal() const;
    std::uint64_t singles_idler() const;
    std::uint64_t coincidences() const;

    bool operator==(const ExperimentTally &) const = default;

   private:
    Setup setup_ = Setup::kD;
    int signal_width_ = 0;
    int idler_width_ = 0;
    JointClickStatistics joint_;
};

/// Runs the configured number of shots on `workers` threads (0 = hardware
/// concurrency). The tally depends only on the configuration and seed.
ExperimentTally run_experiment(const ExperimentConfig &config, unsigned workers = 0);

struct KlyshkoCalibration {
    /// Signal efficiency: coincidences over idler singles. Absent when the idler never fired.
    std::optional<CalibrationRecord> signal;
    /// Idler efficiency: coincidences over signal singles. Absent when the signal never fired.
    std::optional<CalibrationRecord> idler;
};

/// Threshold-detector calibration from a tally. Throws kDegenerate when
/// neither arm recorded a single.
KlyshkoCalibration klyshko_from_tally(const ExperimentTally &tally);

/// Simulates setup A and calibrates both arms.
KlyshkoCalibration simulate_klyshko(const SourceModel &source, double eta_signal, double eta_idler,
                                    std::uint64_t shots, std::uint64_t seed, unsigned workers = 0);

}  // namespace tmd
