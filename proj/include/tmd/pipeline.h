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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tmd/io.h"
#include "tmd/montecarlo.h"

namespace tmd {

/// Rates are simulated per shot; per-second figures assume this pump repetition rate.
inline constexpr double kRepetitionRateHz = 1e6;

struct CommandOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> input;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> shots;
    std::filesystem::path out = "out";
    bool constrained = false;
    unsigned workers = 0;
};

/// Result of one analysis: a summary document plus named files (JSON
/// documents and CSV tables) to be written next to it.
struct Report {
    Json summary;
    std::vector<std::pair<std::string, std::string>> files;
};

/// Built-in configuration of each replicated setup.
RunConfig default_replicate_config(Setup setup);

/// Efficiency calibration from threshold coincidences (setups A, B, D).
Report calibrate_report(const RunConfig &config, const ExperimentTally &tally);

/// Setup-appropriate reconstruction: joint for A and D, idler marginal for B,
/// collective for C.
Report reconstruct_report(const RunConfig &config, const ExperimentTally &tally, unsigned workers = 0);

/// Correlation, squeezing and moments of a joint distribution.
Json joint_metrics(const JointPhotonDistribution &joint);
/// Moments of a single distribution.
Json single_metrics(const PhotonDistribution &dist);
/// Poissonian and thermal fits with their one-photon deviations.
Json fit_report(const PhotonDistribution &dist);

/// Simulate, calibrate, reconstruct and evaluate one setup.
Report replicate(const RunConfig &config, unsigned workers = 0);

/// Runs a subcommand (simulate, calibrate, reconstruct, metrics, fit,
/// replicate) and writes its files plus manifest.json into options.out.
/// `target` names the setup for replicate. Returns the summary.
Json run_command(std::string_view command, std::optional<Setup> target, const CommandOptions &options);

}  // namespace tmd
