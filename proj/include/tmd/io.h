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
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tmd/detector.h"
#include "tmd/distribution.h"
#include "tmd/montecarlo.h"
#include "tmd/reconstruct.h"

namespace tmd {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Everything a run needs: the experiment plus how to reconstruct from it.
struct RunConfig {
    ExperimentConfig experiment;
    /// Photon-number truncation of every reconstructed axis.
    int reconstruction_n_max = kDefaultBins;
    InversionMethod method = InversionMethod::kDirect;

    bool operator==(const RunConfig &) const = default;
};

/// Strict schema: unknown keys and type mismatches throw kConfig naming the
/// offending field. Defaults are resolved, so serialize(parse(x)) is the
/// normalized form of x.
RunConfig parse_config(const Json &doc);
RunConfig parse_config_file(const std::filesystem::path &path);
Json serialize_config(const RunConfig &config);

/// Result documents. Every from_json checks format_version and the "type" tag
/// and throws kData on mismatch.
Json to_json(const PhotonDistribution &dist);
Json to_json(const JointPhotonDistribution &dist);
Json to_json(const ClickStatistics &clicks);
Json to_json(const JointClickStatistics &clicks);
Json to_json(const CalibrationRecord &record);
Json to_json(const FitResult &fit);
Json to_json(const ReconstructionResult &result);
Json to_json(const JointReconstructionResult &result);

PhotonDistribution photon_distribution_from_json(const Json &doc);
JointPhotonDistribution joint_distribution_from_json(const Json &doc);
ClickStatistics click_statistics_from_json(const Json &doc);
JointClickStatistics joint_click_statistics_from_json(const Json &doc);
CalibrationRecord calibration_from_json(const Json &doc);
FitResult fit_from_json(const Json &doc);
ReconstructionResult reconstruction_from_json(const Json &doc);
JointReconstructionResult joint_reconstruction_from_json(const Json &doc);

/// dB values with one decimal; -infinity as "-inf", NaN as "nan".
std::string render_db(double db);

/// Two-space indented JSON with a trailing newline.
std::string dump(const Json &doc);

/// Reads and parses a JSON file. Throws kData if missing or malformed.
Json read_json_file(const std::filesystem::path &path);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, std::string_view content);

/// Shot CSV header, `shot_id,signal_mask,idler_mask`; setups without an
/// idler column drop the last field.
std::string shot_csv_header(const ExperimentConfig &config);
void write_shot_row(std::ostream &out, const ShotRecord &shot, bool with_idler);

/// Simulates `config`, streams every shot to `path` atomically, and returns
/// the aggregate of the shots written.
ExperimentTally write_shots_csv(const std::filesystem::path &path, const ExperimentConfig &config);

/// Aggregates a shot CSV. The idler column is optional. Throws kData on an
/// empty file ("no shots"), a malformed row (with its line number), or a mask
/// with bits beyond the declared bin count.
ExperimentTally ingest_shots(std::istream &in, Setup setup, int signal_width, int idler_width);
ExperimentTally ingest_shots(const std::filesystem::path &path, const ExperimentConfig &config);

/// Per-run provenance record. Paths are relative to the output directory.
struct RunManifest {
    std::string command;
    Json config;
    std::uint64_t seed = 0;
    std::string tool_version{kToolVersion};
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_clock_seconds = 0.0;
};

Json to_json(const RunManifest &manifest);
RunManifest manifest_from_json(const Json &doc);

/// `n,p,sigma` table; sigma is left empty without a covariance.
std::string distribution_csv(const PhotonDistribution &dist, const Eigen::MatrixXd *covariance = nullptr);
/// `n,m,p` table.
std::string joint_csv(const JointPhotonDistribution &dist);

}  // namespace tmd
