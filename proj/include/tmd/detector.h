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

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tmd/distribution.h"

namespace tmd {

/// Default number of time bins of a fiber-loop detector.
inline constexpr int kDefaultBins = 8;
/// The convolution matrix enumerates bin subsets; more bins than this is refused.
inline constexpr int kMaxBins = 20;

/// Time-multiplexed detector: bin occupation probabilities, per-photon
/// survival probability, and the photon-number truncation of the model.
struct TMDConfig {
    std::vector<double> bin_probs;
    double efficiency = 1.0;
    int n_max = kDefaultBins;

    static TMDConfig uniform(int bins, double efficiency, int n_max);

    int bins() const {
        return static_cast<int>(bin_probs.size());
    }
    TMDConfig with_n_max(int n) const;
    TMDConfig with_efficiency(double eta) const;

    /// Throws kDomain on any invariant violation, kComplexity above kMaxBins.
    void validate() const;

    bool operator==(const TMDConfig &) const = default;
};

/// Throws kDomain unless the vector is a valid set of bin probabilities.
void validate_bin_probs(std::span<const double> bin_probs);

enum class MatrixKind { kLoss, kConvolution, kComposite };

std::string_view to_string(MatrixKind kind);

/// Column-stochastic map from true counts (columns) to observed counts (rows).
struct DetectorMatrix {
    Eigen::MatrixXd entries;
    MatrixKind kind = MatrixKind::kComposite;
};

/// Binomial loss L(n, m) = binom(m, n) eta^n (1 - eta)^(m - n), (n_max + 1) square.
DetectorMatrix loss_matrix(double eta, int n_max);

/// Probability that n photons, each landing in bin k with probability P_k,
/// occupy exactly c distinct bins. (K + 1) x (n_max + 1). Results are cached
/// per (bin_probs, n_max); the cache is safe for concurrent use.
DetectorMatrix convolution_matrix(std::span<const double> bin_probs, int n_max);

/// C * L(eta) for the detector.
DetectorMatrix composite_matrix(const TMDConfig &tmd);

/// Click-number distribution C L(eta) p over 0..K.
PhotonDistribution forward(const TMDConfig &tmd, const PhotonDistribution &p);

/// Joint click distribution of two detectors reading the two arms of `joint`.
JointPhotonDistribution joint_forward(const TMDConfig &tmd_signal, const TMDConfig &tmd_idler,
                                      const JointPhotonDistribution &joint);

/// Click distribution of one shared detector receiving both arms, with
/// separate arm efficiencies. tmd.efficiency is not used.
PhotonDistribution collective_forward(const TMDConfig &tmd, const JointPhotonDistribution &joint, double eta_signal,
                                      double eta_idler);

/// Threshold-detector click probability 1 - sum_n p_n (1 - eta)^n.
double threshold_click_probability(const PhotonDistribution &p, double eta);

}  // namespace tmd
