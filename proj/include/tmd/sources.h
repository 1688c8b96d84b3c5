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

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tmd/distribution.h"

namespace tmd {

/// Truncation rule for a photon distribution of mean `mean`:
/// max(10, ceil(mean + 15 * sqrt(mean * (1 + mean)))). Thermal tails are the
/// heaviest family handled, so this bound covers every source here.
int default_n_max(double mean);

/// Single-mode thermal statistics p_n = mean^n / (1 + mean)^(n + 1), renormalized over 0..n_max.
PhotonDistribution thermal_dist(double mean, int n_max);

/// Poissonian statistics p_n = e^-mean mean^n / n!, renormalized over 0..n_max.
PhotonDistribution poisson_dist(double mean, int n_max);

/// Discrete convolution, kept to the full support a.n_max + b.n_max.
PhotonDistribution convolve(const PhotonDistribution &a, const PhotonDistribution &b);

/// Photon statistics of `modes` equally populated thermal modes with total
/// mean `total_mean` (negative binomial law), renormalized over 0..n_max.
PhotonDistribution multimode_pair_dist(int modes, double total_mean, int n_max);

/// Unequal mode populations: explicit convolution of one thermal law per mode.
PhotonDistribution multimode_pair_dist(std::span<const double> mode_means, int n_max);

/// Perfectly number-correlated twin beam p(n, n) = pair_dist(n).
JointPhotonDistribution twin_beam_joint(const PhotonDistribution &pair_dist);

enum class SourceFamily {
    kThermalPairs,    // single-mode squeezer
    kMultimodePairs,  // M thermal modes
    kPoissonPairs,    // infinitely many modes
    kFockPairs,       // exactly n pairs
};

std::string_view to_string(SourceFamily family);
/// Parses the names produced by to_string. Throws kConfig on anything else.
SourceFamily source_family_from_string(std::string_view name);

/// Twin-beam source described by its pair-number distribution.
class SourceModel {
   public:
    /// When n_max is absent the default truncation rule is applied to the mean.
    static SourceModel single_mode(double mean, std::optional<int> n_max = {});
    static SourceModel multimode(int modes, double total_mean, std::optional<int> n_max = {});
    static SourceModel multimode(std::vector<double> mode_means, std::optional<int> n_max = {});
    static SourceModel poisson_pairs(double mean, std::optional<int> n_max = {});
    static SourceModel fock_pairs(int n, std::optional<int> n_max = {});

    SourceFamily family() const {
        return family_;
    }
    /// Mean pair number requested at construction (for Fock pairs, n).
    double mean() const {
        return mean_;
    }
    int modes() const {
        return modes_;
    }
    const std::vector<double> &mode_means() const {
        return mode_means_;
    }
    int fock_number() const {
        return fock_n_;
    }
    int n_max() const {
        return pair_dist_.n_max();
    }
    const PhotonDistribution &pair_dist() const {
        return pair_dist_;
    }
    JointPhotonDistribution joint() const {
        return twin_beam_joint(pair_dist_);
    }

    bool operator==(const SourceModel &other) const;

   private:
    SourceModel() = default;

    SourceFamily family_ = SourceFamily::kFockPairs;
    double mean_ = 0.0;
    int modes_ = 1;
    std::vector<double> mode_means_;
    int fock_n_ = 0;
    PhotonDistribution pair_dist_;
};

}  // namespace tmd
