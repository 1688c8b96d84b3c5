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
#include <vector>

#include <Eigen/Dense>

namespace tmd {

/// Probabilities must sum to one within this bound.
inline constexpr double kNormTolerance = 1e-9;

/// Reconstructed probabilities may dip this far below zero and still count as physical.
inline constexpr double kNegativeTolerance = 1e-3;

/// Probability vector over photon number n = 0..n_max.
///
/// The same type also carries click-number distributions (index = number of
/// bins that fired), which is what the forward detector model produces.
/// Entries are finite and sum to one; they are not required to be
/// non-negative because direct inversion of noisy data can undershoot.
class PhotonDistribution {
   public:
    /// Vacuum, {p_0 = 1}.
    PhotonDistribution();

    /// Validates length, finiteness, and normalization.
    explicit PhotonDistribution(Eigen::VectorXd probs);
    explicit PhotonDistribution(const std::vector<double> &probs);

    /// Divides by the sum. Throws kDegenerate if the sum is not positive.
    static PhotonDistribution normalized(Eigen::VectorXd weights);

    static PhotonDistribution vacuum(int n_max = 0);
    static PhotonDistribution fock(int n, int n_max);

    int n_max() const {
        return static_cast<int>(probs_.size()) - 1;
    }
    const Eigen::VectorXd &probs() const {
        return probs_;
    }
    /// Probability at n; zero beyond the truncation.
    double at(int n) const;
    double operator[](int n) const {
        return probs_[n];
    }

    double mean() const;
    bool is_physical(double tol = kNegativeTolerance) const;

    /// Zero-extends to a larger truncation.
    PhotonDistribution padded(int n_max) const;

    std::vector<double> to_vector() const;

    bool operator==(const PhotonDistribution &other) const {
        return probs_ == other.probs_;
    }

   private:
    Eigen::VectorXd probs_;
};

/// Joint probability p(n, m) over signal photon number n (rows) and idler
/// photon number m (columns).
class JointPhotonDistribution {
   public:
    JointPhotonDistribution();
    explicit JointPhotonDistribution(Eigen::MatrixXd probs);

    static JointPhotonDistribution normalized(Eigen::MatrixXd weights);
    static JointPhotonDistribution product(const PhotonDistribution &signal, const PhotonDistribution &idler);

    int n_max_signal() const {
        return static_cast<int>(probs_.rows()) - 1;
    }
    int n_max_idler() const {
        return static_cast<int>(probs_.cols()) - 1;
    }
    const Eigen::MatrixXd &probs() const {
        return probs_;
    }
    double operator()(int n, int m) const {
        return probs_(n, m);
    }

    bool is_physical(double tol = kNegativeTolerance) const;
    bool is_diagonal() const;

    bool operator==(const JointPhotonDistribution &other) const {
        return probs_ == other.probs_;
    }

   private:
    Eigen::MatrixXd probs_;
};

/// Observed click-count histogram of one detector: counts[c] shots fired c bins.
class ClickStatistics {
   public:
    ClickStatistics() = default;
    explicit ClickStatistics(std::vector<std::uint64_t> counts);
    /// Throws kData if the counts do not add up to total_shots.
    ClickStatistics(std::vector<std::uint64_t> counts, std::uint64_t total_shots);

    int max_clicks() const {
        return static_cast<int>(counts_.size()) - 1;
    }
    const std::vector<std::uint64_t> &counts() const {
        return counts_;
    }
    std::uint64_t total_shots() const {
        return total_;
    }

    /// counts / total_shots. Throws kData on zero shots.
    PhotonDistribution frequencies() const;

    bool operator==(const ClickStatistics &) const = default;

   private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Coincidence histogram of two detectors: counts(k, l) shots fired k signal bins and l idler bins.
class JointClickStatistics {
   public:
    JointClickStatistics() = default;
    JointClickStatistics(int max_clicks_signal, int max_clicks_idler);

    int max_clicks_signal() const {
        return rows_ - 1;
    }
    int max_clicks_idler() const {
        return cols_ - 1;
    }
    std::uint64_t total_shots() const {
        return total_;
    }

    std::uint64_t count(int k, int l) const {
        return counts_[static_cast<std::size_t>(k) * cols_ + l];
    }
    void add(int k, int l, std::uint64_t n = 1);
    void merge(const JointClickStatistics &other);

    ClickStatistics signal_marginal() const;
    ClickStatistics idler_marginal() const;
    /// Idler click histogram restricted to shots where the signal fired exactly `k` bins.
    ClickStatistics idler_given_signal(int k) const;
    /// Signal click histogram restricted to shots where the idler fired exactly `l` bins.
    ClickStatistics signal_given_idler(int l) const;

    /// Frequencies as a joint distribution indexed by click numbers.
    JointPhotonDistribution frequencies() const;

    bool operator==(const JointClickStatistics &) const = default;

   private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Best one-parameter fit of a reference family.
struct FitResult {
    double mean = 0.0;
    double residual_l2 = 0.0;
    /// observed - model per photon number
    std::vector<double> per_bin_deviation;
    int iterations = 0;
};

}  // namespace tmd
