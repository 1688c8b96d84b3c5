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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "tmd/detector.h"
#include "tmd/distribution.h"

namespace tmd {

/// Efficiency estimate from coincidence and singles rates of a pair source.
struct CalibrationRecord {
    double rate_coincidence = 0.0;
    double rate_singles = 0.0;
    double eta_estimate = 0.0;
    /// Binomial standard error; only known when counts, not rates, were given.
    std::optional<double> eta_uncertainty;

    bool operator==(const CalibrationRecord &) const = default;
};

/// eta = R_C / R_S, where R_S counts the heralding arm.
/// Throws kDomain for negative rates or R_C > R_S, kDegenerate for R_S = 0.
CalibrationRecord klyshko_efficiency(double r_coincidence, double r_singles);

/// Counting version: also reports sqrt(eta (1 - eta) / singles).
CalibrationRecord klyshko_from_counts(std::uint64_t coincidences, std::uint64_t singles);

enum class InversionMethod {
    kDirect,       // pseudo-inverse, then renormalize
    kConstrained,  // non-negative least squares, then renormalize
};

std::string_view to_string(InversionMethod method);

struct InversionOptions {
    InversionMethod method = InversionMethod::kDirect;
    /// Standard uncertainty of the detector efficiency used for the inversion.
    double sigma_eta = 0.0;
};

/// Moore-Penrose pseudo-inverse of a full-column-rank detector matrix.
///
/// Detector matrices at low efficiency are strongly row graded (row c scales
/// like eta^c), so their plain 2-norm condition number is astronomically
/// large even though the system is perfectly well posed. Rows are sorted by
/// decreasing size and factored with unpivoted Householder QR, which is
/// row-wise backward stable; this keeps full relative accuracy on the small
/// rows where an SVD-based pseudo-inverse would lose everything.
class PseudoInverse {
   public:
    /// Throws kConditioning when the matrix is rank deficient.
    explicit PseudoInverse(const Eigen::MatrixXd &a);

    const Eigen::MatrixXd &matrix() const {
        return pinv_;
    }
    /// ||A||_2 ||A^+||_2.
    double condition_number() const {
        return condition_;
    }
    /// Condition number after scaling every row to unit max-norm.
    double equilibrated_condition_number() const {
        return equilibrated_condition_;
    }

   private:
    Eigen::MatrixXd pinv_;
    double condition_ = 1.0;
    double equilibrated_condition_ = 1.0;
};

/// Row-equilibrated condition numbers above this are treated as rank deficiency.
inline constexpr double kMaxEquilibratedCondition = 1e12;

struct ReconstructionResult {
    PhotonDistribution dist;
    /// Covariance of dist's entries from counting noise and efficiency uncertainty.
    Eigen::MatrixXd covariance;
    double condition_number = 1.0;
    /// ||A p - rho||_2 of the least-squares (direct) or constrained solution before renormalization.
    double residual = 0.0;
    InversionMethod method = InversionMethod::kDirect;

    double sigma(int n) const {
        return std::sqrt(std::max(0.0, covariance(n, n)));
    }
};

struct JointReconstructionResult {
    JointPhotonDistribution dist;
    /// Per-axis covariances of the marginals; the full joint covariance is not propagated.
    Eigen::MatrixXd signal_covariance;
    Eigen::MatrixXd idler_covariance;
    double condition_number = 1.0;
    double residual = 0.0;
    InversionMethod method = InversionMethod::kDirect;
};

/// Recovers the photon distribution over 0..tmd.n_max from single-detector click data.
/// Throws kTruncation when tmd.n_max exceeds the bin count, kConditioning when
/// the composite matrix is rank deficient, kDomain on a click-range mismatch.
ReconstructionResult invert_single(const TMDConfig &tmd, const ClickStatistics &clicks,
                                   const InversionOptions &options = {});

/// Exact click frequencies (infinite-shot limit): counting covariance is zero.
ReconstructionResult invert_single(const TMDConfig &tmd, const PhotonDistribution &click_frequencies,
                                   const InversionOptions &options = {});

/// First-order covariance of the direct reconstruction: multinomial counting
/// noise on the clicks plus sigma_eta through a central finite-difference
/// derivative of the inversion with respect to efficiency.
Eigen::MatrixXd propagate_errors(const TMDConfig &tmd, const ClickStatistics &clicks, double sigma_eta);

/// Same, with the counting term driven by `click_frequencies` at `shots`
/// shots; no shots means exact frequencies (no counting term).
Eigen::MatrixXd propagate_errors(const TMDConfig &tmd, const PhotonDistribution &click_frequencies,
                                 std::optional<std::uint64_t> shots, double sigma_eta);

/// Finite-difference step for the efficiency derivative.
inline constexpr double kEtaStep = 1e-6;

/// Derivative of the renormalized direct solution with respect to efficiency.
Eigen::VectorXd efficiency_jacobian(const TMDConfig &tmd, const Eigen::VectorXd &rho, double step = kEtaStep);

struct JointInversionOptions {
    InversionMethod method = InversionMethod::kDirect;
    double sigma_eta_signal = 0.0;
    double sigma_eta_idler = 0.0;
};

/// Recovers p(n, m) by applying the per-axis pseudo-inverses along each axis.
JointReconstructionResult invert_joint(const TMDConfig &tmd_signal, const TMDConfig &tmd_idler,
                                       const JointClickStatistics &clicks, const JointInversionOptions &options = {});

JointReconstructionResult invert_joint(const TMDConfig &tmd_signal, const TMDConfig &tmd_idler,
                                       const JointPhotonDistribution &click_frequencies,
                                       const JointInversionOptions &options = {});

/// Total photon number statistics from a detector receiving both arms.
///
/// Binomial loss on the summed photon number is exact only when the arm
/// efficiencies are equal; otherwise their mean is used as the effective
/// efficiency.
ReconstructionResult invert_collective(const TMDConfig &tmd, const ClickStatistics &clicks, double eta_signal,
                                       double eta_idler, const InversionOptions &options = {});

}  // namespace tmd
