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

#include "tmd/reconstruct.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "tmd/error.h"
#include "tmd/nnls.h"

namespace tmd {

CalibrationRecord klyshko_efficiency(double r_coincidence, double r_singles) {
    if (!(r_coincidence >= 0.0) || !(r_singles >= 0.0) || !std::isfinite(r_coincidence) ||
        !std::isfinite(r_singles)) {
        fail(ErrorCode::kDomain, "count rates must be finite and non-negative");
    }
    if (r_singles == 0.0) {
        fail(ErrorCode::kDegenerate, "singles rate is zero; efficiency undefined");
    }
    if (r_coincidence > r_singles) {
        fail(ErrorCode::kDomain, "coincidence rate " + std::to_string(r_coincidence) + " exceeds singles rate " +
                                     std::to_string(r_singles) + "; coincidences are miscounted");
    }
    return {r_coincidence, r_singles, r_coincidence / r_singles, std::nullopt};
}

CalibrationRecord klyshko_from_counts(std::uint64_t coincidences, std::uint64_t singles) {
    auto record = klyshko_efficiency(static_cast<double>(coincidences), static_cast<double>(singles));
    double eta = record.eta_estimate;
    record.eta_uncertainty = std::sqrt(eta * (1.0 - eta) / static_cast<double>(singles));
    return record;
}

std::string_view to_string(InversionMethod method) {
    return method == InversionMethod::kDirect ? "direct" : "constrained";
}

PseudoInverse::PseudoInverse(const Eigen::MatrixXd &a) {
    const Eigen::Index rows = a.rows();
    const Eigen::Index cols = a.cols();

    Eigen::VectorXd row_norm = a.rowwise().lpNorm<Eigen::Infinity>();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return row_norm[x] > row_norm[y]; });

    Eigen::Index live = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        live += row_norm[r] > 0.0 ? 1 : 0;
    }
    if (live < cols) {
        fail(ErrorCode::kConditioning, "detector matrix has rank at most " + std::to_string(live) + " but " +
                                           std::to_string(cols) + " photon numbers are requested");
    }

    Eigen::MatrixXd sorted(rows, cols);
    Eigen::MatrixXd equilibrated(live, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        sorted.row(r) = a.row(order[r]);
        if (r < live) {
            equilibrated.row(r) = sorted.row(r) / row_norm[order[r]];
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> eq_svd(equilibrated);
    const auto &eq_sv = eq_svd.singularValues();
    equilibrated_condition_ = eq_sv[cols - 1] > 0.0 ? eq_sv[0] / eq_sv[cols - 1]
                                                    : std::numeric_limits<double>::infinity();
    if (!(equilibrated_condition_ <= kMaxEquilibratedCondition)) {
        fail(ErrorCode::kConditioning,
             "detector matrix is numerically rank deficient (equilibrated condition number " +
                 std::to_string(equilibrated_condition_) + ")");
    }

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sorted);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    Eigen::MatrixXd sorted_pinv = r.triangularView<Eigen::Upper>().solve(q.transpose());

    pinv_.resize(cols, rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        pinv_.col(order[k]) = sorted_pinv.col(k);
    }

    double a_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()[0];
    double pinv_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(pinv_).singularValues()[0];
    condition_ = std::max(1.0, a_norm * pinv_norm);
}

namespace {

void check_inversion_shape(const TMDConfig &tmd, int click_range) {
    tmd.validate();
    if (tmd.n_max > tmd.bins()) {
        fail(ErrorCode::kTruncation, "n_max " + std::to_string(tmd.n_max) + " exceeds the " +
                                         std::to_string(tmd.bins()) +
                                         " bins; photon numbers beyond the bin count are unresolvable");
    }
    if (click_range != tmd.bins()) {
        fail(ErrorCode::kDomain, "click data covers 0.." + std::to_string(click_range) + " but the detector has " +
                                     std::to_string(tmd.bins()) + " bins");
    }
}

Eigen::VectorXd renormalized(const Eigen::VectorXd &p) {
    double total = p.sum();
    if (!(total > 0.0)) {
        fail(ErrorCode::kDegenerate, "reconstruction has non-positive total probability");
    }
    return p / total;
}

// d(p / sum p) / dp evaluated at the unnormalized solution.
Eigen::MatrixXd normalization_jacobian(const Eigen::VectorXd &unnormalized) {
    double total = unnormalized.sum();
    auto n = unnormalized.size();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n) / total;
    jac -= unnormalized * Eigen::RowVectorXd::Ones(n) / (total * total);
    return jac;
}

Eigen::MatrixXd multinomial_covariance(const Eigen::VectorXd &rho, double shots) {
    Eigen::MatrixXd cov = Eigen::MatrixXd(rho.asDiagonal()) - rho * rho.transpose();
    return cov / shots;
}

Eigen::VectorXd direct_solution(const TMDConfig &tmd, const Eigen::VectorXd &rho) {
    PseudoInverse pinv(composite_matrix(tmd).entries);
    return renormalized(pinv.matrix() * rho);
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd &m) {
    return 0.5 * (m + m.transpose());
}

ReconstructionResult invert_frequencies(const TMDConfig &tmd, const Eigen::VectorXd &rho,
                                        std::optional<std::uint64_t> shots, const InversionOptions &options) {
    check_inversion_shape(tmd, static_cast<int>(rho.size()) - 1);
    Eigen::MatrixXd a = composite_matrix(tmd).entries;
    PseudoInverse pinv(a);

    ReconstructionResult result;
    result.condition_number = pinv.condition_number();
    result.method = options.method;
    if (options.method == InversionMethod::kDirect) {
        Eigen::VectorXd p = pinv.matrix() * rho;
        result.residual = (a * p - rho).norm();
        result.dist = PhotonDistribution(renormalized(p));
    } else {
        Eigen::VectorXd p = nnls(a, rho);
        result.residual = (a * p - rho).norm();
        result.dist = PhotonDistribution(renormalized(p));
    }
    result.covariance = propagate_errors(tmd, PhotonDistribution(rho), shots, options.sigma_eta);
    return result;
}

}  // namespace

ReconstructionResult invert_single(const TMDConfig &tmd, const ClickStatistics &clicks,
                                   const InversionOptions &options) {
    return invert_frequencies(tmd, clicks.frequencies().probs(), clicks.total_shots(), options);
}

ReconstructionResult invert_single(const TMDConfig &tmd, const PhotonDistribution &click_frequencies,
                                   const InversionOptions &options) {
    return invert_frequencies(tmd, click_frequencies.probs(), std::nullopt, options);
}

Eigen::VectorXd efficiency_jacobian(const TMDConfig &tmd, const Eigen::VectorXd &rho, double step) {
    double lo = std::max(0.0, tmd.efficiency - step);
    double hi = std::min(1.0, tmd.efficiency + step);
    if (!(hi > lo) || lo == 0.0) {
        // Central difference needs eta - step > 0; at the boundary fall back to a one-sided step.
        lo = tmd.efficiency;
        hi = std::min(1.0, tmd.efficiency + step);
        if (!(hi > lo)) {
            lo = tmd.efficiency - step;
            hi = tmd.efficiency;
        }
    }
    Eigen::VectorXd p_hi = direct_solution(tmd.with_efficiency(hi), rho);
    Eigen::VectorXd p_lo = direct_solution(tmd.with_efficiency(lo), rho);
    return (p_hi - p_lo) / (hi - lo);
}

Eigen::MatrixXd propagate_errors(const TMDConfig &tmd, const PhotonDistribution &click_frequencies,
                                 std::optional<std::uint64_t> shots, double sigma_eta) {
    const Eigen::VectorXd &rho = click_frequencies.probs();
    check_inversion_shape(tmd, static_cast<int>(rho.size()) - 1);
    if (!(sigma_eta >= 0.0)) {
        fail(ErrorCode::kDomain, "efficiency uncertainty must be non-negative");
    }
    PseudoInverse pinv(composite_matrix(tmd).entries);
    Eigen::VectorXd unnormalized = pinv.matrix() * rho;
    auto n = unnormalized.size();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    if (shots.has_value()) {
        if (*shots == 0) {
            fail(ErrorCode::kData, "no shots");
        }
        Eigen::MatrixXd jac = normalization_jacobian(unnormalized) * pinv.matrix();
        cov += jac * multinomial_covariance(rho, static_cast<double>(*shots)) * jac.transpose();
    }
    if (sigma_eta > 0.0) {
        Eigen::VectorXd grad = efficiency_jacobian(tmd, rho);
        cov += sigma_eta * sigma_eta * grad * grad.transpose();
    }
    return symmetrized(cov);
}

Eigen::MatrixXd propagate_errors(const TMDConfig &tmd, const ClickStatistics &clicks, double sigma_eta) {
    return propagate_errors(tmd, clicks.frequencies(), clicks.total_shots(), sigma_eta);
}

namespace {

// Column-major vec of a (rows x cols) matrix X satisfies vec(A X B^T) = (B kron A) vec(X).
Eigen::MatrixXd kronecker(const Eigen::MatrixXd &b, const Eigen::MatrixXd &a) {
    Eigen::MatrixXd out(b.rows() * a.rows(), b.cols() * a.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        for (Eigen::Index i = 0; i < b.rows(); ++i) {
            out.block(i * a.rows(), j * a.cols(), a.rows(), a.cols()) = b(i, j) * a;
        }
    }
    return out;
}

JointReconstructionResult invert_joint_frequencies(const TMDConfig &tmd_signal, const TMDConfig &tmd_idler,
                                                   const Eigen::MatrixXd &rho,
                                                   std::optional<std::uint64_t> shots,
                                                   const JointInversionOptions &options) {
    check_inversion_shape(tmd_signal, static_cast<int>(rho.rows()) - 1);
    check_inversion_shape(tmd_idler, static_cast<int>(rho.cols()) - 1);
    Eigen::MatrixXd a_s = composite_matrix(tmd_signal).entries;
    Eigen::MatrixXd a_i = composite_matrix(tmd_idler).entries;
    PseudoInverse pinv_s(a_s);
    PseudoInverse pinv_i(a_i);

    JointReconstructionResult result;
    result.method = options.method;
    result.condition_number = pinv_s.condition_number() * pinv_i.condition_number();
    if (options.method == InversionMethod::kDirect) {
        Eigen::MatrixXd p = pinv_s.matrix() * rho * pinv_i.matrix().transpose();
        result.residual = (a_s * p * a_i.transpose() - rho).norm();
        double total = p.sum();
        if (!(total > 0.0)) {
            fail(ErrorCode::kDegenerate, "joint reconstruction has non-positive total probability");
        }
        result.dist = JointPhotonDistribution(p / total);
    } else {
        Eigen::MatrixXd system = kronecker(a_i, a_s);
        Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(rho.data(), rho.size());
        Eigen::VectorXd x = nnls(system, rhs);
        result.residual = (system * x - rhs).norm();
        double total = x.sum();
        if (!(total > 0.0)) {
            fail(ErrorCode::kDegenerate, "joint reconstruction has non-positive total probability");
        }
        result.dist = JointPhotonDistribution(Eigen::Map<Eigen::MatrixXd>(x.data(), a_s.cols(), a_i.cols()) / total);
    }

    Eigen::VectorXd rho_s = rho.rowwise().sum();
    Eigen::VectorXd rho_i = rho.colwise().sum().transpose();
    result.signal_covariance = propagate_errors(tmd_signal, PhotonDistribution(rho_s), shots, options.sigma_eta_signal);
    result.idler_covariance = propagate_errors(tmd_idler, PhotonDistribution(rho_i), shots, options.sigma_eta_idler);
    return result;
}

}  // namespace

JointReconstructionResult invert_joint(const TMDConfig &tmd_signal, const TMDConfig &tmd_idler,
                                       const JointClickStatistics &clicks, const JointInversionOptions &options) {
    return invert_joint_frequencies(tmd_signal, tmd_idler, clicks.frequencies().probs(), clicks.total_shots(),
                                    options);
}

JointReconstructionResult invert_joint(const TMDConfig &tmd_signal, const TMDConfig &tmd_idler,
                                       const JointPhotonDistribution &click_frequencies,
                                       const JointInversionOptions &options) {
    return invert_joint_frequencies(tmd_signal, tmd_idler, click_frequencies.probs(), std::nullopt, options);
}

ReconstructionResult invert_collective(const TMDConfig &tmd, const ClickStatistics &clicks, double eta_signal,
                                       double eta_idler, const InversionOptions &options) {
    if (!(eta_signal >= 0.0 && eta_signal <= 1.0 && eta_idler >= 0.0 && eta_idler <= 1.0)) {
        fail(ErrorCode::kDomain, "arm efficiencies must lie in [0, 1]");
    }
    return invert_single(tmd.with_efficiency(0.5 * (eta_signal + eta_idler)), clicks, options);
}

}  // namespace tmd
