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

#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"
#include "tmd/detector.h"
#include "tmd/montecarlo.h"
#include "tmd/reconstruct.h"
#include "tmd/sources.h"
#include "tmd/stats.h"

using namespace tmd;
using tmd::testing::error_of;

namespace {

PhotonDistribution random_dist(std::mt19937_64 &rng, int n_max) {
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd w(n_max + 1);
    for (int i = 0; i <= n_max; ++i) {
        w[i] = e(rng);
    }
    return PhotonDistribution::normalized(w);
}

double max_abs(const Eigen::MatrixXd &m) {
    return m.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Klyshko, Examples) {
    EXPECT_EQ(klyshko_efficiency(0, 500).eta_estimate, 0.0);
    EXPECT_EQ(klyshko_efficiency(1000, 1000).eta_estimate, 1.0);
    EXPECT_NEAR(klyshko_efficiency(674, 5764).eta_estimate, 0.117, 5e-4);
    EXPECT_FALSE(klyshko_efficiency(674, 5764).eta_uncertainty.has_value());

    CalibrationRecord counted = klyshko_from_counts(674, 5764);
    double eta = 674.0 / 5764.0;
    EXPECT_DOUBLE_EQ(counted.eta_estimate, eta);
    ASSERT_TRUE(counted.eta_uncertainty.has_value());
    EXPECT_NEAR(*counted.eta_uncertainty, std::sqrt(eta * (1 - eta) / 5764.0), 1e-15);
}

TEST(Klyshko, Errors) {
    EXPECT_EQ(error_of([] { klyshko_efficiency(1001, 1000); }), ErrorCode::kDomain);
    EXPECT_EQ(error_of([] { klyshko_efficiency(-1, 1000); }), ErrorCode::kDomain);
    EXPECT_EQ(error_of([] { klyshko_efficiency(0, 0); }), ErrorCode::kDegenerate);
    EXPECT_EQ(error_of([] { klyshko_from_counts(0, 0); }), ErrorCode::kDegenerate);
}

TEST(Klyshko, ScaleInvariant) {
    for (double scale : {1e-6, 0.37, 1.0, 12.5, 1e9}) {
        EXPECT_NEAR(klyshko_efficiency(674 * scale, 5764 * scale).eta_estimate, 674.0 / 5764.0, 1e-15);
    }
}

TEST(InvertSingle, Vacuum) {
    ReconstructionResult r = invert_single(TMDConfig::uniform(8, 0.117, 8), PhotonDistribution::vacuum(8));
    EXPECT_LT(max_abs(r.dist.probs() - PhotonDistribution::vacuum(8).probs()), 1e-12);
    EXPECT_LT(r.residual, 1e-12);
    EXPECT_GE(r.condition_number, 1.0);
}

TEST(InvertSingle, RoundtripAcrossEfficiencies) {
    std::mt19937_64 rng(17);
    for (double eta : {1.0, 0.5, 0.117, 0.1}) {
        TMDConfig tmd = TMDConfig::uniform(8, eta, 8);
        for (int trial = 0; trial < 10; ++trial) {
            PhotonDistribution p = random_dist(rng, 8);
            ReconstructionResult r = invert_single(tmd, forward(tmd, p));
            EXPECT_LT(max_abs(r.dist.probs() - p.probs()), 1e-8) << "eta=" << eta;
        }
    }
}

TEST(InvertSingle, LossToleranceDownToTwoPercent) {
    std::mt19937_64 rng(23);
    for (double eta : {0.05, 0.0274, 0.02}) {
        TMDConfig tmd = TMDConfig::uniform(8, eta, 8);
        for (int trial = 0; trial < 10; ++trial) {
            PhotonDistribution p = random_dist(rng, 8);
            ReconstructionResult r = invert_single(tmd, forward(tmd, p));
            EXPECT_LT(max_abs(r.dist.probs() - p.probs()), 1e-6) << "eta=" << eta;
        }
    }
}

TEST(InvertSingle, SmallerTruncationAndNonUniformBins) {
    TMDConfig tmd{{0.3, 0.1, 0.2, 0.15, 0.25}, 0.4, 3};
    PhotonDistribution p(std::vector<double>{0.1, 0.5, 0.3, 0.1});
    ReconstructionResult r = invert_single(tmd, forward(tmd, p));
    EXPECT_LT(max_abs(r.dist.probs() - p.probs()), 1e-10);
}

TEST(InvertSingle, Errors) {
    PhotonDistribution clicks8 = forward(TMDConfig::uniform(8, 0.5, 8), thermal_dist(0.5, 8));
    EXPECT_EQ(error_of([&] { invert_single(TMDConfig::uniform(8, 0.5, 9), clicks8); }), ErrorCode::kTruncation);
    EXPECT_EQ(error_of([&] { invert_single(TMDConfig::uniform(4, 0.5, 4), clicks8); }), ErrorCode::kDomain);
    EXPECT_EQ(error_of([&] { invert_single(TMDConfig::uniform(8, 0.0, 8), clicks8); }), ErrorCode::kConditioning);
    // A bin that never fires leaves only seven resolvable click numbers.
    TMDConfig dead{{0.0, 0.2, 0.1, 0.1, 0.1, 0.2, 0.2, 0.1}, 0.5, 8};
    EXPECT_EQ(error_of([&] { invert_single(dead, clicks8); }), ErrorCode::kConditioning);
}

TEST(InvertSingle, ConstrainedIsPhysicalWithLargerResidual) {
    Rng rng(4);
    TMDConfig tmd = TMDConfig::uniform(8, 0.117, 8);
    ExperimentConfig config;
    config.setup = Setup::kB;
    config.source = SourceModel::single_mode(0.5);
    config.idler.efficiency = 0.117;
    config.shots = 20000;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        config.seed = seed;
        ClickStatistics clicks = run_experiment(config, 1).idler();
        ReconstructionResult direct = invert_single(tmd, clicks);
        ReconstructionResult constrained = invert_single(tmd, clicks, {InversionMethod::kConstrained});
        EXPECT_EQ(constrained.method, InversionMethod::kConstrained);
        EXPECT_GE(constrained.dist.probs().minCoeff(), 0.0);
        EXPECT_NEAR(constrained.dist.probs().sum(), 1.0, 1e-12);
        EXPECT_TRUE(constrained.dist.is_physical(0.0));
        EXPECT_GE(constrained.residual, direct.residual - 1e-12);
    }
}

TEST(InvertSingle, ConstrainedRecoversExactData) {
    TMDConfig tmd = TMDConfig::uniform(8, 0.5, 8);
    PhotonDistribution p = thermal_dist(0.8, 8);
    ReconstructionResult r = invert_single(tmd, forward(tmd, p), {InversionMethod::kConstrained});
    EXPECT_LT(max_abs(r.dist.probs() - p.probs()), 1e-6);
}

TEST(InvertSingle, ConditionNumberNonIncreasingInEfficiency) {
    PhotonDistribution clicks = PhotonDistribution::vacuum(8);
    double previous = std::numeric_limits<double>::infinity();
    for (double eta = 0.01; eta <= 1.0 + 1e-12; eta += 0.01) {
        double cond = invert_single(TMDConfig::uniform(8, std::min(eta, 1.0), 8), clicks).condition_number;
        EXPECT_LE(cond, previous * (1 + 1e-9)) << "eta=" << eta;
        EXPECT_GE(cond, 1.0);
        previous = cond;
    }
}

TEST(PropagateErrors, ExactDataWithoutEfficiencyUncertainty) {
    TMDConfig tmd = TMDConfig::uniform(8, 0.117, 8);
    PhotonDistribution rho = forward(tmd, thermal_dist(0.5, 8));
    EXPECT_LT(max_abs(propagate_errors(tmd, rho, std::nullopt, 0.0)), 1e-12);
    EXPECT_LT(max_abs(invert_single(tmd, rho).covariance), 1e-12);
}

TEST(PropagateErrors, CovarianceIsSymmetricPsd) {
    TMDConfig tmd = TMDConfig::uniform(8, 0.117, 8);
    PhotonDistribution rho = forward(tmd, thermal_dist(0.5, 8));
    Eigen::MatrixXd cov = propagate_errors(tmd, rho, 100000, 0.009);
    EXPECT_LT(max_abs(cov - cov.transpose()), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9 * eig.eigenvalues().cwiseAbs().maxCoeff());
}

TEST(PropagateErrors, EfficiencyTermMatchesBootstrapOverEta) {
    const double eta = 0.117;
    const double sigma_eta = 0.009;
    TMDConfig tmd = TMDConfig::uniform(8, eta, 8);
    PhotonDistribution rho = forward(tmd, thermal_dist(0.5, 8));
    Eigen::MatrixXd cov = propagate_errors(tmd, rho, std::nullopt, sigma_eta);

    std::mt19937_64 rng(2026);
    std::normal_distribution<double> draw(eta, sigma_eta);
    const int reps = 4000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(9);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(9);
    for (int r = 0; r < reps; ++r) {
        Eigen::VectorXd p = invert_single(tmd.with_efficiency(draw(rng)), rho).dist.probs();
        sum += p;
        sum_sq += p.cwiseProduct(p);
    }
    Eigen::VectorXd mean = sum / reps;
    Eigen::VectorXd var = sum_sq / reps - mean.cwiseProduct(mean);
    // High photon numbers scale like eta^-n and respond nonlinearly to a 8% efficiency spread.
    for (int n = 0; n <= 4; ++n) {
        EXPECT_NEAR(std::sqrt(cov(n, n)) / std::sqrt(var[n]), 1.0, 0.2) << "n=" << n;
    }
}

TEST(PropagateErrors, JacobianMatchesCoarseStep) {
    TMDConfig tmd = TMDConfig::uniform(8, 0.117, 8);
    Eigen::VectorXd rho = forward(tmd, thermal_dist(0.5, 8)).probs();
    Eigen::VectorXd fine = efficiency_jacobian(tmd, rho);
    Eigen::VectorXd coarse = efficiency_jacobian(tmd, rho, 1e-4);
    EXPECT_LT((fine - coarse).norm(), 1e-3 * coarse.norm());
    // Boundary efficiency falls back to a one-sided difference.
    TMDConfig full = TMDConfig::uniform(8, 1.0, 8);
    Eigen::VectorXd at_one = efficiency_jacobian(full, forward(full, thermal_dist(0.5, 8)).probs());
    EXPECT_TRUE(at_one.allFinite());
}

TEST(PropagateErrors, MonteCarloMeanWithinThreeSigma) {
    ExperimentConfig config;
    config.setup = Setup::kB;
    config.source = SourceModel::single_mode(0.5);
    config.idler.efficiency = 0.117;
    config.shots = 1000000;
    config.seed = 77;
    ClickStatistics clicks = run_experiment(config, 1).idler();
    ReconstructionResult r = invert_single(TMDConfig::uniform(8, 0.117, 8), clicks);
    Eigen::VectorXd n = Eigen::VectorXd::LinSpaced(9, 0, 8);
    double sigma_mean = std::sqrt(n.dot(r.covariance * n));
    EXPECT_LT(std::abs(r.dist.mean() - 0.5), 3 * sigma_mean);
    EXPECT_GT(sigma_mean, 0.0);
}

TEST(InvertJoint, Examples) {
    TMDConfig s = TMDConfig::uniform(8, 0.3, 8);
    TMDConfig i = TMDConfig::uniform(8, 0.6, 8);
    Eigen::MatrixXd vac = Eigen::MatrixXd::Zero(9, 9);
    vac(0, 0) = 1.0;
    JointReconstructionResult r = invert_joint(s, i, JointPhotonDistribution(vac));
    EXPECT_LT(max_abs(r.dist.probs() - vac), 1e-12);

    std::mt19937_64 rng(31);
    std::exponential_distribution<double> e(1.0);
    Eigen::MatrixXd w(9, 9);
    for (int a = 0; a < 9; ++a) {
        for (int b = 0; b < 9; ++b) {
            w(a, b) = e(rng);
        }
    }
    JointPhotonDistribution p = JointPhotonDistribution::normalized(w);
    JointReconstructionResult back = invert_joint(s, i, joint_forward(s, i, p));
    EXPECT_LT(max_abs(back.dist.probs() - p.probs()), 1e-8);

    JointPhotonDistribution twin = twin_beam_joint(poisson_dist(0.2, 8));
    TMDConfig ls = TMDConfig::uniform(8, 0.0274, 8);
    TMDConfig li = TMDConfig::uniform(8, 0.111, 8);
    JointReconstructionResult low = invert_joint(ls, li, joint_forward(ls, li, twin));
    EXPECT_LT(max_abs(low.dist.probs() - twin.probs()), 1e-6);
    EXPECT_NEAR(correlation(low.dist), 1.0, 1e-6);
}

TEST(InvertJoint, ConstrainedIsPhysical) {
    ExperimentConfig config;
    config.setup = Setup::kD;
    config.source = SourceModel::poisson_pairs(0.2);
    config.signal.efficiency = 0.3;
    config.idler.efficiency = 0.3;
    config.shots = 50000;
    config.seed = 5;
    JointClickStatistics clicks = run_experiment(config, 1).joint();
    TMDConfig tmd = TMDConfig::uniform(8, 0.3, 4);
    JointReconstructionResult r = invert_joint(tmd, tmd, clicks, {InversionMethod::kConstrained});
    EXPECT_GE(r.dist.probs().minCoeff(), 0.0);
    EXPECT_NEAR(r.dist.probs().sum(), 1.0, 1e-12);
    JointReconstructionResult direct = invert_joint(tmd, tmd, clicks);
    EXPECT_GE(r.residual, direct.residual - 1e-12);
    EXPECT_EQ(r.signal_covariance.rows(), 5);
}

TEST(InvertCollective, RecoversTotalPhotonNumber) {
    // Equal arm efficiencies make binomial loss on the total exact.
    JointPhotonDistribution twin = twin_beam_joint(poisson_dist(0.3, 4));
    TMDConfig tmd = TMDConfig::uniform(8, 0.0, 8);
    PhotonDistribution clicks = collective_forward(tmd, twin, 0.6, 0.6);
    std::vector<std::uint64_t> counts(9);
    const double shots = 1e12;
    std::uint64_t total = 0;
    for (int c = 0; c <= 8; ++c) {
        counts[c] = static_cast<std::uint64_t>(std::llround(clicks[c] * shots));
        total += counts[c];
    }
    ReconstructionResult r = invert_collective(tmd, ClickStatistics(counts, total), 0.6, 0.6);
    PhotonDistribution expect = combine_collective(twin);
    EXPECT_LT(max_abs(r.dist.probs() - expect.probs().head(9)), 1e-4);
    EXPECT_EQ(error_of([&] { invert_collective(tmd, ClickStatistics(counts, total), 1.2, 0.6); }),
              ErrorCode::kDomain);
}
