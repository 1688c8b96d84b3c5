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
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"
#include "tmd/sources.h"
#include "tmd/stats.h"

using namespace tmd;
using tmd::testing::error_of;

namespace {

double negative_binomial(int n, int modes, double mean) {
    double x = mean / modes;
    return std::exp(std::lgamma(n + modes) - std::lgamma(n + 1.0) - std::lgamma(modes) + n * std::log(x) -
                    (n + modes) * std::log1p(x));
}

double max_abs_diff(const PhotonDistribution &a, const PhotonDistribution &b) {
    int n = std::max(a.n_max(), b.n_max());
    double d = 0;
    for (int i = 0; i <= n; ++i) {
        d = std::max(d, std::abs(a.at(i) - b.at(i)));
    }
    return d;
}

}  // namespace

TEST(ThermalDist, Examples) {
    EXPECT_EQ(thermal_dist(0.0, 10), PhotonDistribution::vacuum(10));
    PhotonDistribution th = thermal_dist(1.0, 60);
    EXPECT_NEAR(th[0], 0.5, 1e-15);
    EXPECT_NEAR(th[1], 0.25, 1e-15);
    EXPECT_NEAR(th[2], 0.125, 1e-15);
    EXPECT_NEAR(th.mean(), 1.0, 1e-6);
    EXPECT_EQ(error_of([] { thermal_dist(-0.1, 10); }), ErrorCode::kDomain);
}

TEST(PoissonDist, Examples) {
    EXPECT_EQ(poisson_dist(0.0, 10), PhotonDistribution::vacuum(10));
    PhotonDistribution p = poisson_dist(1.0, 30);
    EXPECT_NEAR(p[0], std::exp(-1.0), 1e-15);
    EXPECT_NEAR(p[1], std::exp(-1.0), 1e-15);
    PhotonDistribution two = poisson_dist(2.0, 60);
    EXPECT_NEAR(variance(two), 2.0, 1e-6);
    EXPECT_EQ(error_of([] { poisson_dist(-1.0, 10); }), ErrorCode::kDomain);
    // Far tail, where a naive forward recurrence from p_0 would underflow.
    PhotonDistribution big = poisson_dist(800.0, 1200);
    EXPECT_NEAR(big.mean(), 800.0, 1e-6);
}

TEST(Convolve, Examples) {
    PhotonDistribution x = thermal_dist(0.8, 15);
    EXPECT_LT(max_abs_diff(convolve(PhotonDistribution::vacuum(0), x), x), 1e-15);

    PhotonDistribution sum = convolve(poisson_dist(0.4, 40), poisson_dist(1.1, 40));
    EXPECT_LT(max_abs_diff(sum, poisson_dist(1.5, 80)), 1e-12);

    PhotonDistribution nb = convolve(thermal_dist(0.5, 60), thermal_dist(0.5, 60));
    for (int n = 0; n <= 60; ++n) {
        EXPECT_NEAR(nb[n], negative_binomial(n, 2, 1.0), 1e-12);
    }
}

TEST(Convolve, CommutativeAndAssociative) {
    PhotonDistribution a = thermal_dist(0.3, 12);
    PhotonDistribution b = poisson_dist(1.7, 20);
    PhotonDistribution c(std::vector<double>{0.1, 0.6, 0.3});
    EXPECT_LT(max_abs_diff(convolve(a, b), convolve(b, a)), 1e-12);
    EXPECT_LT(max_abs_diff(convolve(convolve(a, b), c), convolve(a, convolve(b, c))), 1e-12);
}

TEST(MultimodePairDist, Examples) {
    EXPECT_LT(max_abs_diff(multimode_pair_dist(1, 0.7, 30), thermal_dist(0.7, 30)), 1e-15);
    PhotonDistribution two = multimode_pair_dist(2, 1.0, 60);
    EXPECT_LT(max_abs_diff(two, convolve(thermal_dist(0.5, 60), thermal_dist(0.5, 60))), 1e-12);
    EXPECT_EQ(error_of([] { multimode_pair_dist(0, 1.0, 10); }), ErrorCode::kDomain);
    EXPECT_EQ(error_of([] { multimode_pair_dist(3, -1.0, 10); }), ErrorCode::kDomain);
}

TEST(MultimodePairDist, ClosedFormAgainstExplicitConvolution) {
    for (int modes = 1; modes <= 16; ++modes) {
        const double mu = 1.3;
        const int n_max = 40;
        PhotonDistribution single = thermal_dist(mu / modes, n_max);
        PhotonDistribution folded = single;
        for (int m = 1; m < modes; ++m) {
            folded = convolve(folded, single);
        }
        // Compare the renormalized heads; tails beyond n_max are below 1e-12 here.
        Eigen::VectorXd head = folded.probs().head(n_max + 1);
        head /= head.sum();
        PhotonDistribution closed = multimode_pair_dist(modes, mu, n_max);
        EXPECT_LT((closed.probs() - head).cwiseAbs().maxCoeff(), 1e-12) << modes;
        double kept = 0;
        for (int n = 0; n <= n_max; ++n) {
            kept += negative_binomial(n, modes, mu);
        }
        for (int n = 0; n <= n_max; ++n) {
            EXPECT_NEAR(closed[n], negative_binomial(n, modes, mu) / kept, 1e-12);
        }
    }
}

TEST(MultimodePairDist, MeanAndVarianceLaw) {
    for (int modes : {1, 2, 5, 40, 1000}) {
        for (double mu : {0.2, 1.0, 3.0}) {
            PhotonDistribution p = multimode_pair_dist(modes, mu, 200);
            EXPECT_NEAR(p.mean(), mu, 1e-6);
            EXPECT_NEAR(variance(p), mu * (1 + mu / modes), 1e-6);
        }
    }
}

TEST(MultimodePairDist, ManyModesApproachPoisson) {
    PhotonDistribution p = multimode_pair_dist(10000, 1.0, 30);
    PhotonDistribution q = poisson_dist(1.0, 30);
    EXPECT_LT(0.5 * (p.probs() - q.probs()).cwiseAbs().sum(), 1e-3);
}

TEST(MultimodePairDist, UnequalModes) {
    std::vector<double> means{0.2, 0.5, 0.1};
    PhotonDistribution got = multimode_pair_dist(means, 30);
    PhotonDistribution expect = convolve(convolve(thermal_dist(0.2, 30), thermal_dist(0.5, 30)), thermal_dist(0.1, 30));
    Eigen::VectorXd head = expect.probs().head(31);
    EXPECT_LT((got.probs() - head / head.sum()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TwinBeamJoint, Examples) {
    JointPhotonDistribution vac = twin_beam_joint(PhotonDistribution::vacuum(0));
    EXPECT_EQ(vac(0, 0), 1.0);
    JointPhotonDistribution one = twin_beam_joint(PhotonDistribution::fock(1, 3));
    EXPECT_EQ(one(1, 1), 1.0);
    EXPECT_TRUE(one.is_diagonal());
    PhotonDistribution th = thermal_dist(1.0, 30);
    JointPhotonDistribution twin = twin_beam_joint(th);
    EXPECT_NEAR(correlation(twin), 1.0, 1e-12);
    auto [s, i] = marginals(twin);
    EXPECT_EQ(s, th);
    EXPECT_EQ(i, th);
}

TEST(DefaultNMax, Rule) {
    EXPECT_EQ(default_n_max(0.0), 10);
    EXPECT_EQ(default_n_max(0.2), 10);
    EXPECT_EQ(default_n_max(1.0), static_cast<int>(std::ceil(1.0 + 15 * std::sqrt(2.0))));
    EXPECT_EQ(default_n_max(4.0), static_cast<int>(std::ceil(4.0 + 15 * std::sqrt(20.0))));
}

TEST(SourceModel, Factories) {
    SourceModel th = SourceModel::single_mode(0.5);
    EXPECT_EQ(th.family(), SourceFamily::kThermalPairs);
    EXPECT_EQ(th.n_max(), default_n_max(0.5));
    EXPECT_EQ(th.pair_dist(), thermal_dist(0.5, default_n_max(0.5)));

    SourceModel mm = SourceModel::multimode(100, 1.0, 25);
    EXPECT_EQ(mm.modes(), 100);
    EXPECT_EQ(mm.pair_dist(), multimode_pair_dist(100, 1.0, 25));

    SourceModel fock = SourceModel::fock_pairs(3);
    EXPECT_EQ(fock.fock_number(), 3);
    EXPECT_EQ(fock.pair_dist(), PhotonDistribution::fock(3, 10));
    EXPECT_EQ(error_of([] { SourceModel::fock_pairs(5, 3); }), ErrorCode::kDomain);

    SourceModel po = SourceModel::poisson_pairs(0.2);
    EXPECT_TRUE(po.joint().is_diagonal());
    EXPECT_EQ(po, SourceModel::poisson_pairs(0.2));
    EXPECT_FALSE(po == SourceModel::poisson_pairs(0.3));
}

TEST(SourceFamily, Names) {
    for (auto f : {SourceFamily::kThermalPairs, SourceFamily::kMultimodePairs, SourceFamily::kPoissonPairs,
                   SourceFamily::kFockPairs}) {
        EXPECT_EQ(source_family_from_string(to_string(f)), f);
    }
    EXPECT_EQ(error_of([] { source_family_from_string("squeezed"); }), ErrorCode::kConfig);
}
