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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"
#include "tmd/distribution.h"
#include "tmd/sources.h"
#include "tmd/stats.h"

using namespace tmd;
using tmd::testing::error_of;

namespace {

double binom(int n, int k) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

JointPhotonDistribution diagonal(const PhotonDistribution &q) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q.n_max() + 1, q.n_max() + 1);
    for (int n = 0; n <= q.n_max(); ++n) {
        m(n, n) = q[n];
    }
    return JointPhotonDistribution(m);
}

// Twin beam whose arms each lose photons binomially, by explicit summation.
Eigen::MatrixXd lossy_twin_beam(const PhotonDistribution &pairs, double eta_s, double eta_i) {
    const int n_max = pairs.n_max();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
        for (int k = 0; k <= n; ++k) {
            for (int l = 0; l <= n; ++l) {
                out(k, l) += pairs[n] * binom(n, k) * std::pow(eta_s, k) * std::pow(1 - eta_s, n - k) * binom(n, l) *
                             std::pow(eta_i, l) * std::pow(1 - eta_i, n - l);
            }
        }
    }
    return out;
}

// l2 distance of `dist` to the truncated Poissonian minimized over a dense grid.
double grid_fit_poisson_mean(const PhotonDistribution &dist) {
    double best = 0.0;
    double best_value = std::numeric_limits<double>::infinity();
    for (double mu = 0.0; mu <= 5.0; mu += 1e-5) {
        PhotonDistribution model = poisson_dist(mu, dist.n_max());
        double v = (model.probs() - dist.probs()).norm();
        if (v < best_value) {
            best_value = v;
            best = mu;
        }
    }
    return best;
}

}  // namespace

TEST(PhotonDistribution, Invariants) {
    EXPECT_EQ(error_of([] { PhotonDistribution(std::vector<double>{0.5, 0.4}); }), ErrorCode::kDomain);
    EXPECT_EQ(error_of([] { PhotonDistribution(std::vector<double>{}); }), ErrorCode::kDomain);
    EXPECT_EQ(error_of([] { PhotonDistribution(std::vector<double>{std::nan(""), 1.0}); }), ErrorCode::kDomain);
    EXPECT_NO_THROW(PhotonDistribution(std::vector<double>{0.5, 0.5 + 5e-10}));

    PhotonDistribution slightly_negative(std::vector<double>{1.0005, -0.0005});
    EXPECT_TRUE(slightly_negative.is_physical());
    PhotonDistribution negative(std::vector<double>{1.002, -0.002});
    EXPECT_FALSE(negative.is_physical());

    PhotonDistribution v;
    EXPECT_EQ(v.n_max(), 0);
    EXPECT_EQ(v.at(3), 0.0);
    EXPECT_EQ(PhotonDistribution::fock(2, 4).padded(6), PhotonDistribution::fock(2, 6));
}

TEST(ClickStatistics, CountsMustMatchTotal) {
    EXPECT_EQ(error_of([] { ClickStatistics({1, 2, 3}, 7); }), ErrorCode::kData);
    ClickStatistics c({1, 2, 1}, 4);
    EXPECT_DOUBLE_EQ(c.frequencies().probs().sum(), 1.0);
    EXPECT_EQ(error_of([] { ClickStatistics({0, 0}, 0).frequencies(); }), ErrorCode::kData);
}

TEST(JointClickStatistics, MarginalsAndMerge) {
    JointClickStatistics a(2, 1);
    a.add(0, 0, 3);
    a.add(2, 1, 2);
    JointClickStatistics b(2, 1);
    b.add(1, 0);
    a.merge(b);
    EXPECT_EQ(a.total_shots(), 6u);
    EXPECT_EQ(a.signal_marginal().counts(), (std::vector<std::uint64_t>{3, 1, 2}));
    EXPECT_EQ(a.idler_marginal().counts(), (std::vector<std::uint64_t>{4, 2}));
    EXPECT_EQ(a.idler_given_signal(2).counts(), (std::vector<std::uint64_t>{0, 2}));
    EXPECT_EQ(error_of([&] { a.add(3, 0); }), ErrorCode::kData);
}

TEST(Moment, Examples) {
    EXPECT_EQ(moment(PhotonDistribution::vacuum(3), 2), 0.0);
    EXPECT_EQ(moment(PhotonDistribution::fock(1, 3), 5), 1.0);
    EXPECT_NEAR(moment(poisson_dist(1.0, 30), 2), 2.0, 1e-9);
    EXPECT_NEAR(moment(poisson_dist(1.0, 30), 0), 1.0, 1e-12);
}

TEST(Moment, ThermalMeanUnderTruncation) {
    // Renormalizing a geometric law over 0..N lowers its mean by
    // (N + 1) q^(N + 1) / (1 - q^(N + 1)), q = mu / (1 + mu).
    for (double mu : {0.05, 0.5, 1.0, 3.0, 10.0}) {
        for (int n_max : {default_n_max(mu), 2 * default_n_max(mu)}) {
            double tail = std::pow(mu / (1 + mu), n_max + 1);
            double expect = mu - (n_max + 1) * tail / (1 - tail);
            EXPECT_NEAR(moment(thermal_dist(mu, n_max), 1), expect, 1e-12 * std::max(1.0, mu)) << mu;
        }
        EXPECT_NEAR(moment(thermal_dist(mu, 2 * default_n_max(mu)), 1), mu, 1e-6) << mu;
    }
    EXPECT_NEAR(moment(thermal_dist(0.05, default_n_max(0.05)), 1), 0.05, 1e-6);
}

TEST(Marginals, Examples) {
    PhotonDistribution q(std::vector<double>{0.2, 0.5, 0.3});
    auto [s, i] = marginals(diagonal(q));
    EXPECT_EQ(s, q);
    EXPECT_EQ(i, q);

    PhotonDistribution a(std::vector<double>{0.6, 0.4});
    PhotonDistribution b(std::vector<double>{0.1, 0.2, 0.7});
    auto [pa, pb] = marginals(JointPhotonDistribution::product(a, b));
    EXPECT_LT((pa.probs() - a.probs()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((pb.probs() - b.probs()).cwiseAbs().maxCoeff(), 1e-15);

    PhotonDistribution th = thermal_dist(1.0, default_n_max(1.0));
    auto [ts, ti] = marginals(twin_beam_joint(th));
    EXPECT_LT((ts.probs() - th.probs()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((ti.probs() - th.probs()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Conditional, Examples) {
    PhotonDistribution pairs = thermal_dist(0.7, 5);
    auto twin = twin_beam_joint(pairs);
    EXPECT_EQ(conditional(twin, Axis::kIdler, 1), PhotonDistribution::fock(1, 5));

    PhotonDistribution a(std::vector<double>{0.6, 0.4});
    PhotonDistribution b(std::vector<double>{0.1, 0.2, 0.7});
    auto prod = JointPhotonDistribution::product(a, b);
    for (int m = 0; m <= 2; ++m) {
        EXPECT_LT((conditional(prod, Axis::kIdler, m).probs() - a.probs()).cwiseAbs().maxCoeff(), 1e-15);
    }

    // Idler arm loses half its photons; heralding one idler photon.
    JointPhotonDistribution lossy(lossy_twin_beam(pairs, 1.0, 0.5));
    PhotonDistribution got = conditional(lossy, Axis::kIdler, 1);
    Eigen::VectorXd expect(6);
    for (int n = 0; n <= 5; ++n) {
        expect[n] = pairs[n] * n * std::pow(0.5, n);
    }
    expect /= expect.sum();
    EXPECT_LT((got.probs() - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Conditional, EmptySliceIsDegenerate) {
    auto twin = twin_beam_joint(PhotonDistribution(std::vector<double>{0.5, 0.5, 0.0}));
    EXPECT_EQ(error_of([&] { conditional(twin, Axis::kSignal, 2); }), ErrorCode::kDegenerate);
}

TEST(CombineCollective, Examples) {
    PhotonDistribution q = poisson_dist(0.8, 12);
    PhotonDistribution c = combine_collective(diagonal(q));
    ASSERT_EQ(c.n_max(), 24);
    for (int j = 0; j <= 24; ++j) {
        if (j % 2 == 1) {
            EXPECT_EQ(c[j], 0.0);
        } else {
            EXPECT_EQ(c[j], q[j / 2]);
        }
    }

    EXPECT_EQ(combine_collective(JointPhotonDistribution()), PhotonDistribution::vacuum(0));

    auto prod = JointPhotonDistribution::product(poisson_dist(0.7, 40), poisson_dist(1.3, 40));
    PhotonDistribution sum = combine_collective(prod);
    PhotonDistribution expect = poisson_dist(2.0, 80);
    EXPECT_LT((sum.probs() - expect.probs()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CombineCollective, DiagonalJointsHaveNoOddEntries) {
    for (double mu : {0.1, 1.0, 4.0}) {
        PhotonDistribution c = combine_collective(twin_beam_joint(thermal_dist(mu, default_n_max(mu))));
        for (int j = 1; j <= c.n_max(); j += 2) {
            EXPECT_EQ(c[j], 0.0);
        }
    }
}

TEST(Correlation, Examples) {
    EXPECT_NEAR(correlation(diagonal(PhotonDistribution(std::vector<double>{0.2, 0.5, 0.3}))), 1.0, 1e-12);
    EXPECT_NEAR(correlation(twin_beam_joint(thermal_dist(2.0, 40))), 1.0, 1e-12);
    auto prod = JointPhotonDistribution::product(poisson_dist(0.5, 10), thermal_dist(1.0, 20));
    EXPECT_NEAR(correlation(prod), 0.0, 1e-12);

    // Exhaustive expectation sums over the lossy thermal twin beam.
    Eigen::MatrixXd p = lossy_twin_beam(thermal_dist(1.0, 40), 0.5, 0.5);
    double ek = 0, el = 0, ekk = 0, ell = 0, ekl = 0;
    for (int k = 0; k <= 40; ++k) {
        for (int l = 0; l <= 40; ++l) {
            ek += k * p(k, l);
            el += l * p(k, l);
            ekk += k * k * p(k, l);
            ell += l * l * p(k, l);
            ekl += k * l * p(k, l);
        }
    }
    double expect = (ekl - ek * el) / std::sqrt((ekk - ek * ek) * (ell - el * el));
    double got = correlation(JointPhotonDistribution::normalized(p));
    EXPECT_NEAR(got, expect, 1e-12);
    // Closed form eta Var / (eta Var + (1 - eta) <n>) with Var = <n>(1 + <n>).
    EXPECT_NEAR(got, 2.0 / 3.0, 1e-9);
}

TEST(Correlation, ZeroVarianceIsDegenerate) {
    auto fock = twin_beam_joint(PhotonDistribution::fock(2, 3));
    EXPECT_EQ(error_of([&] { correlation(fock); }), ErrorCode::kDegenerate);
}

TEST(Squeezing, Examples) {
    double db = number_squeezing_db(twin_beam_joint(poisson_dist(0.5, 12)));
    EXPECT_TRUE(std::isinf(db) && db < 0);

    auto indep2 = JointPhotonDistribution::product(poisson_dist(2.0, 40), poisson_dist(2.0, 40));
    EXPECT_NEAR(number_squeezing_db(indep2), 0.0, 1e-9);
    auto indep05 = JointPhotonDistribution::product(poisson_dist(0.5, 30), poisson_dist(0.5, 30));
    EXPECT_NEAR(number_squeezing_db(indep05), 10 * std::log10(4.0), 1e-9);
    EXPECT_NEAR(number_squeezing_db(indep05, SqueezingNormalization::kSumOfMeans), 0.0, 1e-9);
}

TEST(Squeezing, DegenerateAndNegative) {
    auto vac = JointPhotonDistribution::product(PhotonDistribution::vacuum(2), poisson_dist(1.0, 20));
    EXPECT_EQ(error_of([&] { number_squeezing_db(vac); }), ErrorCode::kDegenerate);

    Eigen::MatrixXd m(2, 2);
    m << 0.5, -0.05, -0.05, 0.6;
    JointPhotonDistribution noisy(m);
    EXPECT_NEAR(difference_variance(noisy), -0.1, 1e-15);
    EXPECT_TRUE(std::isnan(number_squeezing_db(noisy)));
}

TEST(FitPoisson, Examples) {
    FitResult self = fit_poisson(poisson_dist(1.0, 30));
    EXPECT_NEAR(self.mean, 1.0, 1e-6);
    EXPECT_LT(self.residual_l2, 1e-9);
    EXPECT_EQ(self.per_bin_deviation.size(), 31u);

    PhotonDistribution th = thermal_dist(1.0, default_n_max(1.0));
    FitResult fit = fit_poisson(th);
    double grid_mean = grid_fit_poisson_mean(th);
    EXPECT_NEAR(fit.mean, grid_mean, 2e-5);
    double oracle_dev = th[1] - poisson_dist(grid_mean, th.n_max())[1];
    EXPECT_NEAR(fit.per_bin_deviation[1], oracle_dev, 1e-4);
    // At the thermal mean itself the one-photon gap is 0.25 - e^-1; the fitted mean shrinks it.
    EXPECT_NEAR(th[1] - poisson_dist(1.0, th.n_max())[1], -0.1179, 1e-3);
    EXPECT_LT(std::abs(fit.per_bin_deviation[1]), 0.1179);

    FitResult vac = fit_poisson(PhotonDistribution::vacuum(10));
    EXPECT_NEAR(vac.mean, 0.0, 1e-6);
    EXPECT_LT(vac.residual_l2, 1e-6);
}

TEST(FitThermal, Examples) {
    FitResult self = fit_thermal(thermal_dist(0.5, default_n_max(0.5)));
    EXPECT_NEAR(self.mean, 0.5, 1e-6);
    EXPECT_LT(self.residual_l2, 1e-9);

    PhotonDistribution pois = poisson_dist(1.0, 30);
    EXPECT_GT(fit_thermal(pois).residual_l2, fit_poisson(pois).residual_l2);
    EXPECT_GT(fit_thermal(pois).residual_l2, 0.0);

    PhotonDistribution multimode = multimode_pair_dist(100, 1.0, default_n_max(1.0));
    EXPECT_GT(std::abs(fit_thermal(multimode).per_bin_deviation[1]), 0.06);
}

TEST(Fit, SelfFitPropertyOverMeans) {
    for (double mu = 0.25; mu <= 5.0; mu += 0.25) {
        int n_max = default_n_max(mu);
        EXPECT_LT(fit_poisson(poisson_dist(mu, n_max)).residual_l2, 1e-9) << mu;
        EXPECT_LT(fit_thermal(thermal_dist(mu, n_max)).residual_l2, 1e-9) << mu;
    }
}
