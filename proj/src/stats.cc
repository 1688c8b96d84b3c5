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

#include "tmd/stats.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "tmd/error.h"
#include "tmd/sources.h"

namespace tmd {

double moment(const PhotonDistribution &dist, int m) {
    if (m < 0) {
        fail(ErrorCode::kDomain, "moment order must be non-negative");
    }
    double total = 0.0;
    for (int n = 0; n <= dist.n_max(); ++n) {
        total += std::pow(static_cast<double>(n), m) * dist[n];
    }
    return total;
}

double variance(const PhotonDistribution &dist) {
    double mu = moment(dist, 1);
    return moment(dist, 2) - mu * mu;
}

std::pair<PhotonDistribution, PhotonDistribution> marginals(const JointPhotonDistribution &joint) {
    Eigen::VectorXd signal = joint.probs().rowwise().sum();
    Eigen::VectorXd idler = joint.probs().colwise().sum().transpose();
    return {PhotonDistribution(std::move(signal)), PhotonDistribution(std::move(idler))};
}

PhotonDistribution conditional(const JointPhotonDistribution &joint, Axis herald_axis, int herald_value) {
    Eigen::VectorXd slice;
    if (herald_axis == Axis::kSignal) {
        if (herald_value < 0 || herald_value > joint.n_max_signal()) {
            fail(ErrorCode::kDegenerate, "herald value outside the signal truncation");
        }
        slice = joint.probs().row(herald_value).transpose();
    } else {
        if (herald_value < 0 || herald_value > joint.n_max_idler()) {
            fail(ErrorCode::kDegenerate, "herald value outside the idler truncation");
        }
        slice = joint.probs().col(herald_value);
    }
    double total = slice.sum();
    if (!(total > 0.0)) {
        fail(ErrorCode::kDegenerate,
             "herald slice " + std::to_string(herald_value) + " has zero probability; conditional undefined");
    }
    return PhotonDistribution(slice / total);
}

PhotonDistribution combine_collective(const JointPhotonDistribution &joint) {
    const auto &p = joint.probs();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p.rows() + p.cols() - 1);
    for (Eigen::Index m = 0; m < p.cols(); ++m) {
        for (Eigen::Index n = 0; n < p.rows(); ++n) {
            out[n + m] += p(n, m);
        }
    }
    return PhotonDistribution(std::move(out));
}

namespace {

struct JointMoments {
    double mean_n = 0, mean_m = 0, nn = 0, mm = 0, nm = 0;
};

JointMoments joint_moments(const JointPhotonDistribution &joint) {
    JointMoments r;
    const auto &p = joint.probs();
    for (Eigen::Index m = 0; m < p.cols(); ++m) {
        for (Eigen::Index n = 0; n < p.rows(); ++n) {
            double w = p(n, m);
            auto dn = static_cast<double>(n);
            auto dm = static_cast<double>(m);
            r.mean_n += dn * w;
            r.mean_m += dm * w;
            r.nn += dn * dn * w;
            r.mm += dm * dm * w;
            r.nm += dn * dm * w;
        }
    }
    return r;
}

}  // namespace

double correlation(const JointPhotonDistribution &joint) {
    auto r = joint_moments(joint);
    double var_n = r.nn - r.mean_n * r.mean_n;
    double var_m = r.mm - r.mean_m * r.mean_m;
    if (!(var_n > 0.0) || !(var_m > 0.0)) {
        fail(ErrorCode::kDegenerate, "correlation undefined: a marginal has zero variance");
    }
    return (r.nm - r.mean_n * r.mean_m) / std::sqrt(var_n * var_m);
}

double difference_variance(const JointPhotonDistribution &joint) {
    // Summed directly over (n - m) so a diagonal joint gives exactly zero.
    const auto &p = joint.probs();
    double mean = 0.0, second = 0.0;
    for (Eigen::Index m = 0; m < p.cols(); ++m) {
        for (Eigen::Index n = 0; n < p.rows(); ++n) {
            auto d = static_cast<double>(n - m);
            mean += d * p(n, m);
            second += d * d * p(n, m);
        }
    }
    return second - mean * mean;
}

double number_squeezing_db(const JointPhotonDistribution &joint, SqueezingNormalization norm) {
    auto r = joint_moments(joint);
    if (!(r.mean_n > 0.0) || !(r.mean_m > 0.0)) {
        fail(ErrorCode::kDegenerate, "number squeezing undefined: a beam has zero mean photon number");
    }
    double var = difference_variance(joint);
    if (var == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (var < 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double denom = norm == SqueezingNormalization::kProductOfMeans ? r.mean_n * r.mean_m : r.mean_n + r.mean_m;
    return 10.0 * std::log10(var / denom);
}

namespace {

using Family = std::function<PhotonDistribution(double mean, int n_max)>;

double l2_distance(const PhotonDistribution &dist, const PhotonDistribution &model) {
    return (dist.probs() - model.probs()).norm();
}

FitResult fit_family(const PhotonDistribution &dist, const Family &family) {
    int n_max = dist.n_max();
    auto objective = [&](double mean) { return l2_distance(dist, family(mean, n_max)); };

    // Coarse scan brackets the minimum; golden section refines it.
    double observed = std::max(0.0, dist.mean());
    double hi = std::max(1.0, 4.0 * observed + 4.0);
    constexpr int kGrid = 64;
    double step = hi / kGrid;
    int best = 0;
    double best_value = objective(0.0);
    for (int i = 1; i <= kGrid; ++i) {
        double v = objective(i * step);
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    double a = std::max(0.0, (best - 1) * step);
    double b = (best + 1) * step;

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = objective(c);
    double fd = objective(d);
    int iterations = 0;
    while (b - a > kFitTolerance * std::max(1.0, std::abs(c))) {
        if (++iterations > kFitMaxIterations) {
            fail(ErrorCode::kNumerical, "golden-section fit did not converge: bracket [" + std::to_string(a) + ", " +
                                            std::to_string(b) + "] after " + std::to_string(kFitMaxIterations) +
                                            " iterations");
        }
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }

    double mean = 0.5 * (a + b);
    // The bracket may have collapsed onto the lower boundary.
    if (a == 0.0 && objective(0.0) <= objective(mean)) {
        mean = 0.0;
    }
    PhotonDistribution model = family(mean, n_max);
    FitResult result;
    result.mean = mean;
    result.residual_l2 = l2_distance(dist, model);
    result.per_bin_deviation.resize(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) {
        result.per_bin_deviation[n] = dist[n] - model[n];
    }
    result.iterations = iterations;
    return result;
}

}  // namespace

FitResult fit_poisson(const PhotonDistribution &dist) {
    return fit_family(dist, [](double mean, int n_max) { return poisson_dist(mean, n_max); });
}

FitResult fit_thermal(const PhotonDistribution &dist) {
    return fit_family(dist, [](double mean, int n_max) { return thermal_dist(mean, n_max); });
}

}  // namespace tmd
