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

#include "tmd/detector.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "tmd/error.h"
#include "tmd/stats.h"

namespace tmd {

namespace {

double binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) {
        return 0.0;
    }
    k = std::min(k, n - k);
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

void check_efficiency(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) {
        fail(ErrorCode::kDomain, "efficiency must lie in [0, 1], got " + std::to_string(eta));
    }
}

Eigen::MatrixXd build_convolution(std::span<const double> bin_probs, int n_max) {
    int bins = static_cast<int>(bin_probs.size());
    int occupied = 0;
    for (double p : bin_probs) {
        occupied += p > 0.0 ? 1 : 0;
    }

    // power_sums(t, n) = sum over subsets T with |T| = t of (sum_{k in T} P_k)^n.
    // The alternating sum below cancels heavily for many bins, so the up to
    // 2^K terms are accumulated in extended precision with Neumaier compensation.
    const int width = n_max + 1;
    const std::size_t cells = static_cast<std::size_t>(bins + 1) * width;
    std::vector<long double> power_sums(cells, 0.0L);
    std::vector<long double> compensation(cells, 0.0L);
    const std::uint32_t subsets = 1u << bins;
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        long double weight = 0.0L;
        for (int k = 0; k < bins; ++k) {
            if (mask & (1u << k)) {
                weight += bin_probs[k];
            }
        }
        const std::size_t row = static_cast<std::size_t>(std::popcount(mask)) * width;
        long double power = 1.0L;
        for (int n = 0; n <= n_max; ++n) {
            long double &sum = power_sums[row + n];
            const long double next = sum + power;
            compensation[row + n] += std::abs(sum) >= power ? (sum - next) + power : (power - next) + sum;
            sum = next;
            power *= weight;
        }
    }
    for (std::size_t i = 0; i < cells; ++i) {
        power_sums[i] += compensation[i];
    }

    // Inclusion-exclusion over the subsets S of size c that contain T:
    // C(c, n) = sum_t (-1)^(c - t) binom(K - t, c - t) power_sums(t, n).
    Eigen::MatrixXd conv = Eigen::MatrixXd::Zero(bins + 1, n_max + 1);
    conv(0, 0) = 1.0;
    for (int n = 1; n <= n_max; ++n) {
        int reachable = std::min(n, occupied);
        for (int c = 1; c <= reachable; ++c) {
            long double acc = 0.0L;
            for (int t = 0; t <= c; ++t) {
                long double term = static_cast<long double>(binomial_coefficient(bins - t, c - t)) *
                                   power_sums[static_cast<std::size_t>(t) * width + n];
                acc += (c - t) % 2 == 0 ? term : -term;
            }
            conv(c, n) = std::clamp(static_cast<double>(acc), 0.0, 1.0);
        }
    }
    return conv;
}

struct ConvolutionCache {
    std::mutex mutex;
    std::map<std::pair<std::vector<double>, int>, Eigen::MatrixXd> entries;
};

ConvolutionCache &convolution_cache() {
    static ConvolutionCache cache;
    return cache;
}

void check_fits(int n_max, const TMDConfig &tmd, const char *what) {
    if (n_max > tmd.n_max) {
        fail(ErrorCode::kDomain, std::string(what) + " truncation " + std::to_string(n_max) +
                                     " exceeds detector model truncation " + std::to_string(tmd.n_max));
    }
}

}  // namespace

TMDConfig TMDConfig::uniform(int bins, double efficiency, int n_max) {
    if (bins < 1) {
        fail(ErrorCode::kDomain, "a detector needs at least one bin");
    }
    TMDConfig tmd{std::vector<double>(bins, 1.0 / bins), efficiency, n_max};
    tmd.validate();
    return tmd;
}

TMDConfig TMDConfig::with_n_max(int n) const {
    TMDConfig copy = *this;
    copy.n_max = n;
    return copy;
}

TMDConfig TMDConfig::with_efficiency(double eta) const {
    TMDConfig copy = *this;
    copy.efficiency = eta;
    return copy;
}

void validate_bin_probs(std::span<const double> bin_probs) {
    if (bin_probs.empty()) {
        fail(ErrorCode::kDomain, "bin_probs is empty");
    }
    if (static_cast<int>(bin_probs.size()) > kMaxBins) {
        fail(ErrorCode::kComplexity, "bin_probs has " + std::to_string(bin_probs.size()) +
                                         " bins; subset enumeration is limited to " + std::to_string(kMaxBins));
    }
    double total = 0.0;
    for (double p : bin_probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            fail(ErrorCode::kDomain, "bin_probs entries must be finite and non-negative");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        fail(ErrorCode::kDomain, "bin_probs sums to " + std::to_string(total) + ", expected 1");
    }
}

void TMDConfig::validate() const {
    validate_bin_probs(bin_probs);
    check_efficiency(efficiency);
    if (n_max < 0) {
        fail(ErrorCode::kDomain, "n_max must be non-negative");
    }
}

std::string_view to_string(MatrixKind kind) {
    switch (kind) {
        case MatrixKind::kLoss:
            return "loss";
        case MatrixKind::kConvolution:
            return "convolution";
        case MatrixKind::kComposite:
            return "composite";
    }
    return "unknown";
}

DetectorMatrix loss_matrix(double eta, int n_max) {
    check_efficiency(eta);
    if (n_max < 0) {
        fail(ErrorCode::kDomain, "n_max must be non-negative");
    }
    Eigen::MatrixXd loss = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
    for (int m = 0; m <= n_max; ++m) {
        for (int n = 0; n <= m; ++n) {
            loss(n, m) = binomial_coefficient(m, n) * std::pow(eta, n) * std::pow(1.0 - eta, m - n);
        }
    }
    return {std::move(loss), MatrixKind::kLoss};
}

DetectorMatrix convolution_matrix(std::span<const double> bin_probs, int n_max) {
    validate_bin_probs(bin_probs);
    if (n_max < 0) {
        fail(ErrorCode::kDomain, "n_max must be non-negative");
    }
    auto key = std::make_pair(std::vector<double>(bin_probs.begin(), bin_probs.end()), n_max);
    auto &cache = convolution_cache();
    {
        std::lock_guard<std::mutex> lock(cache.mutex);
        auto it = cache.entries.find(key);
        if (it != cache.entries.end()) {
            return {it->second, MatrixKind::kConvolution};
        }
    }
    Eigen::MatrixXd conv = build_convolution(bin_probs, n_max);
    {
        std::lock_guard<std::mutex> lock(cache.mutex);
        cache.entries.emplace(std::move(key), conv);
    }
    return {std::move(conv), MatrixKind::kConvolution};
}

DetectorMatrix composite_matrix(const TMDConfig &tmd) {
    tmd.validate();
    Eigen::MatrixXd composite =
        convolution_matrix(tmd.bin_probs, tmd.n_max).entries * loss_matrix(tmd.efficiency, tmd.n_max).entries;
    return {std::move(composite), MatrixKind::kComposite};
}

PhotonDistribution forward(const TMDConfig &tmd, const PhotonDistribution &p) {
    check_fits(p.n_max(), tmd, "photon distribution");
    Eigen::VectorXd clicks = composite_matrix(tmd).entries * p.padded(tmd.n_max).probs();
    return PhotonDistribution(std::move(clicks));
}

JointPhotonDistribution joint_forward(const TMDConfig &tmd_signal, const TMDConfig &tmd_idler,
                                      const JointPhotonDistribution &joint) {
    check_fits(joint.n_max_signal(), tmd_signal, "signal axis");
    check_fits(joint.n_max_idler(), tmd_idler, "idler axis");
    Eigen::MatrixXd a_s = composite_matrix(tmd_signal).entries.leftCols(joint.n_max_signal() + 1);
    Eigen::MatrixXd a_i = composite_matrix(tmd_idler).entries.leftCols(joint.n_max_idler() + 1);
    Eigen::MatrixXd clicks = a_s * joint.probs() * a_i.transpose();
    return JointPhotonDistribution(std::move(clicks));
}

PhotonDistribution collective_forward(const TMDConfig &tmd, const JointPhotonDistribution &joint, double eta_signal,
                                      double eta_idler) {
    int combined = joint.n_max_signal() + joint.n_max_idler();
    check_fits(combined, tmd, "combined photon number");
    Eigen::MatrixXd survived = loss_matrix(eta_signal, joint.n_max_signal()).entries * joint.probs() *
                               loss_matrix(eta_idler, joint.n_max_idler()).entries.transpose();
    PhotonDistribution total = combine_collective(JointPhotonDistribution(std::move(survived)));
    Eigen::VectorXd clicks = convolution_matrix(tmd.bin_probs, tmd.n_max).entries * total.padded(tmd.n_max).probs();
    return PhotonDistribution(std::move(clicks));
}

double threshold_click_probability(const PhotonDistribution &p, double eta) {
    check_efficiency(eta);
    double none = 0.0;
    for (int n = 0; n <= p.n_max(); ++n) {
        none += p[n] * std::pow(1.0 - eta, n);
    }
    return 1.0 - none;
}

}  // namespace tmd
