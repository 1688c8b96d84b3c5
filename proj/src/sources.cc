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

#include "tmd/sources.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "tmd/error.h"

namespace tmd {

namespace {

void check_mean(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        fail(ErrorCode::kDomain, "mean photon number must be finite and non-negative, got " + std::to_string(mean));
    }
}

void check_n_max(int n_max) {
    if (n_max < 0) {
        fail(ErrorCode::kDomain, "n_max must be non-negative, got " + std::to_string(n_max));
    }
}

}  // namespace

int default_n_max(double mean) {
    check_mean(mean);
    auto bound = static_cast<int>(std::ceil(mean + 15.0 * std::sqrt(mean * (1.0 + mean))));
    return std::max(10, bound);
}

PhotonDistribution thermal_dist(double mean, int n_max) {
    check_mean(mean);
    check_n_max(n_max);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
    double ratio = mean / (1.0 + mean);
    p[0] = 1.0 / (1.0 + mean);
    for (int n = 1; n <= n_max; ++n) {
        p[n] = p[n - 1] * ratio;
    }
    return PhotonDistribution::normalized(std::move(p));
}

PhotonDistribution poisson_dist(double mean, int n_max) {
    check_mean(mean);
    check_n_max(n_max);
    // Recurrence from the mode keeps every term representable for large means.
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
    int mode = std::min(n_max, static_cast<int>(std::floor(mean)));
    p[mode] = 1.0;
    for (int n = mode + 1; n <= n_max; ++n) {
        p[n] = p[n - 1] * mean / n;
    }
    for (int n = mode - 1; n >= 0; --n) {
        p[n] = p[n + 1] * (n + 1) / mean;
    }
    return PhotonDistribution::normalized(std::move(p));
}

PhotonDistribution convolve(const PhotonDistribution &a, const PhotonDistribution &b) {
    int n_max = a.n_max() + b.n_max();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_max + 1);
    for (int i = 0; i <= a.n_max(); ++i) {
        if (a[i] == 0.0) {
            continue;
        }
        for (int j = 0; j <= b.n_max(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return PhotonDistribution(std::move(out));
}

PhotonDistribution multimode_pair_dist(int modes, double total_mean, int n_max) {
    if (modes < 1) {
        fail(ErrorCode::kDomain, "mode count must be at least 1, got " + std::to_string(modes));
    }
    check_mean(total_mean);
    check_n_max(n_max);
    // Negative binomial: p_n = binom(n + M - 1, n) x^n (1 + x)^(-n - M), x = mean / M.
    double x = total_mean / modes;
    double ratio = x / (1.0 + x);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
    p[0] = std::exp(-modes * std::log1p(x));
    for (int n = 1; n <= n_max; ++n) {
        p[n] = p[n - 1] * ratio * (n + modes - 1) / n;
    }
    return PhotonDistribution::normalized(std::move(p));
}

PhotonDistribution multimode_pair_dist(std::span<const double> mode_means, int n_max) {
    if (mode_means.empty()) {
        fail(ErrorCode::kDomain, "mode list is empty");
    }
    check_n_max(n_max);
    PhotonDistribution acc = thermal_dist(mode_means[0], n_max);
    for (std::size_t k = 1; k < mode_means.size(); ++k) {
        PhotonDistribution full = convolve(acc, thermal_dist(mode_means[k], n_max));
        acc = PhotonDistribution::normalized(full.probs().head(n_max + 1));
    }
    return acc;
}

JointPhotonDistribution twin_beam_joint(const PhotonDistribution &pair_dist) {
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(pair_dist.n_max() + 1, pair_dist.n_max() + 1);
    joint.diagonal() = pair_dist.probs();
    return JointPhotonDistribution(std::move(joint));
}

std::string_view to_string(SourceFamily family) {
    switch (family) {
        case SourceFamily::kThermalPairs:
            return "thermal_pairs";
        case SourceFamily::kMultimodePairs:
            return "multimode_pairs";
        case SourceFamily::kPoissonPairs:
            return "poisson_pairs";
        case SourceFamily::kFockPairs:
            return "fock_pairs";
    }
    return "unknown";
}

SourceFamily source_family_from_string(std::string_view name) {
    for (auto f : {SourceFamily::kThermalPairs, SourceFamily::kMultimodePairs, SourceFamily::kPoissonPairs,
                   SourceFamily::kFockPairs}) {
        if (to_string(f) == name) {
            return f;
        }
    }
    fail(ErrorCode::kConfig, "source.type: unknown source family '" + std::string(name) + "'");
}

SourceModel SourceModel::single_mode(double mean, std::optional<int> n_max) {
    SourceModel s;
    s.family_ = SourceFamily::kThermalPairs;
    s.mean_ = mean;
    s.pair_dist_ = thermal_dist(mean, n_max.value_or(default_n_max(mean)));
    return s;
}

SourceModel SourceModel::multimode(int modes, double total_mean, std::optional<int> n_max) {
    SourceModel s;
    s.family_ = SourceFamily::kMultimodePairs;
    s.mean_ = total_mean;
    s.modes_ = modes;
    s.pair_dist_ = multimode_pair_dist(modes, total_mean, n_max.value_or(default_n_max(total_mean)));
    return s;
}

SourceModel SourceModel::multimode(std::vector<double> mode_means, std::optional<int> n_max) {
    SourceModel s;
    s.family_ = SourceFamily::kMultimodePairs;
    for (double m : mode_means) {
        check_mean(m);
        s.mean_ += m;
    }
    s.modes_ = static_cast<int>(mode_means.size());
    s.pair_dist_ = multimode_pair_dist(mode_means, n_max.value_or(default_n_max(s.mean_)));
    s.mode_means_ = std::move(mode_means);
    return s;
}

SourceModel SourceModel::poisson_pairs(double mean, std::optional<int> n_max) {
    SourceModel s;
    s.family_ = SourceFamily::kPoissonPairs;
    s.mean_ = mean;
    s.pair_dist_ = poisson_dist(mean, n_max.value_or(default_n_max(mean)));
    return s;
}

SourceModel SourceModel::fock_pairs(int n, std::optional<int> n_max) {
    if (n < 0) {
        fail(ErrorCode::kDomain, "Fock pair number must be non-negative");
    }
    SourceModel s;
    s.family_ = SourceFamily::kFockPairs;
    s.mean_ = n;
    s.fock_n_ = n;
    s.pair_dist_ = PhotonDistribution::fock(n, n_max.value_or(std::max(n, 10)));
    return s;
}

bool SourceModel::operator==(const SourceModel &other) const {
    return family_ == other.family_ && mean_ == other.mean_ && modes_ == other.modes_ &&
           mode_means_ == other.mode_means_ && fock_n_ == other.fock_n_ && pair_dist_ == other.pair_dist_;
}

}  // namespace tmd
