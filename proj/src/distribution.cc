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

#include "tmd/distribution.h"

#include <cmath>
#include <string>

#include "tmd/error.h"

namespace tmd {

namespace {

void check_entries(const double *data, Eigen::Index size, const char *what) {
    if (size == 0) {
        fail(ErrorCode::kDomain, std::string(what) + " is empty");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < size; ++i) {
        if (!std::isfinite(data[i])) {
            fail(ErrorCode::kDomain, std::string(what) + " has a non-finite entry at index " + std::to_string(i));
        }
        total += data[i];
    }
    if (std::abs(total - 1.0) > kNormTolerance) {
        fail(ErrorCode::kDomain, std::string(what) + " sums to " + std::to_string(total) + ", expected 1");
    }
}

}  // namespace

PhotonDistribution::PhotonDistribution() : probs_(Eigen::VectorXd::Ones(1)) {
}

PhotonDistribution::PhotonDistribution(Eigen::VectorXd probs) : probs_(std::move(probs)) {
    check_entries(probs_.data(), probs_.size(), "photon distribution");
}

PhotonDistribution::PhotonDistribution(const std::vector<double> &probs)
    : PhotonDistribution(Eigen::Map<const Eigen::VectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size()))) {
}

PhotonDistribution PhotonDistribution::normalized(Eigen::VectorXd weights) {
    double total = weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        fail(ErrorCode::kDegenerate, "cannot normalize weights with sum " + std::to_string(total));
    }
    weights /= total;
    return PhotonDistribution(std::move(weights));
}

PhotonDistribution PhotonDistribution::vacuum(int n_max) {
    return fock(0, n_max);
}

PhotonDistribution PhotonDistribution::fock(int n, int n_max) {
    if (n < 0 || n_max < n) {
        fail(ErrorCode::kDomain, "Fock state |" + std::to_string(n) + "> does not fit n_max " + std::to_string(n_max));
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
    p[n] = 1.0;
    return PhotonDistribution(std::move(p));
}

double PhotonDistribution::at(int n) const {
    if (n < 0 || n > n_max()) {
        return 0.0;
    }
    return probs_[n];
}

double PhotonDistribution::mean() const {
    double total = 0.0;
    for (int n = 1; n <= n_max(); ++n) {
        total += n * probs_[n];
    }
    return total;
}

bool PhotonDistribution::is_physical(double tol) const {
    return probs_.minCoeff() >= -tol;
}

PhotonDistribution PhotonDistribution::padded(int n_max) const {
    if (n_max < this->n_max()) {
        fail(ErrorCode::kDomain, "cannot pad to a smaller truncation");
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
    p.head(probs_.size()) = probs_;
    return PhotonDistribution(std::move(p));
}

std::vector<double> PhotonDistribution::to_vector() const {
    return {probs_.data(), probs_.data() + probs_.size()};
}

JointPhotonDistribution::JointPhotonDistribution() : probs_(Eigen::MatrixXd::Ones(1, 1)) {
}

JointPhotonDistribution::JointPhotonDistribution(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    check_entries(probs_.data(), probs_.size(), "joint photon distribution");
}

JointPhotonDistribution JointPhotonDistribution::normalized(Eigen::MatrixXd weights) {
    double total = weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        fail(ErrorCode::kDegenerate, "cannot normalize joint weights with sum " + std::to_string(total));
    }
    weights /= total;
    return JointPhotonDistribution(std::move(weights));
}

JointPhotonDistribution JointPhotonDistribution::product(const PhotonDistribution &signal,
                                                         const PhotonDistribution &idler) {
    return JointPhotonDistribution(signal.probs() * idler.probs().transpose());
}

bool JointPhotonDistribution::is_physical(double tol) const {
    return probs_.minCoeff() >= -tol;
}

bool JointPhotonDistribution::is_diagonal() const {
    for (Eigen::Index m = 0; m < probs_.cols(); ++m) {
        for (Eigen::Index n = 0; n < probs_.rows(); ++n) {
            if (n != m && probs_(n, m) != 0.0) {
                return false;
            }
        }
    }
    return true;
}

ClickStatistics::ClickStatistics(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
    for (auto c : counts_) {
        total_ += c;
    }
}

ClickStatistics::ClickStatistics(std::vector<std::uint64_t> counts, std::uint64_t total_shots)
    : ClickStatistics(std::move(counts)) {
    if (total_ != total_shots) {
        fail(ErrorCode::kData,
             "click counts sum to " + std::to_string(total_) + " but total_shots is " + std::to_string(total_shots));
    }
}

PhotonDistribution ClickStatistics::frequencies() const {
    if (total_ == 0) {
        fail(ErrorCode::kData, "no shots");
    }
    Eigen::VectorXd f(counts_.size());
    for (std::size_t c = 0; c < counts_.size(); ++c) {
        f[static_cast<Eigen::Index>(c)] = static_cast<double>(counts_[c]) / static_cast<double>(total_);
    }
    return PhotonDistribution(std::move(f));
}

JointClickStatistics::JointClickStatistics(int max_clicks_signal, int max_clicks_idler)
    : rows_(max_clicks_signal + 1),
      cols_(max_clicks_idler + 1),
      counts_(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_), 0) {
    if (max_clicks_signal < 0 || max_clicks_idler < 0) {
        fail(ErrorCode::kDomain, "negative click range");
    }
}

void JointClickStatistics::add(int k, int l, std::uint64_t n) {
    if (k < 0 || k >= rows_ || l < 0 || l >= cols_) {
        fail(ErrorCode::kData, "click pair (" + std::to_string(k) + ", " + std::to_string(l) + ") out of range");
    }
    counts_[static_cast<std::size_t>(k) * cols_ + l] += n;
    total_ += n;
}

void JointClickStatistics::merge(const JointClickStatistics &other) {
    if (other.rows_ != rows_ || other.cols_ != cols_) {
        fail(ErrorCode::kData, "cannot merge click tables of different shape");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
    total_ += other.total_;
}

ClickStatistics JointClickStatistics::signal_marginal() const {
    std::vector<std::uint64_t> out(rows_, 0);
    for (int k = 0; k < rows_; ++k) {
        for (int l = 0; l < cols_; ++l) {
            out[k] += count(k, l);
        }
    }
    return ClickStatistics(std::move(out), total_);
}

ClickStatistics JointClickStatistics::idler_marginal() const {
    std::vector<std::uint64_t> out(cols_, 0);
    for (int k = 0; k < rows_; ++k) {
        for (int l = 0; l < cols_; ++l) {
            out[l] += count(k, l);
        }
    }
    return ClickStatistics(std::move(out), total_);
}

ClickStatistics JointClickStatistics::idler_given_signal(int k) const {
    if (k < 0 || k >= rows_) {
        fail(ErrorCode::kDomain, "herald click number out of range");
    }
    std::vector<std::uint64_t> out(cols_, 0);
    for (int l = 0; l < cols_; ++l) {
        out[l] = count(k, l);
    }
    return ClickStatistics(std::move(out));
}

ClickStatistics JointClickStatistics::signal_given_idler(int l) const {
    if (l < 0 || l >= cols_) {
        fail(ErrorCode::kDomain, "herald click number out of range");
    }
    std::vector<std::uint64_t> out(rows_, 0);
    for (int k = 0; k < rows_; ++k) {
        out[k] = count(k, l);
    }
    return ClickStatistics(std::move(out));
}

JointPhotonDistribution JointClickStatistics::frequencies() const {
    if (total_ == 0) {
        fail(ErrorCode::kData, "no shots");
    }
    Eigen::MatrixXd f(rows_, cols_);
    for (int k = 0; k < rows_; ++k) {
        for (int l = 0; l < cols_; ++l) {
            f(k, l) = static_cast<double>(count(k, l)) / static_cast<double>(total_);
        }
    }
    return JointPhotonDistribution(std::move(f));
}

}  // namespace tmd
