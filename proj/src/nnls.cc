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

#include "tmd/nnls.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "tmd/error.h"

namespace tmd {

namespace {

// Least squares on the passive columns; the rest of the solution is zero.
Eigen::VectorXd passive_solve(const Eigen::MatrixXd &a, const Eigen::VectorXd &b, const std::vector<bool> &passive) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (passive[j]) {
            cols.push_back(j);
        }
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
    if (cols.empty()) {
        return z;
    }
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    }
    Eigen::VectorXd zs = sub.householderQr().solve(b);
    for (std::size_t k = 0; k < cols.size(); ++k) {
        z[cols[k]] = zs[static_cast<Eigen::Index>(k)];
    }
    return z;
}

}  // namespace

Eigen::VectorXd nnls(const Eigen::MatrixXd &a_rows, const Eigen::VectorXd &b_rows) {
    const Eigen::Index n = a_rows.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(a_rows.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::VectorXd row_norm = a_rows.rowwise().norm();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return row_norm[x] > row_norm[y]; });
    Eigen::MatrixXd a_in(a_rows.rows(), n);
    Eigen::VectorXd b(b_rows.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        a_in.row(static_cast<Eigen::Index>(r)) = a_rows.row(order[r]);
        b[static_cast<Eigen::Index>(r)] = b_rows[order[r]];
    }

    // The problem is invariant under positive column scaling; unit columns make one tolerance fit all.
    Eigen::VectorXd scale = a_in.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (scale[j] == 0.0) {
            scale[j] = 1.0;
        }
    }
    Eigen::MatrixXd a = a_in * scale.cwiseInverse().asDiagonal();

    // Rounding noise in the gradient scales with the current residual, not with
    // b: graded rows leave real but tiny gradients once the residual is small.
    const double eps = std::numeric_limits<double>::epsilon();
    const double gradient_noise = 10.0 * eps * static_cast<double>(std::max(a.rows(), n)) * a.norm();
    const int max_outer = static_cast<int>(3 * n + 10);

    std::vector<bool> passive(n, false);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w = a.transpose() * (b - a * x);

    int outer = 0;
    while (true) {
        Eigen::Index best = -1;
        double best_w = gradient_noise * (b - a * x).norm();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[j] && w[j] > best_w) {
                best_w = w[j];
                best = j;
            }
        }
        if (best < 0) {
            break;
        }
        if (++outer > max_outer) {
            fail(ErrorCode::kNumerical, "NNLS active set did not settle");
        }
        passive[best] = true;

        Eigen::VectorXd z = passive_solve(a, b, passive);
        int inner = 0;
        while (true) {
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[j] && z[j] <= 0.0) {
                    feasible = false;
                    break;
                }
            }
            if (feasible) {
                break;
            }
            if (++inner > max_outer) {
                fail(ErrorCode::kNumerical, "NNLS inner loop did not settle");
            }
            double alpha = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[j] && z[j] <= 0.0) {
                    alpha = std::min(alpha, x[j] / (x[j] - z[j]));
                }
            }
            x += alpha * (z - x);
            const double floor = 10.0 * eps * std::max(1.0, x.cwiseAbs().maxCoeff());
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[j] && x[j] <= floor) {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            z = passive_solve(a, b, passive);
        }
        x = z;
        w = a.transpose() * (b - a * x);
    }
    return x.cwiseQuotient(scale);
}

}  // namespace tmd
