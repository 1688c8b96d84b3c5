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

#include <Eigen/Dense>

namespace tmd {

/// Lawson-Hanson active-set solution of min ||A x - b||_2 subject to x >= 0.
/// Rows are sorted by decreasing norm before factoring, so graded detector
/// matrices keep their accuracy. Throws kNumerical if the active set keeps
/// cycling past the iteration cap.
Eigen::VectorXd nnls(const Eigen::MatrixXd &a, const Eigen::VectorXd &b);

}  // namespace tmd
