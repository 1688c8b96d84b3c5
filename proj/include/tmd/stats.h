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

#include <utility>

#include "tmd/distribution.h"

namespace tmd {

enum class Axis { kSignal, kIdler };

/// Raw moment sum_n n^m p_n. m = 0 gives the total probability.
double moment(const PhotonDistribution &dist, int m);
double variance(const PhotonDistribution &dist);

/// (signal, idler) marginals.
std::pair<PhotonDistribution, PhotonDistribution> marginals(const JointPhotonDistribution &joint);

/// Distribution of the non-heralding arm given that `herald_axis` carries
/// exactly `herald_value` photons. Throws kDegenerate on an empty slice.
PhotonDistribution conditional(const JointPhotonDistribution &joint, Axis herald_axis, int herald_value);

/// Distribution of the total photon number n + m, as seen by one detector
/// receiving both beams.
PhotonDistribution combine_collective(const JointPhotonDistribution &joint);

/// Pearson correlation of the signal and idler photon numbers.
/// Throws kDegenerate when either marginal variance vanishes.
double correlation(const JointPhotonDistribution &joint);

enum class SqueezingNormalization {
    kProductOfMeans,  // Var(n - m) / (<n><m>)
    kSumOfMeans,      // Var(n - m) / (<n> + <m>), the shot-noise convention
};

/// Twin-beam number squeezing in dB, 10 log10(Var(n - m) / norm).
///
/// Returns -infinity when Var(n - m) is exactly zero. A negative variance
/// (possible for unconstrained reconstructions) has no logarithm and yields
/// NaN. Throws kDegenerate when either mean is not positive.
double number_squeezing_db(const JointPhotonDistribution &joint,
                           SqueezingNormalization norm = SqueezingNormalization::kProductOfMeans);

/// Var(n - m) of a joint distribution.
double difference_variance(const JointPhotonDistribution &joint);

/// Least-squares fit of a truncated Poissonian to `dist`.
FitResult fit_poisson(const PhotonDistribution &dist);

/// Least-squares fit of a truncated thermal distribution to `dist`.
FitResult fit_thermal(const PhotonDistribution &dist);

/// Golden-section search settings shared by both fits.
inline constexpr int kFitMaxIterations = 200;
inline constexpr double kFitTolerance = 1e-9;

}  // namespace tmd
