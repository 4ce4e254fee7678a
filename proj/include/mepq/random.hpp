// Copyright 2026 The mepq authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>

#include "mepq/operators.hpp"

namespace mepq {

/// Counter-based 64-bit stream (splitmix64): output i is a fixed bijective
/// mix of seed + (i+1) * golden gamma, so a (seed, counter) pair addresses
/// any draw directly and streams never depend on call history.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal pair via the Box-Muller transform.
  std::pair<double, double> normal_pair();
  /// Standard complex normal: (x + iy)/sqrt(2) with x, y ~ N(0, 1).
  Complex complex_normal();

 private:
  std::uint64_t state_;
};

/// d x r state block gamma with independent standard complex normal
/// entries, normalized to Tr(gamma gamma^dagger) = 1; rho = gamma
/// gamma^dagger then has rank exactly r.
DensityMatrix random_mixed(Eigen::Index dim, Eigen::Index rank,
                           std::uint64_t seed);

/// GUE-style random hermitian operator with entries scaled by `scale`.
HermitianOperator random_hermitian(Eigen::Index dim, std::uint64_t seed,
                                   double scale = 1.0);

/// Haar-ish random unit vector (normalized complex normals).
Vector random_pure_vector(Eigen::Index dim, std::uint64_t seed);

}  // namespace mepq
