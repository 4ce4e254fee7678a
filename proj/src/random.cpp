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

#include "mepq/random.hpp"

#include <cmath>
#include <numbers>

namespace mepq {

std::uint64_t CounterRng::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double CounterRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::pair<double, double> CounterRng::normal_pair() {
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

Complex CounterRng::complex_normal() {
  const auto [x, y] = normal_pair();
  return Complex(x, y) / std::sqrt(2.0);
}

DensityMatrix random_mixed(Eigen::Index dim, Eigen::Index rank,
                           std::uint64_t seed) {
  if (dim < 1 || rank < 1 || rank > dim) {
    throw DimensionError("random_mixed requires 1 <= rank <= dim");
  }
  CounterRng rng(seed);
  Matrix gamma(dim, rank);
  for (Eigen::Index i = 0; i < dim; ++i) {       // row-major fill order
    for (Eigen::Index j = 0; j < rank; ++j) {
      gamma(i, j) = rng.complex_normal();
    }
  }
  gamma /= std::sqrt(gamma.squaredNorm());
  return density_from_state(StateOperator(gamma));
}

HermitianOperator random_hermitian(Eigen::Index dim, std::uint64_t seed,
                                   double scale) {
  if (dim < 1) throw DimensionError("random_hermitian requires dim >= 1");
  CounterRng rng(seed);
  Matrix a(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      a(i, j) = rng.complex_normal();
    }
  }
  return HermitianOperator(0.5 * scale * (a + a.adjoint()));
}

Vector random_pure_vector(Eigen::Index dim, std::uint64_t seed) {
  if (dim < 1) throw DimensionError("random_pure_vector requires dim >= 1");
  CounterRng rng(seed);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.complex_normal();
  return v / v.norm();
}

}  // namespace mepq
