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

#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

#include "mepq/operators.hpp"
#include "mepq/random.hpp"

namespace mepq::test {

inline Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

inline Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

inline DensityMatrix diag_state(std::initializer_list<double> probs) {
  RealVector p(static_cast<Eigen::Index>(probs.size()));
  Eigen::Index i = 0;
  for (double v : probs) p[i++] = v;
  Matrix m = Matrix::Zero(p.size(), p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) m(j, j) = p[j];
  return DensityMatrix::trusted(m);
}

inline HermitianOperator diag_operator(std::initializer_list<double> values) {
  RealVector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return HermitianOperator::diagonal(v);
}

inline DensityMatrix pure_state(const Vector& psi) {
  const Vector n = psi / psi.norm();
  return DensityMatrix::trusted(n * n.adjoint());
}

/// exp(i s A) for hermitian A, computed spectrally.
inline Matrix unitary_from_hermitian(const HermitianOperator& a, double s) {
  const auto eig = spectral_decompose(a);
  Vector phases(eig.dim());
  for (Eigen::Index i = 0; i < eig.dim(); ++i) {
    phases[i] = std::exp(Complex(0.0, s * eig.eigenvalues[i]));
  }
  return eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
}

}  // namespace mepq::test
