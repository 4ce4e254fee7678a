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

#include <functional>

#include "mepq/types.hpp"

namespace mepq {

// Absolute entry-wise tolerance below which an operator is symmetrized
// instead of rejected.
inline constexpr double kHermitianTol = 1e-12;
// Eigenvalues at or below kSupportCutoffRel * (max eigenvalue) count as
// exactly zero in spectral functions, realizing the 0*ln(0) = 0 convention.
inline constexpr double kSupportCutoffRel = 1e-14;
// Eigenvalues below -kPositivityHardTol are a positivity violation.
inline constexpr double kPositivityHardTol = 1e-8;

/// Dense Hermitian operator on a d-dimensional Hilbert space. Construction
/// symmetrizes round-off level asymmetry and rejects anything larger.
class HermitianOperator {
 public:
  HermitianOperator() = default;
  explicit HermitianOperator(Matrix entries);

  static HermitianOperator diagonal(const RealVector& values);
  static HermitianOperator zero(Eigen::Index dim);

  Eigen::Index dim() const { return mat_.rows(); }
  const Matrix& matrix() const { return mat_; }

 private:
  Matrix mat_;
};

/// Generalized square root of a density matrix: rho = gamma gamma^dagger.
/// Stored as a d x r block, r <= d; r < d pins the rank of rho.
class StateOperator {
 public:
  StateOperator() = default;
  explicit StateOperator(Matrix entries);

  Eigen::Index dim() const { return mat_.rows(); }
  Eigen::Index rank_bound() const { return mat_.cols(); }
  const Matrix& matrix() const { return mat_; }

  /// Tr(gamma^dagger gamma) = Tr(rho).
  double squared_norm() const { return mat_.squaredNorm(); }
  StateOperator normalized() const;

 private:
  Matrix mat_;
};

/// Hermitian, positive semidefinite state. `checked` enforces the full
/// invariant set (hermiticity, eigenvalues >= -1e-10, unit trace within
/// 1e-9); `trusted` is for matrices positive by construction.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  static DensityMatrix checked(Matrix entries);
  static DensityMatrix trusted(Matrix entries);

  Eigen::Index dim() const { return mat_.rows(); }
  const Matrix& matrix() const { return mat_; }
  double trace() const { return mat_.trace().real(); }

 private:
  explicit DensityMatrix(Matrix entries) : mat_(std::move(entries)) {}
  Matrix mat_;
};

/// Eigen-decomposition A = V diag(w) V^dagger with ascending eigenvalues.
struct SpectralDecomposition {
  RealVector eigenvalues;  // ascending
  Matrix eigenvectors;     // orthonormal columns

  Eigen::Index dim() const { return eigenvalues.size(); }
  /// Support threshold for spectral functions of a PSD operator.
  double support_cutoff() const;
  /// V f(w) V^dagger over all eigenvalues.
  Matrix apply(const std::function<double(double)>& f) const;
  /// V f(w) V^dagger with f forced to zero at or below the support cutoff.
  Matrix apply_on_support(const std::function<double(double)>& f) const;
  Matrix reconstruct() const;
};

SpectralDecomposition spectral_decompose(const HermitianOperator& op);
SpectralDecomposition spectral_decompose(const DensityMatrix& rho);

/// Largest minus smallest eigenvalue.
double spectral_range(const HermitianOperator& op);

/// rho = gamma gamma^dagger. Positive semidefinite by construction; the
/// trace is whatever gamma produces, never silently renormalized.
DensityMatrix density_from_state(const StateOperator& gamma);

/// Hermitian square root rho^{1/2}, the canonical gamma for a given rho.
/// Eigenvalues in [-1e-10, 0) are clamped to zero; below that it throws.
StateOperator state_from_density(const DensityMatrix& rho);

/// rho ln(rho) on the support of rho (0 ln 0 = 0). Throws PositivityError
/// when an eigenvalue is below -1e-8.
HermitianOperator entropy_operator(const DensityMatrix& rho);

Matrix commutator(const HermitianOperator& a, const HermitianOperator& b);
HermitianOperator anticommutator(const HermitianOperator& a,
                                 const HermitianOperator& b);

/// Hilbert-Schmidt inner product (a|b) = Tr(a^dagger b).
Complex hs_inner(const StateOperator& a, const StateOperator& b);

/// <O> = Tr(O rho) / Tr(rho); real for Hermitian O.
double average(const HermitianOperator& op, const DensityMatrix& rho);

/// (1/2) sum of |eigenvalues| of rho1 - rho2.
double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2);

}  // namespace mepq
