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

#include "mepq/operators.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

namespace mepq {

namespace {

double max_asymmetry(const Matrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

SpectralDecomposition decompose(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian);
  if (solver.info() != Eigen::Success) {
    throw Error("eigendecomposition failed to converge");
  }
  return SpectralDecomposition{solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace

void UnitsConfig::validate() const {
  if (!(hbar > 0.0) || !(kB > 0.0)) {
    throw DomainError("units: hbar and kB must be strictly positive");
  }
}

HermitianOperator::HermitianOperator(Matrix entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw DimensionError("hermitian operator must be square and nonempty");
  }
  const double asym = max_asymmetry(entries);
  if (!(asym < kHermitianTol)) {
    throw HermiticityError("operator is not hermitian: max |A - A^dagger| = " +
                           std::to_string(asym));
  }
  mat_ = 0.5 * (entries + entries.adjoint());
}

HermitianOperator HermitianOperator::diagonal(const RealVector& values) {
  if (values.size() == 0) {
    throw DimensionError("diagonal operator needs at least one entry");
  }
  Matrix m = Matrix::Zero(values.size(), values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return HermitianOperator(std::move(m));
}

HermitianOperator HermitianOperator::zero(Eigen::Index dim) {
  return HermitianOperator(Matrix::Zero(dim, dim));
}

StateOperator::StateOperator(Matrix entries) {
  if (entries.rows() == 0 || entries.cols() == 0 ||
      entries.cols() > entries.rows()) {
    throw DimensionError("state operator must be d x r with 1 <= r <= d");
  }
  mat_ = std::move(entries);
}

StateOperator StateOperator::normalized() const {
  const double n = squared_norm();
  if (!(n > 0.0)) throw DomainError("state operator has zero norm");
  return StateOperator(mat_ / std::sqrt(n));
}

DensityMatrix DensityMatrix::checked(Matrix entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw DimensionError("density matrix must be square and nonempty");
  }
  const double asym = max_asymmetry(entries);
  if (!(asym < kHermitianTol)) {
    throw HermiticityError("density matrix is not hermitian: max asymmetry = " +
                           std::to_string(asym));
  }
  Matrix sym = 0.5 * (entries + entries.adjoint());
  const auto eig = decompose(sym);
  if (eig.eigenvalues.minCoeff() < -1e-10) {
    throw PositivityError("density matrix eigenvalue " +
                          std::to_string(eig.eigenvalues.minCoeff()) +
                          " below -1e-10");
  }
  const double tr = sym.trace().real();
  if (std::abs(tr - 1.0) > 1e-9) {
    throw DomainError("density matrix trace " + std::to_string(tr) +
                      " deviates from 1 beyond 1e-9");
  }
  return DensityMatrix(std::move(sym));
}

DensityMatrix DensityMatrix::trusted(Matrix entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw DimensionError("density matrix must be square and nonempty");
  }
  Matrix sym = 0.5 * (entries + entries.adjoint());
  return DensityMatrix(std::move(sym));
}

double SpectralDecomposition::support_cutoff() const {
  const double top = eigenvalues.size() ? eigenvalues.maxCoeff() : 0.0;
  return kSupportCutoffRel * std::max(top, 0.0);
}

Matrix SpectralDecomposition::apply(
    const std::function<double(double)>& f) const {
  RealVector fw(eigenvalues.size());
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    fw[i] = f(eigenvalues[i]);
  }
  return eigenvectors * fw.asDiagonal() * eigenvectors.adjoint();
}

Matrix SpectralDecomposition::apply_on_support(
    const std::function<double(double)>& f) const {
  const double cutoff = support_cutoff();
  RealVector fw(eigenvalues.size());
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    fw[i] = eigenvalues[i] > cutoff ? f(eigenvalues[i]) : 0.0;
  }
  return eigenvectors * fw.asDiagonal() * eigenvectors.adjoint();
}

Matrix SpectralDecomposition::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.adjoint();
}

SpectralDecomposition spectral_decompose(const HermitianOperator& op) {
  return decompose(op.matrix());
}

SpectralDecomposition spectral_decompose(const DensityMatrix& rho) {
  return decompose(rho.matrix());
}

double spectral_range(const HermitianOperator& op) {
  const auto eig = spectral_decompose(op);
  return eig.eigenvalues.maxCoeff() - eig.eigenvalues.minCoeff();
}

DensityMatrix density_from_state(const StateOperator& gamma) {
  return DensityMatrix::trusted(gamma.matrix() * gamma.matrix().adjoint());
}

StateOperator state_from_density(const DensityMatrix& rho) {
  const auto eig = spectral_decompose(rho);
  if (eig.eigenvalues.minCoeff() < -1e-10) {
    throw PositivityError("cannot take the square root: eigenvalue " +
                          std::to_string(eig.eigenvalues.minCoeff()) +
                          " below -1e-10");
  }
  const double cutoff = eig.support_cutoff();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < eig.dim(); ++i) {
    if (eig.eigenvalues[i] > cutoff) ++rank;
  }
  if (rank == 0) throw DomainError("cannot factor a zero state");
  if (rank == eig.dim()) {
    return StateOperator(eig.apply([](double w) { return std::sqrt(w); }));
  }
  // Rank-deficient states get the thin spectral factor: a d x r gamma
  // bounds rank(gamma gamma^dagger) by construction, where the square
  // hermitian root would let round-off feed the unstable null directions
  // (a stray eigenvalue eps grows as -sigma eps ln eps once above the
  // support cutoff).
  Matrix thin(eig.dim(), rank);
  Eigen::Index col = 0;
  for (Eigen::Index i = eig.dim() - rank; i < eig.dim(); ++i) {
    thin.col(col++) =
        std::sqrt(std::max(eig.eigenvalues[i], 0.0)) * eig.eigenvectors.col(i);
  }
  return StateOperator(std::move(thin));
}

HermitianOperator entropy_operator(const DensityMatrix& rho) {
  const auto eig = spectral_decompose(rho);
  if (eig.eigenvalues.minCoeff() < -kPositivityHardTol) {
    throw PositivityError("entropy operator: eigenvalue " +
                          std::to_string(eig.eigenvalues.minCoeff()) +
                          " below -1e-8");
  }
  return HermitianOperator(
      eig.apply_on_support([](double w) { return w * std::log(w); }));
}

Matrix commutator(const HermitianOperator& a, const HermitianOperator& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("commutator: dimension mismatch");
  }
  return a.matrix() * b.matrix() - b.matrix() * a.matrix();
}

HermitianOperator anticommutator(const HermitianOperator& a,
                                 const HermitianOperator& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("anticommutator: dimension mismatch");
  }
  return HermitianOperator(a.matrix() * b.matrix() + b.matrix() * a.matrix());
}

Complex hs_inner(const StateOperator& a, const StateOperator& b) {
  if (a.dim() != b.dim() || a.rank_bound() != b.rank_bound()) {
    throw DimensionError("hs_inner: shape mismatch");
  }
  return (a.matrix().conjugate().cwiseProduct(b.matrix())).sum();
}

double average(const HermitianOperator& op, const DensityMatrix& rho) {
  if (op.dim() != rho.dim()) {
    throw DimensionError("average: dimension mismatch");
  }
  const double tr = rho.trace();
  if (!(tr > 0.0)) throw DomainError("average: state has nonpositive trace");
  const Complex value = trace_product(op.matrix(), rho.matrix()) / tr;
  return value.real();
}

double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  if (rho1.dim() != rho2.dim()) {
    throw DimensionError("trace_distance: dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rho1.matrix() - rho2.matrix());
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

}  // namespace mepq
