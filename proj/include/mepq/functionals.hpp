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
#include <string>
#include <vector>

#include "mepq/operators.hpp"
#include "mepq/types.hpp"

namespace mepq {

// Relative factor for the variance floor: when the energy variance drops
// below 1e-12 * (spectral range)^2 the state sits in a single energy
// eigenspace and the zeta term is dropped (0/0 resolved to 0).
inline constexpr double kVarianceFloorRel = 1e-12;
// Covariance matrices worse conditioned than this are rejected as degenerate.
inline constexpr double kMaxConditionNumber = 1e12;

/// Lagrange data for one right-hand-side evaluation. `zeta` is the real
/// part of the energy multiplier; its imaginary part is pinned so that
/// sigma * Im(zeta) = 1/hbar, which produces the hamiltonian commutator.
struct MultiplierSet {
  double zeta = 0.0;
  double xi = 0.0;
  std::vector<double> eta;  // one per constraint operator
  double sigma = 1.0;       // >= 0, sets the dissipative time scale
};

/// The scale-setting functional sigma(rho, H - E) >= 0. The dynamics leaves
/// it open; a constant fixes the time unit, a callback lets callers supply
/// any state functional with the required invariances.
class SigmaPolicy {
 public:
  using Callback = std::function<double(const DensityMatrix&,
                                        const HermitianOperator&, double)>;

  SigmaPolicy() : SigmaPolicy(constant(1.0)) {}
  static SigmaPolicy constant(double value);
  static SigmaPolicy callback(std::string name, Callback fn);

  double evaluate(const DensityMatrix& rho, const HermitianOperator& h,
                  double energy) const;
  bool is_constant() const { return !fn_; }
  double constant_value() const { return value_; }
  const std::string& name() const { return name_; }

 private:
  SigmaPolicy(std::string name, double value, Callback fn)
      : name_(std::move(name)), value_(value), fn_(std::move(fn)) {}
  std::string name_;
  double value_ = 1.0;
  Callback fn_;
};

/// Conserved observables C_j entering the constrained dynamics together
/// with their recorded averages <C_j> at the start of a run.
struct ConstraintSet {
  std::vector<HermitianOperator> operators;
  std::vector<double> conserved_averages;  // empty or one per operator

  std::size_t size() const { return operators.size(); }
  bool empty() const { return operators.empty(); }
  void validate(Eigen::Index dim) const;

  /// Max Frobenius norm over [C_j, H] and [C_j, C_l]. The dynamics is
  /// invariant under the symmetry group only when this vanishes; the RHS
  /// can still be evaluated otherwise.
  double commutation_defect(const HermitianOperator& h) const;
  bool invariant_grade(const HermitianOperator& h, double tol = 1e-10) const;
};

/// Entropy functional S/kB = Tr(S_hat(rho)) together with the operator
/// gradient delta S_hat / delta rho, both under the support convention.
class EntropyModel {
 public:
  enum class Kind { von_neumann, tsallis, custom };
  using EntropyFn =
      std::function<double(const DensityMatrix&, const SpectralDecomposition&)>;
  using GradientFn =
      std::function<Matrix(const DensityMatrix&, const SpectralDecomposition&)>;

  EntropyModel() : EntropyModel(von_neumann()) {}
  static EntropyModel von_neumann();
  static EntropyModel tsallis(double q);
  static EntropyModel custom(std::string name, EntropyFn entropy,
                             GradientFn gradient);

  Kind kind() const { return kind_; }
  double q() const { return q_; }
  const std::string& name() const { return name_; }

  /// S/kB evaluated on the given state.
  double entropy(const DensityMatrix& rho,
                 const SpectralDecomposition& eig) const;
  /// Hermitian gradient delta S_hat / delta rho; zero off the support.
  Matrix gradient(const DensityMatrix& rho,
                  const SpectralDecomposition& eig) const;

 private:
  EntropyModel(Kind kind, double q, std::string name, EntropyFn entropy,
               GradientFn gradient)
      : kind_(kind),
        q_(q),
        name_(std::move(name)),
        entropy_(std::move(entropy)),
        gradient_(std::move(gradient)) {}
  Kind kind_;
  double q_ = 1.0;
  std::string name_;
  EntropyFn entropy_;
  GradientFn gradient_;
};

/// S = -kB Tr(rho ln rho) >= 0; zero exactly on pure states.
double von_neumann_entropy(const DensityMatrix& rho,
                           const UnitsConfig& units = {});

/// Tr(H^2 rho)/Tr(rho) - <H>^2.
double energy_variance(const DensityMatrix& rho, const HermitianOperator& h);

/// The variance floor below which the zeta term is dropped.
double variance_floor(const HermitianOperator& h);
double variance_floor_from_range(double range);

/// zeta = -(1/2) Tr[(H - E) rho ln rho] / Tr[(H - E)^2 rho]; zero when the
/// energy variance sits at or below the floor.
double zeta(const DensityMatrix& rho, const HermitianOperator& h);

/// xi = S/(kB Tr rho) - 2 zeta E.
double xi(const DensityMatrix& rho, const HermitianOperator& h,
          double zeta_value);

/// sigma * (theta|theta) * kB with theta = ln(gamma gamma^dagger) gamma
/// + 2 zeta H gamma + 2 eta^j C_j gamma + xi gamma. Also asserts the
/// orthogonality relations (gamma|theta) = 0 and (gamma|H|theta) = 0; a
/// violation beyond 1e-8 signals inconsistent multipliers.
double entropy_production(const StateOperator& gamma,
                          const HermitianOperator& h,
                          const MultiplierSet& multipliers,
                          const ConstraintSet& constraints = {},
                          const UnitsConfig& units = {});

/// Solves the linear system fixing (zeta, eta^1..eta^n) so that energy and
/// every <C_j> are conserved by the dissipative flow. The coefficient
/// matrix is the symmetrized covariance matrix of {H - E, C_j - <C_j>}
/// under rho; the inhomogeneity carries the (i / hbar sigma)
/// Tr([C_j, H] rho) terms. Throws DegenerateConstraintsError, naming the
/// offending operator, when the covariance matrix condition number
/// exceeds 1e12.
MultiplierSet lagrange_solve(const DensityMatrix& rho,
                             const HermitianOperator& h,
                             const ConstraintSet& constraints, double sigma,
                             const UnitsConfig& units = {});

/// S_q = kB (Tr rho - Tr rho^q)/(q - 1), with rho^q spectral and 0^q = 0.
double tsallis_entropy(const DensityMatrix& rho, double q,
                       const UnitsConfig& units = {});

/// zeta_q = -(1/2) (q/(q-1)) Tr[(H - E) rho^q] / Tr[(H - E)^2 rho].
double tsallis_zeta(const DensityMatrix& rho, const HermitianOperator& h,
                    double q);

/// Multipliers for a state-dependent energy functional H_hat(rho) (already
/// evaluated at rho) and an arbitrary entropy model:
/// zeta = (1/2) <(H_hat - <H_hat>) dS/drho> / <(H_hat - <H_hat>)^2>.
MultiplierSet generalized_multipliers(const DensityMatrix& rho,
                                      const HermitianOperator& h_hat,
                                      const EntropyModel& model,
                                      double sigma = 1.0);

}  // namespace mepq
