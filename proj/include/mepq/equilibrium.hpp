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

#include <optional>
#include <vector>

#include "mepq/functionals.hpp"
#include "mepq/operators.hpp"

namespace mepq {

/// The occupied energy levels of a finite support, ascending, with their
/// multiplicities.
struct SupportSpectrum {
  std::vector<double> energies;      // strictly increasing
  std::vector<int> multiplicities;   // empty means all ones

  void validate() const;
  int total_states() const;
  double min_energy() const { return energies.front(); }
  double max_energy() const { return energies.back(); }
  double range() const { return max_energy() - min_energy(); }
  /// Arithmetic mean over states (multiplicity-weighted).
  double mean_energy() const;
  /// Canonical mean energy at inverse temperature beta (log-domain stable).
  double thermal_energy(double beta) const;
  double log_partition(double beta) const;
};

/// Canonical distribution on a finite support. `degenerate` marks the
/// beta = +/- infinity endpoints (all weight on the lowest or highest
/// level), where `beta` holds the signed infinity.
struct GibbsSolution {
  double beta = 0.0;
  double logZ = 0.0;
  std::vector<double> probabilities;  // per level, multiplicity folded in
  bool degenerate = false;
};

/// Solves mean_energy(beta) = target for beta by expanding-bracket
/// bisection; the map is strictly decreasing so the solution is unique.
/// Throws DomainError for infeasible targets; returns the degenerate
/// endpoint distribution when the target sits at min or max energy.
GibbsSolution solve_beta(const SupportSpectrum& spectrum, double energy,
                         double tol = 1e-12);

/// Gibbs distribution at a given finite beta (no solve).
GibbsSolution gibbs_at_beta(const SupportSpectrum& spectrum, double beta);

/// Collapses a list of eigenvalues into a support spectrum, merging levels
/// closer than merge_tol * (spectral range) into one entry with multiplicity.
SupportSpectrum support_from_energies(const RealVector& energies,
                                      double merge_tol = 1e-10);

/// True iff the conserved energy calls for beta <= 0: E >= mean of the
/// occupied levels.
bool negative_temperature_predicate(const SupportSpectrum& spectrum,
                                    double energy);

/// exp(-beta H)/Z, spectrally computed, optionally restricted to the range
/// of a projector commuting with H. Overflow is guarded by shifting the
/// exponent by its maximum.
DensityMatrix gibbs_density(const HermitianOperator& h, double beta,
                            const std::optional<Matrix>& support_projector =
                                std::nullopt);

struct StationarityReport {
  double commutator_norm = 0.0;  // ||[rho, H]||_F
  double rhs_norm = 0.0;         // ||d rho/dt||_F at sigma = 1
  bool stationary = false;
  // Fitted only when stationary: occupations obey
  // ln rho_nu = -2 zeta_eq (E_nu - E) - entropy_eq on the support.
  double zeta_eq = 0.0;
  double entropy_eq = 0.0;       // S^eq/kB
  double max_log_residual = 0.0;
};

/// Diagnostic check of the equilibrium characterization.
StationarityReport stationarity_check(const DensityMatrix& rho,
                                      const HermitianOperator& h,
                                      double tol = 1e-8);

/// One entry per eigenvector of the (diagonalized) state: the occupation
/// flow rho_dot_nu = -sigma [rho_nu ln rho_nu + alpha_nu rho_nu] with
/// alpha_nu = 2 zeta Tr[P_nu (H - E)] + S/kB.
struct EigenvalueFlowEntry {
  double occupation = 0.0;
  double rate = 0.0;   // rho_dot_nu
  double alpha = 0.0;
};

std::vector<EigenvalueFlowEntry> eigenvalue_flow(
    const SpectralDecomposition& rho_eig, const HermitianOperator& h,
    const MultiplierSet& multipliers);

}  // namespace mepq
