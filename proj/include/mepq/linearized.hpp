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

#include <vector>

#include "mepq/functionals.hpp"
#include "mepq/operators.hpp"

namespace mepq {

/// Near-equilibrium closed form: everything lives in the eigenbasis of the
/// hamiltonian, so only the energies, the target inverse temperature and
/// the equilibrium value of sigma are needed.
struct LinearizedModel {
  double beta = 1.0;
  double sigma_eq = 1.0;     // > 0
  RealVector energies;       // hamiltonian eigenvalues, ascending
  UnitsConfig units;

  void validate() const;
  Eigen::Index dim() const { return energies.size(); }
};

/// Builds the model from a hamiltonian, evaluating the sigma policy at the
/// target Gibbs state.
LinearizedModel make_linearized(const HermitianOperator& h, double beta,
                                const SigmaPolicy& sigma = SigmaPolicy(),
                                const UnitsConfig& units = {});

/// x coth(x), even, >= 1 with equality only at 0; series below |x| = 1e-3.
double xcothx(double x);

/// Relaxation rates of the deviation element (mu, nu):
/// lambda = sigma_eq * xcothx(beta (E_mu - E_nu)/2) is the total rate,
/// gamma_excess = lambda - sigma_eq >= 0 the extra decoherence rate of
/// off-diagonal elements (zero on the diagonal).
struct DecayRate {
  double lambda = 0.0;
  double gamma_excess = 0.0;
};

DecayRate decay_rate(Eigen::Index mu, Eigen::Index nu,
                     const LinearizedModel& model);

/// Full matrix of total rates lambda_{mu nu}.
RealMatrix rate_matrix(const LinearizedModel& model);

/// Element-wise propagation delta(t)_{mu nu} = exp(-lambda_{mu nu} t)
/// delta(0)_{mu nu} of a deviation given in the hamiltonian eigenbasis.
/// Requires Tr(delta0) = 0 and Tr(H delta0) = 0 within 1e-10.
Matrix linear_propagate(const Matrix& delta0, double t,
                        const LinearizedModel& model);

/// <O>_Delta(t) = exp(-sigma_eq t) <O>_Delta(0) for O commuting with H
/// (all matrices in the eigenbasis). Rejects non-commuting observables.
double commuting_observable_decay(const Matrix& observable,
                                  const Matrix& delta0, double t,
                                  const LinearizedModel& model);

/// Kinetic rates of the two-level relaxation law written as
/// n1' = -k12 n1 + k21 n2: k12 = sigma_eq n2_eq, k21 = sigma_eq n1_eq,
/// with detailed balance k12/k21 = exp(-beta (E2 - E1)).
struct TwoLevelRates {
  double k12 = 0.0;
  double k21 = 0.0;
};

TwoLevelRates two_level_rates(const LinearizedModel& model);

/// Oscillator amplitude damping gamma(omega, beta) = sigma_eq *
/// xcothx(beta hbar omega / 2) and the coefficients (2 gamma,
/// omega^2 + gamma^2) of the second-order equation for <q>.
struct OscillatorDamping {
  double gamma = 0.0;
  double friction = 0.0;    // 2 gamma
  double stiffness = 0.0;   // omega^2 + gamma^2
};

OscillatorDamping oscillator_damping(double omega,
                                     const LinearizedModel& model);

/// Per-element exponential rates fitted by least squares on
/// ln |delta_k(mu, nu)| over the samples; NaN where the magnitudes give
/// fewer than three usable points.
RealMatrix fit_elementwise_rates(const std::vector<double>& times,
                                 const std::vector<Matrix>& deviations,
                                 double magnitude_floor = 1e-12);

}  // namespace mepq
