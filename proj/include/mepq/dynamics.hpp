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
#include <functional>
#include <string>
#include <vector>

#include "mepq/functionals.hpp"
#include "mepq/operators.hpp"

namespace mepq {

// The run stops with status `stationary` once ||d rho/dt||_F stays below
// kStationaryRel * sigma for three consecutive samples.
inline constexpr double kStationaryRel = 1e-12;
inline constexpr int kStationarySamples = 3;

/// A state-dependent hermitian energy functional H_hat(rho).
using EnergyFunctional = std::function<HermitianOperator(const DensityMatrix&)>;

/// Everything defining one single-system flow: hamiltonian, entropy model,
/// time-scale policy, optional conserved observables and an optional
/// state-dependent energy functional replacing H in the dissipative and
/// hamiltonian parts.
struct ModelSpec {
  HermitianOperator hamiltonian;
  EntropyModel entropy_model = EntropyModel::von_neumann();
  SigmaPolicy sigma_policy = SigmaPolicy::constant(1.0);
  ConstraintSet constraints;
  EnergyFunctional generalized_energy;  // empty: plain hamiltonian
  UnitsConfig units;

  void validate() const;
};

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 1e-3;
  double max_step = 0.25;
  double t_end = 10.0;
  double record_every = 0.1;
  std::uint64_t max_steps = 100000000;

  void validate() const;
};

enum class TrajectoryStatus { completed, stationary, failed };
const char* to_string(TrajectoryStatus status);

struct SampleDiagnostics {
  double trace = 1.0;    // Tr(rho) before the per-step renormalization
  double energy = 0.0;   // <H> of the plain hamiltonian
  double entropy = 0.0;  // model entropy, units of kB
  double entropy_production = 0.0;  // kB / time
  double zeta = 0.0;
  double sigma = 0.0;
  double rhs_norm = 0.0;  // ||d rho/dt||_F
  RealVector eigenvalues;  // descending occupations
  std::vector<double> constraint_averages;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::vector<SampleDiagnostics> diagnostics;
  TrajectoryStatus status = TrajectoryStatus::completed;
  std::string message;

  const DensityMatrix& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
};

/// d gamma/dt for the current model; the workhorse the integrator runs on.
Matrix rhs_gamma(const StateOperator& gamma, const ModelSpec& model);

/// d rho/dt of the von Neumann flow (with constraints when present):
/// -sigma [rho ln rho + {zeta (H-E) + eta^j (C_j - <C_j>), rho}
///         - rho Tr(rho ln rho)/Tr rho] + (i/hbar)[rho, H].
Matrix rhs_rho(const DensityMatrix& rho, const ModelSpec& model);

/// The rotating-frame flow: same dissipative part, no commutator.
Matrix rhs_interaction(const DensityMatrix& rho_bar, const ModelSpec& model);

/// d rho/dt under the Tsallis entropy:
/// -sigma [(q/(q-1)) rho^q + zeta_q {H-E, rho}
///         - (q/(q-1)) (Tr rho^q / Tr rho) rho] + (i/hbar)[rho, H].
Matrix rhs_tsallis(const DensityMatrix& rho, const ModelSpec& model);

/// d rho/dt for a state-dependent energy functional H_hat(rho) and an
/// arbitrary entropy model; conserves Tr(rho) and Tr(H_hat rho_dot) = 0.
Matrix rhs_generalized(const DensityMatrix& rho, const ModelSpec& model);

Trajectory evolve(const StateOperator& gamma0, const ModelSpec& model,
                  const IntegratorConfig& config);
Trajectory evolve(const DensityMatrix& rho0, const ModelSpec& model,
                  const IntegratorConfig& config);

/// Propagates the rotating-frame state (no commutator term). Mapping the
/// result through rho(t) = exp(-iHt/hbar) rho_bar(t) exp(iHt/hbar)
/// reproduces the direct evolution.
Trajectory evolve_interaction(const DensityMatrix& rho0,
                              const ModelSpec& model,
                              const IntegratorConfig& config);

enum class CompositeMode { thermal_contact, adiabatic, isolated };
const char* to_string(CompositeMode mode);

/// Two noninteracting factors under H = H1 x I + I x H2 in product form.
/// thermal_contact shares the joint sigma and zeta (energy flows between
/// the factors until their temperatures agree); adiabatic gives each factor
/// its own zeta but a shared sigma (each energy conserved); isolated is two
/// fully independent single-system flows.
struct CompositeSpec {
  HermitianOperator h1, h2;
  CompositeMode mode = CompositeMode::thermal_contact;
  SigmaPolicy sigma_policy = SigmaPolicy::constant(1.0);
  UnitsConfig units;

  void validate() const;
};

std::pair<Matrix, Matrix> rhs_composite(const DensityMatrix& rho1,
                                        const DensityMatrix& rho2,
                                        const CompositeSpec& spec);

struct CompositeTrajectory {
  Trajectory factor1, factor2;
  std::vector<double> zeta_shared;  // per sample; joint zeta in contact mode
  std::vector<double> total_energy;
  std::vector<double> total_entropy;  // S1 + S2 in kB units
  TrajectoryStatus status = TrajectoryStatus::completed;
  std::string message;
};

CompositeTrajectory evolve_composite(const DensityMatrix& rho1,
                                     const DensityMatrix& rho2,
                                     const CompositeSpec& spec,
                                     const IntegratorConfig& config);

struct CovarianceReport {
  double max_trace_distance = 0.0;
  std::size_t samples = 0;
};

/// Evolves U rho0 U^dagger and compares with U (evolved rho0) U^dagger;
/// U must be unitary and commute with the hamiltonian.
CovarianceReport covariance_check(const DensityMatrix& rho0,
                                  const ModelSpec& model, const Matrix& u,
                                  const IntegratorConfig& config);

}  // namespace mepq
