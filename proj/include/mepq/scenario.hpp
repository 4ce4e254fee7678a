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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mepq/dynamics.hpp"
#include "mepq/equilibrium.hpp"
#include "mepq/linearized.hpp"

namespace mepq {

using Json = nlohmann::json;

/// Shortest round-trip decimal representation (17 significant digits max).
std::string format_double(double value);

/// {"dim": d, "entries": [[re, im], ...]} row-major.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& path);

/// Header `t,trace,energy,entropy,entropy_production,zeta,eig_1..eig_d
/// [,c_1..c_n]`, one row per sample.
std::string trajectory_csv(const Trajectory& traj);

/// {"times": [...], "states": [matrix, ...], "status": "..."}.
Json states_to_json(const Trajectory& traj);

/// A scenario parsed from JSON. Single-system scenarios fill `model` and
/// `initial`; composite ones fill the composite fields instead.
struct ScenarioConfig {
  bool composite = false;
  ModelSpec model;
  DensityMatrix initial;
  CompositeSpec composite_spec;
  DensityMatrix initial1, initial2;
  IntegratorConfig integrator;
  std::string trajectory_csv_name = "trajectory.csv";
  std::string factor1_csv_name = "factor1.csv";
  std::string factor2_csv_name = "factor2.csv";
  std::string states_json_name;  // empty: not written
  std::string summary_json_name = "summary.json";
  Json raw;
};

/// Parses and validates; throws ConfigError carrying the offending field
/// path. `seed_override` replaces every "seed" field in the config.
ScenarioConfig parse_scenario(const Json& config,
                              std::optional<std::uint64_t> seed_override,
                              bool need_initial_state = true);

struct InvariantReport {
  bool ok = true;
  std::string detail;
};

/// Post-run check of the conservation and monotonicity diagnostics:
/// |Tr rho - 1| <= 1e-9, |E - E(0)| <= 1e-7 * range(H), entropy
/// non-decreasing within 1e-9, entropy production >= -1e-12, and commuting
/// constraint averages within 1e-7 * ||C_j||.
InvariantReport validate_trajectory(const Trajectory& traj,
                                    const ModelSpec& model);
InvariantReport validate_composite(const CompositeTrajectory& traj,
                                   const CompositeSpec& spec);

/// Near-equilibrium overlay: evolves rho_eq + perturbation with the full
/// nonlinear flow, maps every sample into the rotating frame in the
/// hamiltonian eigenbasis, and fits per-element decay exponents for
/// comparison against the analytic rate matrix.
struct LinearComparison {
  LinearizedModel linear_model;
  std::vector<double> times;
  std::vector<Matrix> deviations;  // rotating frame, eigenbasis
  RealMatrix fitted_rates;         // NaN where unfittable
  RealMatrix analytic_rates;
  double max_rel_error = 0.0;      // fitted vs analytic, fittable elements
  double population_rate = 0.0;    // mean fitted diagonal rate
  Trajectory trajectory;
};

/// Deviation with Tr(delta) = 0 and Tr(H delta) = 0, all elements
/// generically nonzero, Frobenius norm `scale`, in the eigenbasis of H.
Matrix admissible_deviation(const RealVector& energies, double scale,
                            std::uint64_t seed);

LinearComparison compare_with_linearized(const HermitianOperator& h,
                                         double beta, double scale,
                                         std::uint64_t seed,
                                         const SigmaPolicy& sigma,
                                         const IntegratorConfig& config,
                                         const UnitsConfig& units = {});

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 config error, 3 integration failure,
                      // 4 invariant violation in diagnostics
  std::string message;
};

/// Dispatches one subcommand (evolve, equilibrium, linearize, compare,
/// contact) on a parsed JSON config, writing artifacts under out_dir.
RunResult run_scenario(const std::string& subcommand, const Json& config,
                       const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override,
                       bool quiet);

}  // namespace mepq
