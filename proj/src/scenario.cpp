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

#include "mepq/scenario.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mepq/random.hpp"

namespace mepq {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// json access with field paths in every diagnostic
// ---------------------------------------------------------------------------

const Json& require_field(const Json& j, const std::string& key,
                          const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(path + "." + key + ": missing required field");
  }
  return j.at(key);
}

double as_double(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

double get_double(const Json& j, const std::string& key,
                  const std::string& path) {
  return as_double(require_field(j, key, path), path + "." + key);
}

double get_double_or(const Json& j, const std::string& key,
                     const std::string& path, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_double(j.at(key), path + "." + key);
}

std::int64_t get_int(const Json& j, const std::string& key,
                     const std::string& path) {
  const Json& v = require_field(j, key, path);
  if (!v.is_number_integer()) {
    throw ConfigError(path + "." + key + ": expected an integer");
  }
  return v.get<std::int64_t>();
}

std::string get_string(const Json& j, const std::string& key,
                       const std::string& path) {
  const Json& v = require_field(j, key, path);
  if (!v.is_string()) {
    throw ConfigError(path + "." + key + ": expected a string");
  }
  return v.get<std::string>();
}

std::string get_string_or(const Json& j, const std::string& key,
                          const std::string& fallback) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
    return fallback;
  }
  return j.at(key).get<std::string>();
}

std::uint64_t require_seed(const Json& j, const std::string& path,
                           std::optional<std::uint64_t> seed_override) {
  if (seed_override) return *seed_override;
  if (!j.is_object() || !j.contains("seed")) {
    throw ConfigError(path + ".seed: a seed is mandatory for random elements");
  }
  const Json& v = j.at("seed");
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw ConfigError(path + ".seed: expected an integer");
  }
  return v.get<std::uint64_t>();
}

// ---------------------------------------------------------------------------
// piecewise parsers
// ---------------------------------------------------------------------------

UnitsConfig parse_units(const Json& config) {
  UnitsConfig units;
  if (config.contains("units")) {
    const Json& u = config.at("units");
    units.hbar = get_double_or(u, "hbar", "units", 1.0);
    units.kB = get_double_or(u, "kB", "units", 1.0);
    try {
      units.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("units: ") + e.what());
    }
  }
  return units;
}

struct HamiltonianSpec {
  bool composite = false;
  HermitianOperator h;        // single
  HermitianOperator h1, h2;   // composite factors
  CompositeMode mode = CompositeMode::thermal_contact;
};

HermitianOperator parse_single_hamiltonian(const Json& j,
                                           const std::string& path,
                                           const UnitsConfig& units) {
  const std::string type = get_string(j, "type", path);
  if (type == "two_level") {
    RealVector e(2);
    e << get_double(j, "e1", path), get_double(j, "e2", path);
    return HermitianOperator::diagonal(e);
  }
  if (type == "diag") {
    const Json& vals = require_field(j, "values", path);
    if (!vals.is_array() || vals.empty()) {
      throw ConfigError(path + ".values: expected a nonempty array");
    }
    RealVector e(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      e[static_cast<Eigen::Index>(i)] =
          as_double(vals[i], path + ".values[" + std::to_string(i) + "]");
    }
    return HermitianOperator::diagonal(e);
  }
  if (type == "oscillator") {
    const std::int64_t n = get_int(j, "levels", path);
    const double omega = get_double(j, "omega", path);
    if (n < 2) throw ConfigError(path + ".levels: need at least 2 levels");
    if (!(omega > 0.0)) throw ConfigError(path + ".omega: must be positive");
    RealVector e(n);
    for (std::int64_t k = 0; k < n; ++k) {
      e[k] = units.hbar * omega * (static_cast<double>(k) + 0.5);
    }
    return HermitianOperator::diagonal(e);
  }
  if (type == "explicit") {
    try {
      return HermitianOperator(matrix_from_json(j, path));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  throw ConfigError(path + ".type: unknown hamiltonian type '" + type + "'");
}

HamiltonianSpec parse_hamiltonian(const Json& config,
                                  const UnitsConfig& units) {
  const Json& j = require_field(config, "hamiltonian", "config");
  const std::string path = "hamiltonian";
  HamiltonianSpec spec;
  if (get_string(j, "type", path) == "composite") {
    spec.composite = true;
    spec.h1 = parse_single_hamiltonian(require_field(j, "first", path),
                                       path + ".first", units);
    spec.h2 = parse_single_hamiltonian(require_field(j, "second", path),
                                       path + ".second", units);
    const std::string mode = get_string_or(j, "mode", "thermal_contact");
    if (mode == "thermal_contact") {
      spec.mode = CompositeMode::thermal_contact;
    } else if (mode == "adiabatic") {
      spec.mode = CompositeMode::adiabatic;
    } else if (mode == "isolated") {
      spec.mode = CompositeMode::isolated;
    } else {
      throw ConfigError(path + ".mode: unknown composite mode '" + mode + "'");
    }
    return spec;
  }
  spec.h = parse_single_hamiltonian(j, path, units);
  return spec;
}

DensityMatrix parse_initial_state(const Json& j, const HermitianOperator& h,
                                  const std::string& path,
                                  std::optional<std::uint64_t> seed_override) {
  const std::string type = get_string(j, "type", path);
  if (type == "gibbs") {
    return gibbs_density(h, get_double(j, "beta", path));
  }
  if (type == "pure") {
    const Json& vec = require_field(j, "vector", path);
    if (!vec.is_array() || vec.size() != static_cast<std::size_t>(h.dim())) {
      throw ConfigError(path + ".vector: expected " + std::to_string(h.dim()) +
                        " [re, im] pairs");
    }
    Vector psi(h.dim());
    for (std::size_t i = 0; i < vec.size(); ++i) {
      const Json& c = vec[i];
      if (!c.is_array() || c.size() != 2) {
        throw ConfigError(path + ".vector[" + std::to_string(i) +
                          "]: expected [re, im]");
      }
      psi[static_cast<Eigen::Index>(i)] =
          Complex(as_double(c[0], path), as_double(c[1], path));
    }
    const double n = psi.norm();
    if (!(n > 0.0)) throw ConfigError(path + ".vector: zero vector");
    psi /= n;
    return DensityMatrix::trusted(psi * psi.adjoint());
  }
  if (type == "random_mixed") {
    const std::int64_t rank = get_int(j, "rank", path);
    const std::uint64_t seed = require_seed(j, path, seed_override);
    if (rank < 1 || rank > h.dim()) {
      throw ConfigError(path + ".rank: must lie in [1, " +
                        std::to_string(h.dim()) + "]");
    }
    return random_mixed(h.dim(), rank, seed);
  }
  if (type == "explicit") {
    try {
      return DensityMatrix::checked(matrix_from_json(j, path));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  throw ConfigError(path + ".type: unknown initial state type '" + type + "'");
}

EntropyModel parse_entropy_model(const Json& config) {
  if (!config.contains("entropy_model")) return EntropyModel::von_neumann();
  const Json& j = config.at("entropy_model");
  const std::string type = get_string(j, "type", "entropy_model");
  if (type == "von_neumann") return EntropyModel::von_neumann();
  if (type == "tsallis") {
    const double q = get_double(j, "q", "entropy_model");
    try {
      return EntropyModel::tsallis(q);
    } catch (const Error& e) {
      throw ConfigError(std::string("entropy_model.q: ") + e.what());
    }
  }
  throw ConfigError("entropy_model.type: unknown entropy model '" + type +
                    "'");
}

SigmaPolicy parse_sigma_policy(const Json& config) {
  if (!config.contains("sigma_policy")) return SigmaPolicy::constant(1.0);
  const Json& j = config.at("sigma_policy");
  const std::string type = get_string(j, "type", "sigma_policy");
  if (type == "constant") {
    try {
      return SigmaPolicy::constant(get_double(j, "value", "sigma_policy"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("sigma_policy.value: ") + e.what());
    }
  }
  throw ConfigError("sigma_policy.type: unknown sigma policy '" + type + "'");
}

ConstraintSet parse_constraints(const Json& config) {
  ConstraintSet set;
  if (!config.contains("constraints")) return set;
  const Json& arr = config.at("constraints");
  if (!arr.is_array()) throw ConfigError("constraints: expected an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "constraints[" + std::to_string(i) + "]";
    try {
      set.operators.emplace_back(matrix_from_json(arr[i], path));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  return set;
}

IntegratorConfig parse_integrator(const Json& config) {
  IntegratorConfig cfg;
  if (config.contains("integrator")) {
    const Json& j = config.at("integrator");
    cfg.rel_tol = get_double_or(j, "rel_tol", "integrator", cfg.rel_tol);
    cfg.abs_tol = get_double_or(j, "abs_tol", "integrator", cfg.abs_tol);
    cfg.initial_step =
        get_double_or(j, "initial_step", "integrator", cfg.initial_step);
    cfg.max_step = get_double_or(j, "max_step", "integrator", cfg.max_step);
    cfg.t_end = get_double_or(j, "t_end", "integrator", cfg.t_end);
    cfg.record_every =
        get_double_or(j, "record_every", "integrator", cfg.record_every);
    if (j.contains("max_steps")) {
      cfg.max_steps =
          static_cast<std::uint64_t>(get_int(j, "max_steps", "integrator"));
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("integrator: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// output helpers
// ---------------------------------------------------------------------------

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << text;
}

void write_json(const fs::path& file, const Json& j) {
  write_text(file, j.dump(2) + "\n");
}

Json beta_to_json(double beta, bool degenerate) {
  if (degenerate || !std::isfinite(beta)) return nullptr;
  return beta;
}

Json gibbs_to_json(const GibbsSolution& sol) {
  Json out;
  out["beta"] = beta_to_json(sol.beta, sol.degenerate);
  out["degenerate"] = sol.degenerate;
  if (sol.degenerate) out["beta_sign"] = sol.beta > 0.0 ? 1 : -1;
  out["logZ"] = sol.logZ;
  out["probabilities"] = sol.probabilities;
  return out;
}

std::string rates_csv(const RealMatrix& rates) {
  std::ostringstream os;
  for (Eigen::Index mu = 0; mu < rates.rows(); ++mu) {
    for (Eigen::Index nu = 0; nu < rates.cols(); ++nu) {
      if (nu) os << ',';
      os << format_double(rates(mu, nu));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// public helpers
// ---------------------------------------------------------------------------

std::string format_double(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

Json matrix_to_json(const Matrix& m) {
  Json entries = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      entries.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    }
  }
  return Json{{"dim", m.rows()}, {"entries", std::move(entries)}};
}

Matrix matrix_from_json(const Json& j, const std::string& path) {
  const Json& dim_j = require_field(j, "dim", path);
  if (!dim_j.is_number_integer() || dim_j.get<std::int64_t>() < 1) {
    throw ConfigError(path + ".dim: expected a positive integer");
  }
  const Eigen::Index d = dim_j.get<Eigen::Index>();
  const Json& entries = require_field(j, "entries", path);
  if (!entries.is_array() ||
      entries.size() != static_cast<std::size_t>(d * d)) {
    throw ConfigError(path + ".entries: expected " + std::to_string(d * d) +
                      " [re, im] pairs (row-major)");
  }
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index jj = 0; jj < d; ++jj) {
      const Json& c = entries[static_cast<std::size_t>(i * d + jj)];
      if (!c.is_array() || c.size() != 2 || !c[0].is_number() ||
          !c[1].is_number()) {
        throw ConfigError(path + ".entries[" + std::to_string(i * d + jj) +
                          "]: expected [re, im]");
      }
      m(i, jj) = Complex(c[0].get<double>(), c[1].get<double>());
    }
  }
  return m;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  const Eigen::Index d = traj.states.empty() ? 0 : traj.states.front().dim();
  const std::size_t nc = traj.diagnostics.empty()
                             ? 0
                             : traj.diagnostics.front().constraint_averages.size();
  os << "t,trace,energy,entropy,entropy_production,zeta";
  for (Eigen::Index i = 1; i <= d; ++i) os << ",eig_" << i;
  for (std::size_t i = 1; i <= nc; ++i) os << ",c_" << i;
  os << '\n';
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const auto& g = traj.diagnostics[k];
    os << format_double(traj.times[k]) << ',' << format_double(g.trace) << ','
       << format_double(g.energy) << ',' << format_double(g.entropy) << ','
       << format_double(g.entropy_production) << ','
       << format_double(g.zeta);
    for (Eigen::Index i = 0; i < g.eigenvalues.size(); ++i) {
      os << ',' << format_double(g.eigenvalues[i]);
    }
    for (double c : g.constraint_averages) os << ',' << format_double(c);
    os << '\n';
  }
  return os.str();
}

Json states_to_json(const Trajectory& traj) {
  Json states = Json::array();
  for (const auto& s : traj.states) states.push_back(matrix_to_json(s.matrix()));
  return Json{{"times", traj.times},
              {"states", std::move(states)},
              {"status", to_string(traj.status)}};
}

ScenarioConfig parse_scenario(const Json& config,
                              std::optional<std::uint64_t> seed_override,
                              bool need_initial_state) {
  if (!config.is_object()) throw ConfigError("config: expected a JSON object");
  ScenarioConfig out;
  out.raw = config;
  const UnitsConfig units = parse_units(config);
  const HamiltonianSpec ham = parse_hamiltonian(config, units);
  out.composite = ham.composite;
  out.integrator = parse_integrator(config);

  const Json outputs =
      config.contains("outputs") ? config.at("outputs") : Json::object();
  out.trajectory_csv_name =
      get_string_or(outputs, "trajectory_csv", out.trajectory_csv_name);
  out.factor1_csv_name =
      get_string_or(outputs, "factor1_csv", out.factor1_csv_name);
  out.factor2_csv_name =
      get_string_or(outputs, "factor2_csv", out.factor2_csv_name);
  out.states_json_name = get_string_or(outputs, "states_json", "");
  out.summary_json_name =
      get_string_or(outputs, "summary_json", out.summary_json_name);

  if (ham.composite) {
    out.composite_spec.h1 = ham.h1;
    out.composite_spec.h2 = ham.h2;
    out.composite_spec.mode = ham.mode;
    out.composite_spec.units = units;
    out.composite_spec.sigma_policy = parse_sigma_policy(config);
    if (config.contains("entropy_model") &&
        parse_entropy_model(config).kind() != EntropyModel::Kind::von_neumann) {
      throw ConfigError(
          "entropy_model: composite scenarios use the von Neumann entropy");
    }
    if (need_initial_state) {
      const Json& init = require_field(config, "initial_state", "config");
      out.initial1 =
          parse_initial_state(require_field(init, "first", "initial_state"),
                              ham.h1, "initial_state.first", seed_override);
      out.initial2 =
          parse_initial_state(require_field(init, "second", "initial_state"),
                              ham.h2, "initial_state.second", seed_override);
    }
    return out;
  }

  out.model.hamiltonian = ham.h;
  out.model.units = units;
  out.model.entropy_model = parse_entropy_model(config);
  out.model.sigma_policy = parse_sigma_policy(config);
  out.model.constraints = parse_constraints(config);
  try {
    out.model.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (need_initial_state) {
    out.initial =
        parse_initial_state(require_field(config, "initial_state", "config"),
                            ham.h, "initial_state", seed_override);
    if (out.initial.dim() != ham.h.dim()) {
      throw ConfigError("initial_state: dimension does not match hamiltonian");
    }
  }
  return out;
}

InvariantReport validate_trajectory(const Trajectory& traj,
                                    const ModelSpec& model) {
  InvariantReport report;
  if (traj.states.empty()) return report;
  auto fail = [&report](const std::string& d) {
    report.ok = false;
    if (!report.detail.empty()) report.detail += "; ";
    report.detail += d;
  };
  const double range = spectral_range(model.hamiltonian);
  const double e_tol = 1e-7 * (range > 0.0 ? range : 1.0);
  const double e0 = traj.diagnostics.front().energy;
  const bool check_energy = !model.generalized_energy;
  std::vector<double> c_tol(model.constraints.size());
  for (std::size_t j = 0; j < model.constraints.size(); ++j) {
    c_tol[j] = 1e-7 * model.constraints.operators[j].matrix().norm();
  }

  double prev_entropy = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.diagnostics.size(); ++k) {
    const auto& g = traj.diagnostics[k];
    if (std::abs(g.trace - 1.0) > 1e-9) {
      fail("trace drift " + format_double(g.trace - 1.0) + " at t=" +
           format_double(traj.times[k]));
      break;
    }
    if (check_energy && std::abs(g.energy - e0) > e_tol) {
      fail("energy drift " + format_double(g.energy - e0) + " at t=" +
           format_double(traj.times[k]));
      break;
    }
    if (g.entropy < prev_entropy - 1e-9) {
      fail("entropy decreased by " + format_double(prev_entropy - g.entropy) +
           " at t=" + format_double(traj.times[k]));
      break;
    }
    prev_entropy = g.entropy;
    if (g.entropy_production < -1e-12) {
      fail("negative entropy production " +
           format_double(g.entropy_production) + " at t=" +
           format_double(traj.times[k]));
      break;
    }
    for (std::size_t j = 0; j < g.constraint_averages.size(); ++j) {
      const double c0 = traj.diagnostics.front().constraint_averages[j];
      if (std::abs(g.constraint_averages[j] - c0) > c_tol[j]) {
        fail("constraint " + std::to_string(j + 1) + " drift " +
             format_double(g.constraint_averages[j] - c0) + " at t=" +
             format_double(traj.times[k]));
        break;
      }
    }
    if (!report.ok) break;
  }
  return report;
}

InvariantReport validate_composite(const CompositeTrajectory& traj,
                                   const CompositeSpec& spec) {
  InvariantReport report;
  if (traj.factor1.states.empty()) return report;
  auto fail = [&report](const std::string& d) {
    report.ok = false;
    if (!report.detail.empty()) report.detail += "; ";
    report.detail += d;
  };
  const double r1 = spectral_range(spec.h1), r2 = spectral_range(spec.h2);
  const double joint_tol = 1e-7 * std::max(r1 + r2, 1.0);
  const double e1_tol = 1e-7 * std::max(r1, 1.0);
  const double e2_tol = 1e-7 * std::max(r2, 1.0);
  const double et0 = traj.total_energy.front();
  const double e10 = traj.factor1.diagnostics.front().energy;
  const double e20 = traj.factor2.diagnostics.front().energy;
  double prev_total_entropy = -std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < traj.total_energy.size(); ++k) {
    const auto& g1 = traj.factor1.diagnostics[k];
    const auto& g2 = traj.factor2.diagnostics[k];
    if (std::abs(g1.trace - 1.0) > 1e-9 || std::abs(g2.trace - 1.0) > 1e-9) {
      fail("factor trace drift at sample " + std::to_string(k));
      break;
    }
    if (spec.mode == CompositeMode::thermal_contact) {
      if (std::abs(traj.total_energy[k] - et0) > joint_tol) {
        fail("total energy drift " +
             format_double(traj.total_energy[k] - et0));
        break;
      }
    } else {
      if (std::abs(g1.energy - e10) > e1_tol ||
          std::abs(g2.energy - e20) > e2_tol) {
        fail("factor energy drift at sample " + std::to_string(k));
        break;
      }
    }
    const double st = traj.total_entropy[k];
    if (st < prev_total_entropy - 1e-9) {
      fail("total entropy decreased at sample " + std::to_string(k));
      break;
    }
    prev_total_entropy = st;
    if (g1.entropy_production + g2.entropy_production < -1e-12) {
      fail("negative total entropy production at sample " +
           std::to_string(k));
      break;
    }
  }
  return report;
}

Matrix admissible_deviation(const RealVector& energies, double scale,
                            std::uint64_t seed) {
  const Eigen::Index d = energies.size();
  if (d < 2) throw DimensionError("admissible_deviation needs dim >= 2");
  CounterRng rng(seed);
  Matrix delta(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    delta(i, i) = rng.normal_pair().first;
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const Complex z = rng.complex_normal();
      delta(i, j) = z;
      delta(j, i) = std::conj(z);
    }
  }
  // Remove the components along I and diag(E) so trace and energy vanish.
  double s1 = 0.0, se = 0.0, see = 0.0, sd = 0.0, sde = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double e = energies[i];
    const double x = delta(i, i).real();
    s1 += 1.0;
    se += e;
    see += e * e;
    sd += x;
    sde += x * e;
  }
  const double det = s1 * see - se * se;
  double a, b;
  if (std::abs(det) > 1e-14 * std::max(1.0, see) * s1) {
    a = (sd * see - se * sde) / det;
    b = (s1 * sde - se * sd) / det;
  } else {
    a = sd / s1;  // all energies (nearly) equal: only the trace part matters
    b = 0.0;
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    delta(i, i) -= Complex(a + b * energies[i], 0.0);
  }
  const double n = delta.norm();
  if (!(n > 0.0)) throw Error("degenerate random deviation");
  return delta * (scale / n);
}

LinearComparison compare_with_linearized(const HermitianOperator& h,
                                         double beta, double scale,
                                         std::uint64_t seed,
                                         const SigmaPolicy& sigma,
                                         const IntegratorConfig& config,
                                         const UnitsConfig& units) {
  LinearComparison out;
  const auto h_eig = spectral_decompose(h);
  const DensityMatrix rho_eq = gibbs_density(h, beta);
  const Matrix delta0 = admissible_deviation(h_eig.eigenvalues, scale, seed);
  const Matrix rho0_m =
      rho_eq.matrix() +
      h_eig.eigenvectors * delta0 * h_eig.eigenvectors.adjoint();
  {
    Eigen::SelfAdjointEigenSolver<Matrix> check(rho0_m);
    if (check.eigenvalues().minCoeff() < 0.0) {
      throw DomainError(
          "perturbation too large: the perturbed state loses positivity");
    }
  }
  const DensityMatrix rho0 = DensityMatrix::trusted(rho0_m);

  ModelSpec model;
  model.hamiltonian = h;
  model.sigma_policy = sigma;
  model.units = units;
  out.trajectory = evolve(rho0, model, config);

  // Match the target to the actually conserved energy.
  const SupportSpectrum spectrum = support_from_energies(h_eig.eigenvalues);
  const double e0 = average(h, rho0);
  const GibbsSolution sol = solve_beta(spectrum, e0, 1e-14);
  const DensityMatrix rho_target = gibbs_density(h, sol.beta);
  const Matrix target_eigb = h_eig.eigenvectors.adjoint() *
                             rho_target.matrix() * h_eig.eigenvectors;

  out.linear_model.beta = sol.beta;
  out.linear_model.energies = h_eig.eigenvalues;
  out.linear_model.units = units;
  out.linear_model.sigma_eq =
      sigma.evaluate(rho_target, h, average(h, rho_target));

  const Eigen::Index d = h.dim();
  for (std::size_t k = 0; k < out.trajectory.times.size(); ++k) {
    const double t = out.trajectory.times[k];
    Matrix bar = h_eig.eigenvectors.adjoint() *
                     out.trajectory.states[k].matrix() * h_eig.eigenvectors -
                 target_eigb;
    for (Eigen::Index mu = 0; mu < d; ++mu) {
      for (Eigen::Index nu = 0; nu < d; ++nu) {
        const double phase = (h_eig.eigenvalues[mu] - h_eig.eigenvalues[nu]) *
                             t / units.hbar;
        bar(mu, nu) *= std::exp(Complex(0.0, phase));
      }
    }
    out.times.push_back(t);
    out.deviations.push_back(std::move(bar));
  }

  out.fitted_rates =
      fit_elementwise_rates(out.times, out.deviations, 1e-4 * scale);
  out.analytic_rates = rate_matrix(out.linear_model);
  double diag_sum = 0.0;
  int diag_n = 0;
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    for (Eigen::Index nu = 0; nu < d; ++nu) {
      const double f = out.fitted_rates(mu, nu);
      if (!std::isfinite(f)) continue;
      const double rel =
          std::abs(f - out.analytic_rates(mu, nu)) / out.analytic_rates(mu, nu);
      out.max_rel_error = std::max(out.max_rel_error, rel);
      if (mu == nu) {
        diag_sum += f;
        ++diag_n;
      }
    }
  }
  out.population_rate = diag_n ? diag_sum / diag_n : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// subcommand pipelines
// ---------------------------------------------------------------------------

namespace {

RunResult run_evolve(const ScenarioConfig& cfg, const fs::path& out_dir,
                     bool quiet) {
  if (cfg.composite) {
    throw ConfigError(
        "hamiltonian: evolve runs single systems; use the contact subcommand");
  }
  const Trajectory traj = evolve(cfg.initial, cfg.model, cfg.integrator);
  write_text(out_dir / cfg.trajectory_csv_name, trajectory_csv(traj));
  if (!cfg.states_json_name.empty()) {
    write_json(out_dir / cfg.states_json_name, states_to_json(traj));
  }

  const InvariantReport inv = validate_trajectory(traj, cfg.model);
  Json summary;
  summary["subcommand"] = "evolve";
  summary["status"] = to_string(traj.status);
  summary["message"] = traj.message;
  summary["samples"] = traj.times.size();
  summary["final_time"] = traj.final_time();
  summary["energy_initial"] = traj.diagnostics.front().energy;
  summary["energy_final"] = traj.diagnostics.back().energy;
  summary["entropy_initial"] = traj.diagnostics.front().entropy;
  summary["entropy_final"] = traj.diagnostics.back().entropy;
  if (!cfg.model.constraints.empty()) {
    summary["constraints_invariant_grade"] =
        cfg.model.constraints.invariant_grade(cfg.model.hamiltonian);
  }
  summary["invariants_ok"] = inv.ok;
  summary["invariant_detail"] = inv.detail;
  write_json(out_dir / cfg.summary_json_name, summary);
  if (!quiet) {
    std::cout << "evolve: status=" << to_string(traj.status)
              << " samples=" << traj.times.size() << " t_end="
              << format_double(traj.final_time()) << '\n';
  }
  if (traj.status == TrajectoryStatus::failed) {
    return {3, "integration failed: " + traj.message};
  }
  if (!inv.ok) return {4, "invariant violation: " + inv.detail};
  return {0, "ok"};
}

RunResult run_contact(const ScenarioConfig& cfg, const fs::path& out_dir,
                      bool quiet) {
  if (!cfg.composite) {
    throw ConfigError("hamiltonian: contact needs a composite hamiltonian");
  }
  const CompositeTrajectory traj = evolve_composite(
      cfg.initial1, cfg.initial2, cfg.composite_spec, cfg.integrator);
  write_text(out_dir / cfg.factor1_csv_name, trajectory_csv(traj.factor1));
  write_text(out_dir / cfg.factor2_csv_name, trajectory_csv(traj.factor2));

  const InvariantReport inv = validate_composite(traj, cfg.composite_spec);
  Json summary;
  summary["subcommand"] = "contact";
  summary["mode"] = to_string(cfg.composite_spec.mode);
  summary["status"] = to_string(traj.status);
  summary["message"] = traj.message;
  summary["samples"] = traj.factor1.times.size();
  summary["final_time"] = traj.factor1.final_time();
  summary["zeta_shared_final"] = traj.zeta_shared.back();
  summary["beta_from_zeta"] = 2.0 * traj.zeta_shared.back();
  summary["energy_total_initial"] = traj.total_energy.front();
  summary["energy_total_final"] = traj.total_energy.back();
  summary["energy_factor1_final"] = traj.factor1.diagnostics.back().energy;
  summary["energy_factor2_final"] = traj.factor2.diagnostics.back().energy;
  summary["entropy_total_final"] = traj.total_entropy.back();
  summary["invariants_ok"] = inv.ok;
  summary["invariant_detail"] = inv.detail;
  write_json(out_dir / cfg.summary_json_name, summary);
  if (!quiet) {
    std::cout << "contact: mode=" << to_string(cfg.composite_spec.mode)
              << " status=" << to_string(traj.status)
              << " E_total=" << format_double(traj.total_energy.back())
              << '\n';
  }
  if (traj.status == TrajectoryStatus::failed) {
    return {3, "integration failed: " + traj.message};
  }
  if (!inv.ok) return {4, "invariant violation: " + inv.detail};
  return {0, "ok"};
}

RunResult run_equilibrium(const Json& config, const fs::path& out_dir,
                          std::optional<std::uint64_t>, bool quiet,
                          const ScenarioConfig* parsed) {
  const Json section = config.contains("equilibrium")
                           ? config.at("equilibrium")
                           : Json::object();
  SupportSpectrum spectrum;
  if (section.contains("energies")) {
    const Json& arr = section.at("energies");
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("equilibrium.energies: expected a nonempty array");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      spectrum.energies.push_back(
          as_double(arr[i], "equilibrium.energies[" + std::to_string(i) + "]"));
    }
    if (section.contains("multiplicities")) {
      for (const auto& g : section.at("multiplicities")) {
        if (!g.is_number_integer()) {
          throw ConfigError("equilibrium.multiplicities: expected integers");
        }
        spectrum.multiplicities.push_back(g.get<int>());
      }
    }
  } else if (parsed && !parsed->composite) {
    spectrum =
        support_from_energies(spectral_decompose(parsed->model.hamiltonian)
                                  .eigenvalues);
  } else {
    throw ConfigError(
        "equilibrium: provide equilibrium.energies or a single hamiltonian");
  }
  try {
    spectrum.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("equilibrium: ") + e.what());
  }

  GibbsSolution sol;
  if (section.contains("energy")) {
    sol = solve_beta(spectrum, get_double(section, "energy", "equilibrium"),
                     get_double_or(section, "tol", "equilibrium", 1e-12));
  } else if (section.contains("beta")) {
    sol = gibbs_at_beta(spectrum, get_double(section, "beta", "equilibrium"));
  } else {
    throw ConfigError("equilibrium: provide either energy or beta");
  }
  const Json out = gibbs_to_json(sol);
  std::cout << out.dump() << '\n';
  if (!quiet) std::cerr << "equilibrium: wrote solution\n";
  write_json(out_dir / "equilibrium.json", out);
  return {0, "ok"};
}

RunResult run_linearize(const Json& config, const ScenarioConfig& cfg,
                        const fs::path& out_dir,
                        std::optional<std::uint64_t> seed_override,
                        bool quiet) {
  if (cfg.composite) {
    throw ConfigError("hamiltonian: linearize needs a single system");
  }
  const Json section = config.contains("linearize") ? config.at("linearize")
                                                    : Json::object();
  const double beta = get_double(section, "beta", "linearize");
  LinearizedModel model;
  if (section.contains("sigma_eq")) {
    model.beta = beta;
    model.units = cfg.model.units;
    model.energies = spectral_decompose(cfg.model.hamiltonian).eigenvalues;
    model.sigma_eq = get_double(section, "sigma_eq", "linearize");
  } else {
    model = make_linearized(cfg.model.hamiltonian, beta,
                            cfg.model.sigma_policy, cfg.model.units);
  }
  try {
    model.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("linearize: ") + e.what());
  }

  const RealMatrix rates = rate_matrix(model);
  const std::string rates_name = get_string_or(
      config.contains("outputs") ? config.at("outputs") : Json::object(),
      "rates_csv", "rates.csv");
  write_text(out_dir / rates_name, rates_csv(rates));

  Json summary;
  summary["subcommand"] = "linearize";
  summary["beta"] = model.beta;
  summary["sigma_eq"] = model.sigma_eq;
  summary["dim"] = model.dim();

  if (section.contains("perturbation_scale")) {
    const double scale = get_double(section, "perturbation_scale", "linearize");
    const std::uint64_t seed = require_seed(section, "linearize", seed_override);
    const Matrix delta0 = admissible_deviation(model.energies, scale, seed);
    std::ostringstream os;
    os << "t";
    for (Eigen::Index mu = 0; mu < model.dim(); ++mu) {
      for (Eigen::Index nu = 0; nu < model.dim(); ++nu) {
        os << ",abs_d_" << mu + 1 << '_' << nu + 1;
      }
    }
    os << '\n';
    const auto emit = [&](double t) {
      const Matrix dt = linear_propagate(delta0, t, model);
      os << format_double(t);
      for (Eigen::Index mu = 0; mu < model.dim(); ++mu) {
        for (Eigen::Index nu = 0; nu < model.dim(); ++nu) {
          os << ',' << format_double(std::abs(dt(mu, nu)));
        }
      }
      os << '\n';
    };
    emit(0.0);
    for (double t = cfg.integrator.record_every;
         t <= cfg.integrator.t_end + 1e-12;
         t += cfg.integrator.record_every) {
      emit(t);
    }
    write_text(out_dir / "linear_trajectory.csv", os.str());
    summary["perturbation_scale"] = scale;
  }
  write_json(out_dir / cfg.summary_json_name, summary);
  if (!quiet) {
    std::cout << "linearize: beta=" << format_double(model.beta)
              << " sigma_eq=" << format_double(model.sigma_eq) << '\n';
  }
  return {0, "ok"};
}

RunResult run_compare(const Json& config, const ScenarioConfig& cfg,
                      const fs::path& out_dir,
                      std::optional<std::uint64_t> seed_override, bool quiet) {
  if (cfg.composite) {
    throw ConfigError("hamiltonian: compare needs a single system");
  }
  const Json& section = require_field(config, "compare", "config");
  const double beta = get_double(section, "beta", "compare");
  const double scale =
      get_double_or(section, "perturbation_scale", "compare", 1e-3);
  const std::uint64_t seed = require_seed(section, "compare", seed_override);

  const LinearComparison res =
      compare_with_linearized(cfg.model.hamiltonian, beta, scale, seed,
                              cfg.model.sigma_policy, cfg.integrator,
                              cfg.model.units);
  if (res.trajectory.status == TrajectoryStatus::failed) {
    return {3, "integration failed: " + res.trajectory.message};
  }

  std::ostringstream rates;
  rates << "mu,nu,fitted,analytic,rel_error\n";
  for (Eigen::Index mu = 0; mu < res.fitted_rates.rows(); ++mu) {
    for (Eigen::Index nu = 0; nu < res.fitted_rates.cols(); ++nu) {
      const double f = res.fitted_rates(mu, nu);
      if (!std::isfinite(f)) continue;
      const double a = res.analytic_rates(mu, nu);
      rates << mu + 1 << ',' << nu + 1 << ',' << format_double(f) << ','
            << format_double(a) << ',' << format_double(std::abs(f - a) / a)
            << '\n';
    }
  }
  write_text(out_dir / "rates_compare.csv", rates.str());

  std::ostringstream overlay;
  overlay << "t,deviation_measured,deviation_linear,max_element_difference\n";
  const Matrix delta0 = res.deviations.front();
  for (std::size_t k = 0; k < res.times.size(); ++k) {
    const Matrix lin = linear_propagate(delta0, res.times[k], res.linear_model);
    overlay << format_double(res.times[k]) << ','
            << format_double(res.deviations[k].norm()) << ','
            << format_double(lin.norm()) << ','
            << format_double(
                   (res.deviations[k] - lin).cwiseAbs().maxCoeff())
            << '\n';
  }
  write_text(out_dir / "overlay.csv", overlay.str());

  Json summary;
  summary["subcommand"] = "compare";
  summary["beta"] = res.linear_model.beta;
  summary["sigma_eq"] = res.linear_model.sigma_eq;
  summary["max_rate_rel_error"] = res.max_rel_error;
  summary["population_rate"] = res.population_rate;
  summary["status"] = to_string(res.trajectory.status);
  write_json(out_dir / cfg.summary_json_name, summary);
  if (!quiet) {
    std::cout << "compare: max rate error="
              << format_double(res.max_rel_error) << '\n';
  }
  return {0, "ok"};
}

}  // namespace

RunResult run_scenario(const std::string& subcommand, const Json& config,
                       const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override,
                       bool quiet) {
  fs::path dir(out_dir.empty() ? "." : out_dir);
  try {
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    return {2, std::string("cannot create output directory: ") + e.what()};
  }

  try {
    if (subcommand == "evolve") {
      return run_evolve(parse_scenario(config, seed_override), dir, quiet);
    }
    if (subcommand == "contact") {
      return run_contact(parse_scenario(config, seed_override), dir, quiet);
    }
    if (subcommand == "equilibrium") {
      std::optional<ScenarioConfig> parsed;
      if (config.contains("hamiltonian")) {
        parsed = parse_scenario(config, seed_override, false);
      }
      return run_equilibrium(config, dir, seed_override, quiet,
                             parsed ? &*parsed : nullptr);
    }
    if (subcommand == "linearize") {
      return run_linearize(config, parse_scenario(config, seed_override, false),
                           dir, seed_override, quiet);
    }
    if (subcommand == "compare") {
      return run_compare(config, parse_scenario(config, seed_override, false),
                         dir, seed_override, quiet);
    }
    return {2, "unknown subcommand '" + subcommand + "'"};
  } catch (const ConfigError& e) {
    return {2, e.what()};
  } catch (const Error& e) {
    return {3, e.what()};
  } catch (const Json::exception& e) {
    return {2, std::string("config: ") + e.what()};
  }
}

}  // namespace mepq
