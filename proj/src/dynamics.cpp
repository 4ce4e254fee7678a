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

#include "mepq/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include <unsupported/Eigen/KroneckerProduct>

namespace mepq {

namespace {

constexpr Complex kImag(0.0, 1.0);

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) pair on a list of complex matrix blocks.
// ---------------------------------------------------------------------------

using BlockState = std::vector<Matrix>;
using BlockRhs = std::function<void(const BlockState&, BlockState&)>;

constexpr std::array<std::array<double, 6>, 6> kStageCoef = {{
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656,
     0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
}};

constexpr std::array<double, 7> kErrorCoef = {
    71.0 / 57600, 0.0,           -71.0 / 16695, 71.0 / 1920,
    -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

double error_norm(const BlockState& err, const BlockState& y0,
                  const BlockState& y1, double atol, double rtol) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < err.size(); ++b) {
    const Complex* pe = err[b].data();
    const Complex* p0 = y0[b].data();
    const Complex* p1 = y1[b].data();
    for (Eigen::Index j = 0; j < err[b].size(); ++j) {
      const double scale =
          atol + rtol * std::max(std::abs(p0[j]), std::abs(p1[j]));
      const double r = std::abs(pe[j]) / scale;
      sum += r * r;
      ++n;
    }
  }
  return std::sqrt(sum / static_cast<double>(n));
}

struct Stepper {
  BlockState y;
  double t = 0.0;
  double h = 1e-3;
  std::uint64_t steps_taken = 0;
  std::vector<double> raw_traces;  // Tr(rho_b) before the last renormalization

  void renormalize() {
    raw_traces.resize(y.size());
    for (std::size_t b = 0; b < y.size(); ++b) {
      const double tr = y[b].squaredNorm();
      raw_traces[b] = tr;
      y[b] /= std::sqrt(tr);
    }
  }
};

// Advances to exactly t_target; returns an error message on failure, in
// which case the stepper holds the last accepted state.
std::optional<std::string> advance_to(Stepper& s, double t_target,
                                      const BlockRhs& rhs,
                                      const IntegratorConfig& cfg) {
  const double tiny = 1e-12 * std::max(1.0, std::abs(t_target));
  std::vector<BlockState> k(7);
  BlockState work, y1, err;

  while (s.t < t_target - tiny) {
    if (s.steps_taken >= cfg.max_steps) {
      return "step budget exhausted at t = " + std::to_string(s.t);
    }
    const double h_min =
        std::max(1e-14, 64.0 * std::numeric_limits<double>::epsilon() *
                            std::max(1.0, std::abs(s.t)));
    double h_try = std::min({s.h, cfg.max_step, t_target - s.t});
    if (h_try < h_min) {
      return "step size underflow at t = " + std::to_string(s.t);
    }

    // Stage evaluations on trial states may overflow or leave the domain of
    // the right-hand side; both count as a rejected step. The first stage
    // sits on the accepted state, so its failures are genuine and propagate.
    rhs(s.y, k[0]);
    bool stage_failed = false;
    for (int stage = 1; stage < 7 && !stage_failed; ++stage) {
      work = s.y;
      for (int j = 0; j < stage; ++j) {
        const double a = kStageCoef[stage - 1][j];
        if (a == 0.0) continue;
        for (std::size_t b = 0; b < work.size(); ++b) {
          work[b] += (h_try * a) * k[j][b];
        }
      }
      if (stage == 6) y1 = work;  // the 5th order solution (b row == a7 row)
      try {
        rhs(work, k[stage]);
      } catch (const Error&) {
        stage_failed = true;
      }
    }

    double en = std::numeric_limits<double>::quiet_NaN();
    if (!stage_failed) {
      err.assign(s.y.size(), Matrix());
      for (std::size_t b = 0; b < s.y.size(); ++b) {
        Matrix e = Matrix::Zero(s.y[b].rows(), s.y[b].cols());
        for (int j = 0; j < 7; ++j) e += (h_try * kErrorCoef[j]) * k[j][b];
        err[b] = std::move(e);
      }
      en = error_norm(err, s.y, y1, cfg.abs_tol, cfg.rel_tol);
    }
    ++s.steps_taken;
    double factor = 0.2;
    if (std::isfinite(en) && en > 0.0) {
      factor = std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    } else if (en == 0.0) {
      factor = 5.0;
    }
    if (std::isfinite(en) && en <= 1.0) {
      s.t = (t_target - (s.t + h_try) < tiny) ? t_target : s.t + h_try;
      s.y = std::move(y1);
      s.renormalize();
      s.h = std::min(cfg.max_step, h_try * factor);
    } else {
      s.h = h_try * factor;
    }
  }
  s.t = t_target;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Single-system engine
// ---------------------------------------------------------------------------

// Scalars produced by one right-hand-side evaluation.
struct EvalData {
  double trace = 1.0;
  double energy = 0.0;   // plain <H>
  double sigma = 0.0;
  double zeta = 0.0;
  double xi = 0.0;
  double entropy = 0.0;  // model entropy / kB
  std::vector<double> eta;
  std::vector<double> constraint_averages;
};

class SingleEngine {
 public:
  SingleEngine(const ModelSpec& model, bool interaction_picture)
      : model_(model),
        interaction_(interaction_picture),
        generalized_(static_cast<bool>(model.generalized_energy)),
        von_neumann_(model.entropy_model.kind() ==
                     EntropyModel::Kind::von_neumann),
        var_floor_(variance_floor(model.hamiltonian)) {}

  // d gamma / dt. When `data` is non-null it also receives the multiplier
  // scalars and, when `theta` is non-null, the gradient vector whose
  // squared norm gives the entropy production.
  Matrix rhs(const Matrix& gamma, EvalData* data = nullptr,
             Matrix* theta = nullptr) const {
    const Matrix rho_m = gamma * gamma.adjoint();
    const DensityMatrix rho = DensityMatrix::trusted(rho_m);
    const auto eig = spectral_decompose(rho);
    const double tr = std::max(eig.eigenvalues.sum(),
                               std::numeric_limits<double>::min());

    const Matrix& h_plain = model_.hamiltonian.matrix();
    HermitianOperator h_hat_op =
        generalized_ ? model_.generalized_energy(rho) : model_.hamiltonian;
    if (h_hat_op.dim() != model_.hamiltonian.dim()) {
      throw DimensionError("generalized energy has wrong dimension");
    }
    const Matrix& h_hat = h_hat_op.matrix();

    const double e_plain = trace_product(h_plain, rho_m).real() / tr;
    const double e_hat =
        generalized_ ? trace_product(h_hat, rho_m).real() / tr : e_plain;

    const Matrix grad = model_.entropy_model.gradient(rho, eig);
    const Matrix grad_rho = grad * rho_m;
    const double g_mean = grad_rho.trace().real() / tr;

    const double sigma =
        model_.sigma_policy.is_constant()
            ? model_.sigma_policy.constant_value()
            : model_.sigma_policy.evaluate(rho, h_hat_op, e_hat);

    double zeta_v = 0.0;
    double xi_v = 0.0;
    std::vector<double> eta;
    std::vector<double> cavg;
    if (!model_.constraints.empty()) {
      const MultiplierSet m =
          lagrange_solve(rho, model_.hamiltonian, model_.constraints, sigma,
                         model_.units);
      zeta_v = m.zeta;
      xi_v = m.xi;
      eta = m.eta;
      cavg.resize(model_.constraints.size());
      for (std::size_t j = 0; j < cavg.size(); ++j) {
        cavg[j] = trace_product(model_.constraints.operators[j].matrix(),
                                rho_m)
                      .real() /
                  tr;
      }
    } else {
      const double var =
          trace_product(h_hat, h_hat * rho_m).real() / tr - e_hat * e_hat;
      const double floor =
          generalized_ ? variance_floor(h_hat_op) : var_floor_;
      if (var > floor) {
        const double num = (trace_product(h_hat, grad_rho).real() -
                            e_hat * grad_rho.trace().real()) /
                           tr;
        zeta_v = 0.5 * num / var;
      }
      xi_v = von_neumann_ ? (-g_mean - 1.0) - 2.0 * zeta_v * e_hat
                          : g_mean - 2.0 * zeta_v * e_hat;
    }

    // gamma_dot = -sigma [ -(1/2)(G - <G>) + zeta (H_hat - E)
    //                      + eta^j (C_j - <C_j>) ] gamma - (i/hbar) H_hat gamma
    const Matrix h_gamma = h_hat * gamma;
    Matrix drive = -0.5 * (grad * gamma) + (0.5 * g_mean) * gamma +
                   zeta_v * h_gamma - (zeta_v * e_hat) * gamma;
    for (std::size_t j = 0; j < eta.size(); ++j) {
      drive += eta[j] * (model_.constraints.operators[j].matrix() * gamma) -
               (eta[j] * cavg[j]) * gamma;
    }
    Matrix gamma_dot = -sigma * drive;
    if (!interaction_) {
      gamma_dot -= (kImag / model_.units.hbar) * h_gamma;
    }

    if (theta) *theta = 2.0 * drive;
    if (data) {
      data->trace = tr;
      data->energy = e_plain;
      data->sigma = sigma;
      data->zeta = zeta_v;
      data->xi = xi_v;
      data->eta = std::move(eta);
      data->constraint_averages = std::move(cavg);
      data->entropy = model_.entropy_model.entropy(rho, eig);
    }
    return gamma_dot;
  }

  SampleDiagnostics sample(const Matrix& gamma, double raw_trace,
                           DensityMatrix* state_out) const {
    EvalData data;
    Matrix theta;
    const Matrix gamma_dot = rhs(gamma, &data, &theta);
    const Matrix rho_m = gamma * gamma.adjoint();
    const Matrix rho_dot =
        gamma_dot * gamma.adjoint() + gamma * gamma_dot.adjoint();

    SampleDiagnostics d;
    d.trace = raw_trace;
    d.energy = data.energy;
    d.entropy = model_.units.kB * data.entropy;
    d.entropy_production =
        model_.units.kB * data.sigma * theta.squaredNorm();
    d.zeta = data.zeta;
    d.sigma = data.sigma;
    d.rhs_norm = rho_dot.norm();
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho_m);
    d.eigenvalues = es.eigenvalues().reverse();
    d.constraint_averages = data.constraint_averages;
    if (state_out) *state_out = DensityMatrix::trusted(rho_m);
    return d;
  }

 private:
  const ModelSpec& model_;
  bool interaction_;
  bool generalized_;
  bool von_neumann_;
  double var_floor_;
};

std::vector<double> sample_times(const IntegratorConfig& cfg) {
  std::vector<double> out;
  const double tiny = 1e-9 * cfg.record_every;
  for (std::uint64_t k = 1;; ++k) {
    const double t = static_cast<double>(k) * cfg.record_every;
    if (t >= cfg.t_end - tiny) break;
    out.push_back(t);
  }
  out.push_back(cfg.t_end);
  return out;
}

Trajectory run_single(const StateOperator& gamma0, const ModelSpec& model,
                      const IntegratorConfig& config, bool interaction) {
  model.validate();
  config.validate();
  if (gamma0.dim() != model.hamiltonian.dim()) {
    throw DimensionError("evolve: state and hamiltonian dimensions differ");
  }
  SingleEngine engine(model, interaction);
  const BlockRhs rhs_fn = [&engine](const BlockState& y, BlockState& dy) {
    dy.resize(1);
    dy[0] = engine.rhs(y[0]);
  };

  Stepper stepper;
  stepper.y = {gamma0.normalized().matrix()};
  stepper.h = std::min(config.initial_step, config.max_step);
  stepper.raw_traces = {1.0};

  Trajectory traj;
  auto record = [&](double t) {
    DensityMatrix state;
    SampleDiagnostics d =
        engine.sample(stepper.y[0], stepper.raw_traces[0], &state);
    traj.times.push_back(t);
    traj.states.push_back(std::move(state));
    traj.diagnostics.push_back(std::move(d));
  };
  record(0.0);

  int quiet_samples = 0;
  for (const double target : sample_times(config)) {
    if (auto failure = advance_to(stepper, target, rhs_fn, config)) {
      traj.status = TrajectoryStatus::failed;
      traj.message = *failure;
      if (stepper.t > traj.times.back() + 1e-15) record(stepper.t);
      return traj;
    }
    record(target);
    const auto& d = traj.diagnostics.back();
    quiet_samples =
        d.rhs_norm < kStationaryRel * d.sigma ? quiet_samples + 1 : 0;
    if (quiet_samples >= kStationarySamples) {
      traj.status = TrajectoryStatus::stationary;
      return traj;
    }
  }
  traj.status = TrajectoryStatus::completed;
  return traj;
}

// ---------------------------------------------------------------------------
// Composite engine (product-form factors of a noninteracting pair)
// ---------------------------------------------------------------------------

struct FactorData {
  Matrix rho_m;
  SpectralDecomposition eig;
  double tr = 1.0;
  double energy = 0.0;     // <H_i>
  double variance = 0.0;
  double b = 0.0;          // Tr[(H_i - E_i) rho ln rho]/tr
  double s_mean = 0.0;     // Tr(rho ln rho)/tr
  Matrix ln_rho;
};

class CompositeEngine {
 public:
  CompositeEngine(const CompositeSpec& spec)
      : spec_(spec),
        floor_1_(variance_floor(spec.h1)),
        floor_2_(variance_floor(spec.h2)),
        floor_joint_(variance_floor_from_range(spectral_range(spec.h1) +
                                               spectral_range(spec.h2))) {}

  struct Shared {
    double sigma1 = 0.0, sigma2 = 0.0;
    double zeta1 = 0.0, zeta2 = 0.0;
  };

  void factor_data(const Matrix& gamma, const Matrix& h, FactorData& f) const {
    f.rho_m = gamma * gamma.adjoint();
    f.eig = spectral_decompose(DensityMatrix::trusted(f.rho_m));
    if (f.eig.eigenvalues.minCoeff() < -kPositivityHardTol) {
      throw PositivityError("composite factor lost positivity");
    }
    f.tr = std::max(f.eig.eigenvalues.sum(),
                    std::numeric_limits<double>::min());
    f.energy = trace_product(h, f.rho_m).real() / f.tr;
    f.variance =
        trace_product(h, h * f.rho_m).real() / f.tr - f.energy * f.energy;
    f.ln_rho = f.eig.apply_on_support([](double w) { return std::log(w); });
    const Matrix rlnr = f.eig.apply_on_support(
        [](double w) { return w * std::log(w); });
    const double tr_rlnr = rlnr.trace().real();
    f.s_mean = tr_rlnr / f.tr;
    f.b = (trace_product(h, rlnr).real() - f.energy * tr_rlnr) / f.tr;
  }

  Shared multipliers(const FactorData& f1, const FactorData& f2) const {
    Shared s;
    switch (spec_.mode) {
      case CompositeMode::thermal_contact: {
        const double var = f1.variance + f2.variance;
        const double z =
            var > floor_joint_ ? -0.5 * (f1.b + f2.b) / var : 0.0;
        s.zeta1 = s.zeta2 = z;
        s.sigma1 = s.sigma2 = joint_sigma(f1, f2);
        break;
      }
      case CompositeMode::adiabatic:
        s.zeta1 = f1.variance > floor_1_ ? -0.5 * f1.b / f1.variance : 0.0;
        s.zeta2 = f2.variance > floor_2_ ? -0.5 * f2.b / f2.variance : 0.0;
        s.sigma1 = s.sigma2 = joint_sigma(f1, f2);
        break;
      case CompositeMode::isolated:
        s.zeta1 = f1.variance > floor_1_ ? -0.5 * f1.b / f1.variance : 0.0;
        s.zeta2 = f2.variance > floor_2_ ? -0.5 * f2.b / f2.variance : 0.0;
        s.sigma1 = factor_sigma(f1, spec_.h1);
        s.sigma2 = factor_sigma(f2, spec_.h2);
        break;
    }
    return s;
  }

  Matrix factor_rhs(const Matrix& gamma, const FactorData& f, const Matrix& h,
                    double sigma, double zeta_v) const {
    const Matrix h_gamma = h * gamma;
    Matrix drive = 0.5 * (f.ln_rho * gamma) - (0.5 * f.s_mean) * gamma +
                   zeta_v * h_gamma - (zeta_v * f.energy) * gamma;
    return -sigma * drive - (kImag / spec_.units.hbar) * h_gamma;
  }

  void rhs(const BlockState& y, BlockState& dy) const {
    FactorData f1, f2;
    factor_data(y[0], spec_.h1.matrix(), f1);
    factor_data(y[1], spec_.h2.matrix(), f2);
    const Shared s = multipliers(f1, f2);
    dy.resize(2);
    dy[0] = factor_rhs(y[0], f1, spec_.h1.matrix(), s.sigma1, s.zeta1);
    dy[1] = factor_rhs(y[1], f2, spec_.h2.matrix(), s.sigma2, s.zeta2);
  }

  double joint_sigma(const FactorData& f1, const FactorData& f2) const {
    if (spec_.sigma_policy.is_constant()) {
      return spec_.sigma_policy.constant_value();
    }
    const Matrix joint =
        Eigen::kroneckerProduct(f1.rho_m / f1.tr, f2.rho_m / f2.tr).eval();
    const Eigen::Index d1 = f1.rho_m.rows(), d2 = f2.rho_m.rows();
    const Matrix h_joint =
        Eigen::kroneckerProduct(spec_.h1.matrix(),
                                Matrix::Identity(d2, d2))
            .eval() +
        Eigen::kroneckerProduct(Matrix::Identity(d1, d1), spec_.h2.matrix())
            .eval();
    return spec_.sigma_policy.evaluate(DensityMatrix::trusted(joint),
                                       HermitianOperator(h_joint),
                                       f1.energy + f2.energy);
  }

  double factor_sigma(const FactorData& f, const HermitianOperator& h) const {
    if (spec_.sigma_policy.is_constant()) {
      return spec_.sigma_policy.constant_value();
    }
    return spec_.sigma_policy.evaluate(DensityMatrix::trusted(f.rho_m / f.tr),
                                       h, f.energy);
  }

  const CompositeSpec& spec_;
  double floor_1_, floor_2_, floor_joint_;
};

}  // namespace

// ---------------------------------------------------------------------------
// public surface
// ---------------------------------------------------------------------------

void ModelSpec::validate() const {
  units.validate();
  if (hamiltonian.dim() == 0) throw DimensionError("model has no hamiltonian");
  constraints.validate(hamiltonian.dim());
  if (!constraints.empty() &&
      entropy_model.kind() != EntropyModel::Kind::von_neumann) {
    throw DomainError(
        "constraints are only defined for the von Neumann entropy model");
  }
  if (generalized_energy && !constraints.empty()) {
    throw DomainError(
        "constraints and a generalized energy functional cannot be combined");
  }
}

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || rel_tol > 1e-2 || !(abs_tol > 0.0) ||
      abs_tol > 1e-2) {
    throw ConfigError("integrator tolerances must lie in (0, 1e-2]");
  }
  if (!(initial_step > 0.0) || !(max_step > 0.0)) {
    throw ConfigError("integrator steps must be positive");
  }
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (!(record_every > 0.0)) throw ConfigError("record_every must be positive");
  if (max_steps == 0) throw ConfigError("max_steps must be positive");
}

const char* to_string(TrajectoryStatus status) {
  switch (status) {
    case TrajectoryStatus::completed: return "completed";
    case TrajectoryStatus::stationary: return "stationary";
    case TrajectoryStatus::failed: return "failed";
  }
  return "unknown";
}

const char* to_string(CompositeMode mode) {
  switch (mode) {
    case CompositeMode::thermal_contact: return "thermal_contact";
    case CompositeMode::adiabatic: return "adiabatic";
    case CompositeMode::isolated: return "isolated";
  }
  return "unknown";
}

void CompositeSpec::validate() const {
  units.validate();
  if (h1.dim() == 0 || h2.dim() == 0) {
    throw DimensionError("composite factors need hamiltonians");
  }
}

Matrix rhs_gamma(const StateOperator& gamma, const ModelSpec& model) {
  model.validate();
  if (gamma.dim() != model.hamiltonian.dim()) {
    throw DimensionError("rhs_gamma: dimension mismatch");
  }
  SingleEngine engine(model, false);
  return engine.rhs(gamma.matrix());
}

Matrix rhs_rho(const DensityMatrix& rho, const ModelSpec& model) {
  model.validate();
  if (rho.dim() != model.hamiltonian.dim()) {
    throw DimensionError("rhs_rho: dimension mismatch");
  }
  if (model.generalized_energy) return rhs_generalized(rho, model);
  if (model.entropy_model.kind() == EntropyModel::Kind::tsallis) {
    return rhs_tsallis(rho, model);
  }
  const Matrix& h = model.hamiltonian.matrix();
  const double tr = rho.trace();
  const double energy = average(model.hamiltonian, rho);
  const double sigma =
      model.sigma_policy.evaluate(rho, model.hamiltonian, energy);
  const MultiplierSet m =
      lagrange_solve(rho, model.hamiltonian, model.constraints, sigma,
                     model.units);
  const auto eig = spectral_decompose(rho);
  const Matrix rlnr =
      eig.apply_on_support([](double w) { return w * std::log(w); });

  Matrix x = m.zeta * (h - energy * Matrix::Identity(rho.dim(), rho.dim()));
  for (std::size_t j = 0; j < model.constraints.size(); ++j) {
    const Matrix& c = model.constraints.operators[j].matrix();
    const double avg = trace_product(c, rho.matrix()).real() / tr;
    x += m.eta[j] * (c - avg * Matrix::Identity(rho.dim(), rho.dim()));
  }
  Matrix out = -sigma * (rlnr + x * rho.matrix() + rho.matrix() * x -
                         (rlnr.trace().real() / tr) * rho.matrix());
  out += (kImag / model.units.hbar) *
         (rho.matrix() * h - h * rho.matrix());
  return out;
}

Matrix rhs_interaction(const DensityMatrix& rho_bar, const ModelSpec& model) {
  model.validate();
  if (model.generalized_energy) {
    throw DomainError("the rotating frame requires a fixed hamiltonian");
  }
  const Matrix& h = model.hamiltonian.matrix();
  Matrix out = rhs_rho(rho_bar, model);
  out -= (kImag / model.units.hbar) *
         (rho_bar.matrix() * h - h * rho_bar.matrix());
  return out;
}

Matrix rhs_tsallis(const DensityMatrix& rho, const ModelSpec& model) {
  model.validate();
  if (model.entropy_model.kind() != EntropyModel::Kind::tsallis) {
    throw DomainError("rhs_tsallis requires a tsallis entropy model");
  }
  const double q = model.entropy_model.q();
  const Matrix& h = model.hamiltonian.matrix();
  const double tr = rho.trace();
  const double energy = average(model.hamiltonian, rho);
  const double sigma =
      model.sigma_policy.evaluate(rho, model.hamiltonian, energy);
  const double zq = tsallis_zeta(rho, model.hamiltonian, q);
  const auto eig = spectral_decompose(rho);
  const Matrix rho_q =
      eig.apply_on_support([q](double w) { return std::pow(w, q); });
  const Matrix h_centered =
      h - energy * Matrix::Identity(rho.dim(), rho.dim());
  const double c = q / (q - 1.0);
  Matrix out = -sigma * (c * rho_q +
                         zq * (h_centered * rho.matrix() +
                               rho.matrix() * h_centered) -
                         c * (rho_q.trace().real() / tr) * rho.matrix());
  out += (kImag / model.units.hbar) *
         (rho.matrix() * h - h * rho.matrix());
  return out;
}

Matrix rhs_generalized(const DensityMatrix& rho, const ModelSpec& model) {
  model.validate();
  if (!model.generalized_energy) {
    throw DomainError("rhs_generalized requires a generalized energy");
  }
  const HermitianOperator h_hat = model.generalized_energy(rho);
  if (h_hat.dim() != rho.dim()) {
    throw DimensionError("generalized energy has wrong dimension");
  }
  const double tr = rho.trace();
  const auto eig = spectral_decompose(rho);
  const Matrix grad = model.entropy_model.gradient(rho, eig);
  const double e_hat = trace_product(h_hat.matrix(), rho.matrix()).real() / tr;
  const double sigma = model.sigma_policy.evaluate(rho, h_hat, e_hat);
  const MultiplierSet m =
      generalized_multipliers(rho, h_hat, model.entropy_model, sigma);
  const Matrix h_centered =
      h_hat.matrix() - e_hat * Matrix::Identity(rho.dim(), rho.dim());
  const double g_mean = trace_product(grad, rho.matrix()).real() / tr;
  Matrix out =
      -sigma * (-0.5 * (grad * rho.matrix() + rho.matrix() * grad) +
                m.zeta * (h_centered * rho.matrix() +
                          rho.matrix() * h_centered) +
                g_mean * rho.matrix());
  out += (kImag / model.units.hbar) *
         (rho.matrix() * h_hat.matrix() - h_hat.matrix() * rho.matrix());
  return out;
}

Trajectory evolve(const StateOperator& gamma0, const ModelSpec& model,
                  const IntegratorConfig& config) {
  return run_single(gamma0, model, config, false);
}

Trajectory evolve(const DensityMatrix& rho0, const ModelSpec& model,
                  const IntegratorConfig& config) {
  return run_single(state_from_density(rho0), model, config, false);
}

Trajectory evolve_interaction(const DensityMatrix& rho0,
                              const ModelSpec& model,
                              const IntegratorConfig& config) {
  if (model.generalized_energy) {
    throw DomainError("the rotating frame requires a fixed hamiltonian");
  }
  return run_single(state_from_density(rho0), model, config, true);
}

std::pair<Matrix, Matrix> rhs_composite(const DensityMatrix& rho1,
                                        const DensityMatrix& rho2,
                                        const CompositeSpec& spec) {
  spec.validate();
  if (rho1.dim() != spec.h1.dim() || rho2.dim() != spec.h2.dim()) {
    throw DimensionError("rhs_composite: factor dimensions mismatch");
  }
  CompositeEngine engine(spec);
  FactorData f1, f2;
  engine.factor_data(state_from_density(rho1).matrix(), spec.h1.matrix(), f1);
  engine.factor_data(state_from_density(rho2).matrix(), spec.h2.matrix(), f2);
  const auto s = engine.multipliers(f1, f2);

  auto density_rhs = [&spec](const FactorData& f, const Matrix& h,
                             double sigma, double zeta_v) {
    const Matrix rlnr = f.eig.apply_on_support(
        [](double w) { return w * std::log(w); });
    const Matrix hc = h - f.energy * Matrix::Identity(h.rows(), h.cols());
    Matrix out = -sigma * (rlnr + zeta_v * (hc * f.rho_m + f.rho_m * hc) -
                           f.s_mean * f.rho_m);
    out += (kImag / spec.units.hbar) * (f.rho_m * h - h * f.rho_m);
    return out;
  };
  return {density_rhs(f1, spec.h1.matrix(), s.sigma1, s.zeta1),
          density_rhs(f2, spec.h2.matrix(), s.sigma2, s.zeta2)};
}

CompositeTrajectory evolve_composite(const DensityMatrix& rho1,
                                     const DensityMatrix& rho2,
                                     const CompositeSpec& spec,
                                     const IntegratorConfig& config) {
  spec.validate();
  config.validate();
  if (rho1.dim() != spec.h1.dim() || rho2.dim() != spec.h2.dim()) {
    throw DimensionError("evolve_composite: factor dimensions mismatch");
  }
  CompositeEngine engine(spec);
  const BlockRhs rhs_fn = [&engine](const BlockState& y, BlockState& dy) {
    engine.rhs(y, dy);
  };

  Stepper stepper;
  stepper.y = {state_from_density(rho1).normalized().matrix(),
               state_from_density(rho2).normalized().matrix()};
  stepper.h = std::min(config.initial_step, config.max_step);
  stepper.raw_traces = {1.0, 1.0};

  CompositeTrajectory traj;
  auto record = [&](double t) {
    FactorData f1, f2;
    engine.factor_data(stepper.y[0], spec.h1.matrix(), f1);
    engine.factor_data(stepper.y[1], spec.h2.matrix(), f2);
    const auto s = engine.multipliers(f1, f2);
    const Matrix d1 =
        engine.factor_rhs(stepper.y[0], f1, spec.h1.matrix(), s.sigma1,
                          s.zeta1);
    const Matrix d2 =
        engine.factor_rhs(stepper.y[1], f2, spec.h2.matrix(), s.sigma2,
                          s.zeta2);

    auto fill = [&](Trajectory& out, const Matrix& gamma, const FactorData& f,
                    const Matrix& gdot, double raw, double zeta_v,
                    double sigma_v) {
      const Matrix rho_dot = gdot * gamma.adjoint() + gamma * gdot.adjoint();
      SampleDiagnostics d;
      d.trace = raw;
      d.energy = f.energy;
      double s_vn = 0.0;
      const double cutoff = f.eig.support_cutoff();
      for (Eigen::Index i = 0; i < f.eig.dim(); ++i) {
        const double w = f.eig.eigenvalues[i];
        if (w > cutoff) s_vn -= w * std::log(w);
      }
      d.entropy = spec.units.kB * s_vn;
      d.entropy_production =
          -spec.units.kB * trace_product(rho_dot, f.ln_rho).real();
      d.zeta = zeta_v;
      d.sigma = sigma_v;
      d.rhs_norm = rho_dot.norm();
      d.eigenvalues = f.eig.eigenvalues.reverse();
      out.times.push_back(t);
      out.states.push_back(DensityMatrix::trusted(f.rho_m));
      out.diagnostics.push_back(std::move(d));
    };
    fill(traj.factor1, stepper.y[0], f1, d1, stepper.raw_traces[0], s.zeta1,
         s.sigma1);
    fill(traj.factor2, stepper.y[1], f2, d2, stepper.raw_traces[1], s.zeta2,
         s.sigma2);
    traj.zeta_shared.push_back(s.zeta1);
    traj.total_energy.push_back(f1.energy + f2.energy);
    traj.total_entropy.push_back(traj.factor1.diagnostics.back().entropy +
                                 traj.factor2.diagnostics.back().entropy);
  };
  record(0.0);

  int quiet_samples = 0;
  for (const double target : sample_times(config)) {
    if (auto failure = advance_to(stepper, target, rhs_fn, config)) {
      traj.status = TrajectoryStatus::failed;
      traj.message = *failure;
      if (stepper.t > traj.factor1.times.back() + 1e-15) record(stepper.t);
      traj.factor1.status = traj.factor2.status = traj.status;
      return traj;
    }
    record(target);
    const double quiet_scale =
        kStationaryRel * std::max(traj.factor1.diagnostics.back().sigma,
                                  traj.factor2.diagnostics.back().sigma);
    const double rn = std::max(traj.factor1.diagnostics.back().rhs_norm,
                               traj.factor2.diagnostics.back().rhs_norm);
    quiet_samples = rn < quiet_scale ? quiet_samples + 1 : 0;
    if (quiet_samples >= kStationarySamples) {
      traj.status = TrajectoryStatus::stationary;
      break;
    }
  }
  traj.factor1.status = traj.factor2.status = traj.status;
  return traj;
}

CovarianceReport covariance_check(const DensityMatrix& rho0,
                                  const ModelSpec& model, const Matrix& u,
                                  const IntegratorConfig& config) {
  model.validate();
  const Eigen::Index d = model.hamiltonian.dim();
  if (u.rows() != d || u.cols() != d || rho0.dim() != d) {
    throw DimensionError("covariance_check: dimension mismatch");
  }
  const double unitary_defect =
      (u * u.adjoint() - Matrix::Identity(d, d)).norm();
  if (unitary_defect > 1e-10) {
    throw DomainError("covariance_check: U is not unitary (defect " +
                      std::to_string(unitary_defect) + ")");
  }
  const double comm_defect =
      (u * model.hamiltonian.matrix() - model.hamiltonian.matrix() * u).norm();
  if (comm_defect > 1e-10) {
    throw DomainError("covariance_check: U does not commute with H (defect " +
                      std::to_string(comm_defect) + ")");
  }

  const DensityMatrix transformed =
      DensityMatrix::trusted(u * rho0.matrix() * u.adjoint());
  const Trajectory direct = evolve(rho0, model, config);
  const Trajectory rotated = evolve(transformed, model, config);

  CovarianceReport report;
  report.samples = std::min(direct.states.size(), rotated.states.size());
  for (std::size_t k = 0; k < report.samples; ++k) {
    const DensityMatrix mapped = DensityMatrix::trusted(
        u * direct.states[k].matrix() * u.adjoint());
    report.max_trace_distance = std::max(
        report.max_trace_distance, trace_distance(rotated.states[k], mapped));
  }
  return report;
}

}  // namespace mepq
