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

#include "mepq/functionals.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Eigenvalues>

namespace mepq {

namespace {

constexpr double kOrthogonalityTol = 1e-8;

// Traces shared by the von Neumann multiplier formulas, all normalized by
// Tr(rho): energy, variance, s = Tr(rho ln rho)/Tr(rho) and
// b = Tr[(H - E) rho ln rho]/Tr(rho).
struct VnTraces {
  double tr = 1.0;
  double energy = 0.0;
  double variance = 0.0;
  double s = 0.0;
  double b = 0.0;
};

VnTraces vn_traces(const DensityMatrix& rho, const SpectralDecomposition& eig,
                   const Matrix& h) {
  if (eig.eigenvalues.minCoeff() < -kPositivityHardTol) {
    throw PositivityError("state eigenvalue " +
                          std::to_string(eig.eigenvalues.minCoeff()) +
                          " below -1e-8");
  }
  VnTraces out;
  out.tr = rho.trace();
  if (!(out.tr > 0.0)) throw DomainError("state has nonpositive trace");
  out.energy = trace_product(h, rho.matrix()).real() / out.tr;
  out.variance =
      trace_product(h, h * rho.matrix()).real() / out.tr - out.energy * out.energy;
  const Matrix rlnr =
      eig.apply_on_support([](double w) { return w * std::log(w); });
  const double tr_rlnr = rlnr.trace().real();
  out.s = tr_rlnr / out.tr;
  out.b = (trace_product(h, rlnr).real() - out.energy * tr_rlnr) / out.tr;
  return out;
}

double condition_number(const RealMatrix& sym) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(sym);
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

RealMatrix drop_index(const RealMatrix& m, Eigen::Index k) {
  RealMatrix out(m.rows() - 1, m.cols() - 1);
  for (Eigen::Index i = 0, oi = 0; i < m.rows(); ++i) {
    if (i == k) continue;
    for (Eigen::Index j = 0, oj = 0; j < m.cols(); ++j) {
      if (j == k) continue;
      out(oi, oj) = m(i, j);
      ++oj;
    }
    ++oi;
  }
  return out;
}

// Names the operator whose removal best restores conditioning.
std::string find_offender(const RealMatrix& cov) {
  const Eigen::Index n = cov.rows();
  double best_cond = std::numeric_limits<double>::infinity();
  Eigen::Index best = -1;
  for (Eigen::Index j = n - 1; j >= 0; --j) {  // prefer naming a constraint
    if (n == 1) break;
    const double c = condition_number(drop_index(cov, j));
    if (c < best_cond) {
      best_cond = c;
      best = j;
    }
  }
  if (best < 0) return "the full set";
  if (best == 0) return "the hamiltonian";
  return "constraint " + std::to_string(best);
}

}  // namespace

SigmaPolicy SigmaPolicy::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw DomainError("sigma policy: constant must be finite and >= 0");
  }
  return SigmaPolicy("constant", value, nullptr);
}

SigmaPolicy SigmaPolicy::callback(std::string name, Callback fn) {
  if (!fn) throw DomainError("sigma policy: empty callback");
  return SigmaPolicy(std::move(name), 0.0, std::move(fn));
}

double SigmaPolicy::evaluate(const DensityMatrix& rho,
                             const HermitianOperator& h, double energy) const {
  if (!fn_) return value_;
  const double v = fn_(rho, h, energy);
  if (!std::isfinite(v) || v < 0.0) {
    throw DomainError("sigma policy '" + name_ +
                      "' returned an inadmissible value");
  }
  return v;
}

void ConstraintSet::validate(Eigen::Index dim) const {
  for (std::size_t j = 0; j < operators.size(); ++j) {
    if (operators[j].dim() != dim) {
      throw DimensionError("constraint " + std::to_string(j + 1) +
                           " has dimension " +
                           std::to_string(operators[j].dim()) + ", expected " +
                           std::to_string(dim));
    }
  }
  if (!conserved_averages.empty() &&
      conserved_averages.size() != operators.size()) {
    throw DimensionError("constraint averages do not match operators");
  }
}

double ConstraintSet::commutation_defect(const HermitianOperator& h) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < operators.size(); ++j) {
    worst = std::max(worst, commutator(operators[j], h).norm());
    for (std::size_t l = j + 1; l < operators.size(); ++l) {
      worst = std::max(worst, commutator(operators[j], operators[l]).norm());
    }
  }
  return worst;
}

bool ConstraintSet::invariant_grade(const HermitianOperator& h,
                                    double tol) const {
  return commutation_defect(h) <= tol;
}

EntropyModel EntropyModel::von_neumann() {
  return EntropyModel(Kind::von_neumann, 1.0, "von_neumann", nullptr, nullptr);
}

EntropyModel EntropyModel::tsallis(double q) {
  if (q == 1.0 || !std::isfinite(q)) {
    throw DomainError("tsallis entropy requires finite q != 1");
  }
  return EntropyModel(Kind::tsallis, q, "tsallis", nullptr, nullptr);
}

EntropyModel EntropyModel::custom(std::string name, EntropyFn entropy,
                                  GradientFn gradient) {
  if (!entropy || !gradient) {
    throw DomainError("custom entropy model needs both callbacks");
  }
  return EntropyModel(Kind::custom, 1.0, std::move(name), std::move(entropy),
                      std::move(gradient));
}

double EntropyModel::entropy(const DensityMatrix& rho,
                             const SpectralDecomposition& eig) const {
  switch (kind_) {
    case Kind::von_neumann: {
      const double cutoff = eig.support_cutoff();
      double s = 0.0;
      for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        const double w = eig.eigenvalues[i];
        if (w > cutoff) s -= w * std::log(w);
      }
      return s;
    }
    case Kind::tsallis: {
      const double cutoff = eig.support_cutoff();
      double tr = 0.0, trq = 0.0;
      for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        const double w = eig.eigenvalues[i];
        tr += w;
        if (w > cutoff) {
          trq += std::pow(w, q_);
        } else if (q_ <= 0.0) {
          throw DomainError("tsallis: q <= 0 requires a full-rank state");
        }
      }
      return (tr - trq) / (q_ - 1.0);
    }
    case Kind::custom:
      return entropy_(rho, eig);
  }
  throw Error("unreachable entropy kind");
}

Matrix EntropyModel::gradient(const DensityMatrix& rho,
                              const SpectralDecomposition& eig) const {
  switch (kind_) {
    case Kind::von_neumann:
      return eig.apply_on_support([](double w) { return -std::log(w) - 1.0; });
    case Kind::tsallis: {
      const double cutoff = eig.support_cutoff();
      if (q_ <= 0.0 && eig.eigenvalues.minCoeff() <= cutoff) {
        throw DomainError("tsallis: q <= 0 requires a full-rank state");
      }
      const double q = q_;
      return eig.apply_on_support([q](double w) {
        return (1.0 - q * std::pow(w, q - 1.0)) / (q - 1.0);
      });
    }
    case Kind::custom: {
      Matrix g = gradient_(rho, eig);
      if (g.rows() != rho.dim() || g.cols() != rho.dim()) {
        throw DimensionError("custom entropy gradient has wrong shape");
      }
      const double asym = (g - g.adjoint()).cwiseAbs().maxCoeff();
      if (!(asym < 1e-10)) {
        throw HermiticityError("custom entropy gradient is not hermitian");
      }
      return g;
    }
  }
  throw Error("unreachable entropy kind");
}

double von_neumann_entropy(const DensityMatrix& rho, const UnitsConfig& units) {
  units.validate();
  const auto eig = spectral_decompose(rho);
  if (eig.eigenvalues.minCoeff() < -kPositivityHardTol) {
    throw PositivityError("entropy: eigenvalue below -1e-8");
  }
  return units.kB * EntropyModel::von_neumann().entropy(rho, eig);
}

double energy_variance(const DensityMatrix& rho, const HermitianOperator& h) {
  if (rho.dim() != h.dim()) {
    throw DimensionError("energy_variance: dimension mismatch");
  }
  const double tr = rho.trace();
  if (!(tr > 0.0)) throw DomainError("energy_variance: nonpositive trace");
  const double e = trace_product(h.matrix(), rho.matrix()).real() / tr;
  return trace_product(h.matrix(), h.matrix() * rho.matrix()).real() / tr -
         e * e;
}

double variance_floor_from_range(double range) {
  return kVarianceFloorRel * range * range;
}

double variance_floor(const HermitianOperator& h) {
  return variance_floor_from_range(spectral_range(h));
}

double zeta(const DensityMatrix& rho, const HermitianOperator& h) {
  if (rho.dim() != h.dim()) throw DimensionError("zeta: dimension mismatch");
  const auto eig = spectral_decompose(rho);
  const auto t = vn_traces(rho, eig, h.matrix());
  if (t.variance <= variance_floor(h)) return 0.0;
  return -0.5 * t.b / t.variance;
}

double xi(const DensityMatrix& rho, const HermitianOperator& h,
          double zeta_value) {
  if (rho.dim() != h.dim()) throw DimensionError("xi: dimension mismatch");
  const auto eig = spectral_decompose(rho);
  const auto t = vn_traces(rho, eig, h.matrix());
  return -t.s - 2.0 * zeta_value * t.energy;
}

double entropy_production(const StateOperator& gamma,
                          const HermitianOperator& h,
                          const MultiplierSet& multipliers,
                          const ConstraintSet& constraints,
                          const UnitsConfig& units) {
  units.validate();
  if (gamma.dim() != h.dim()) {
    throw DimensionError("entropy_production: dimension mismatch");
  }
  constraints.validate(gamma.dim());
  if (multipliers.eta.size() != constraints.size()) {
    throw DimensionError("entropy_production: eta does not match constraints");
  }
  const DensityMatrix rho = density_from_state(gamma);
  const auto eig = spectral_decompose(rho);
  if (eig.eigenvalues.minCoeff() < -kPositivityHardTol) {
    throw PositivityError("entropy_production: state not positive");
  }
  const Matrix lnrho = eig.apply_on_support([](double w) { return std::log(w); });

  Matrix theta = lnrho * gamma.matrix() +
                 2.0 * multipliers.zeta * (h.matrix() * gamma.matrix()) +
                 multipliers.xi * gamma.matrix();
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    theta += 2.0 * multipliers.eta[j] *
             (constraints.operators[j].matrix() * gamma.matrix());
  }

  const Complex g_theta =
      (gamma.matrix().conjugate().cwiseProduct(theta)).sum();
  const Matrix hg = h.matrix() * gamma.matrix();
  const Complex gh_theta = (hg.conjugate().cwiseProduct(theta)).sum();
  const double h_defect =
      constraints.empty() ? std::abs(gh_theta) : std::abs(gh_theta.real());
  if (std::abs(g_theta) > kOrthogonalityTol || h_defect > kOrthogonalityTol) {
    throw ConsistencyError(
        "entropy_production: orthogonality violated, (gamma|theta) = " +
        std::to_string(std::abs(g_theta)) + ", (gamma|H|theta) = " +
        std::to_string(h_defect));
  }
  return units.kB * multipliers.sigma * theta.squaredNorm();
}

MultiplierSet lagrange_solve(const DensityMatrix& rho,
                             const HermitianOperator& h,
                             const ConstraintSet& constraints, double sigma,
                             const UnitsConfig& units) {
  units.validate();
  if (rho.dim() != h.dim()) {
    throw DimensionError("lagrange_solve: dimension mismatch");
  }
  constraints.validate(rho.dim());
  if (!(sigma >= 0.0)) throw DomainError("lagrange_solve: sigma must be >= 0");

  const auto eig = spectral_decompose(rho);
  const auto t = vn_traces(rho, eig, h.matrix());

  if (constraints.empty()) {
    MultiplierSet m;
    m.sigma = sigma;
    m.zeta = t.variance <= variance_floor(h) ? 0.0 : -0.5 * t.b / t.variance;
    m.xi = -t.s - 2.0 * m.zeta * t.energy;
    return m;
  }

  const std::size_t n = constraints.size();
  const Matrix rlnr =
      eig.apply_on_support([](double w) { return w * std::log(w); });

  // Centered operators X_0 = H - E, X_j = C_j - <C_j>.
  std::vector<Matrix> x;
  x.reserve(n + 1);
  const Matrix id = Matrix::Identity(rho.dim(), rho.dim());
  x.push_back(h.matrix() - t.energy * id);
  std::vector<double> cavg(n);
  for (std::size_t j = 0; j < n; ++j) {
    cavg[j] =
        trace_product(constraints.operators[j].matrix(), rho.matrix()).real() /
        t.tr;
    x.push_back(constraints.operators[j].matrix() - cavg[j] * id);
  }

  RealMatrix cov(n + 1, n + 1);
  RealVector b(n + 1);
  std::vector<Matrix> xrho(n + 1);
  for (std::size_t a = 0; a <= n; ++a) xrho[a] = x[a] * rho.matrix();
  for (std::size_t a = 0; a <= n; ++a) {
    b[a] = trace_product(x[a], rlnr).real() / t.tr;
    for (std::size_t c = a; c <= n; ++c) {
      const double v = trace_product(x[a], xrho[c]).real() / t.tr;
      cov(a, c) = v;
      cov(c, a) = v;
    }
  }

  // Commutator contributions (i / hbar sigma) Tr([C_j, H] rho).
  for (std::size_t j = 1; j <= n; ++j) {
    const Complex comm =
        (trace_product(x[j], xrho[0]) - trace_product(x[0], xrho[j])) / t.tr;
    if (std::abs(comm) > 1e-13) {
      if (!(sigma > 0.0)) {
        throw DomainError(
            "lagrange_solve: sigma must be positive when constraint "
            "commutator terms are nonzero");
      }
      b[j] += (Complex(0.0, 1.0) / (units.hbar * sigma) * comm).real();
    }
  }

  const double cond = condition_number(cov);
  if (!(cond <= kMaxConditionNumber)) {
    throw DegenerateConstraintsError(
        "degenerate constraint covariance (condition number " +
        std::to_string(cond) + "); offending operator: " + find_offender(cov));
  }

  const RealVector u = cov.ldlt().solve(-0.5 * b);
  MultiplierSet m;
  m.sigma = sigma;
  m.zeta = u[0];
  m.eta.assign(u.data() + 1, u.data() + 1 + n);
  double xi_value = -t.s - 2.0 * m.zeta * t.energy;
  for (std::size_t j = 0; j < n; ++j) xi_value -= 2.0 * m.eta[j] * cavg[j];
  m.xi = xi_value;
  return m;
}

double tsallis_entropy(const DensityMatrix& rho, double q,
                       const UnitsConfig& units) {
  units.validate();
  const auto model = EntropyModel::tsallis(q);
  const auto eig = spectral_decompose(rho);
  if (eig.eigenvalues.minCoeff() < -kPositivityHardTol) {
    throw PositivityError("tsallis_entropy: state not positive");
  }
  return units.kB * model.entropy(rho, eig);
}

double tsallis_zeta(const DensityMatrix& rho, const HermitianOperator& h,
                    double q) {
  if (q == 1.0 || !std::isfinite(q)) {
    throw DomainError("tsallis_zeta requires finite q != 1");
  }
  if (rho.dim() != h.dim()) {
    throw DimensionError("tsallis_zeta: dimension mismatch");
  }
  const auto eig = spectral_decompose(rho);
  const auto t = vn_traces(rho, eig, h.matrix());
  if (q <= 0.0 && eig.eigenvalues.minCoeff() <= eig.support_cutoff()) {
    throw DomainError("tsallis: q <= 0 requires a full-rank state");
  }
  if (t.variance <= variance_floor(h)) return 0.0;
  const Matrix rho_q = eig.apply_on_support([q](double w) { return std::pow(w, q); });
  const double num =
      (trace_product(h.matrix(), rho_q).real() -
       t.energy * rho_q.trace().real()) /
      t.tr;
  return -0.5 * (q / (q - 1.0)) * num / t.variance;
}

MultiplierSet generalized_multipliers(const DensityMatrix& rho,
                                      const HermitianOperator& h_hat,
                                      const EntropyModel& model, double sigma) {
  if (rho.dim() != h_hat.dim()) {
    throw DimensionError("generalized_multipliers: dimension mismatch");
  }
  if (!(sigma >= 0.0)) throw DomainError("sigma must be >= 0");
  const auto eig = spectral_decompose(rho);
  if (eig.eigenvalues.minCoeff() < -kPositivityHardTol) {
    throw PositivityError("generalized_multipliers: state not positive");
  }
  const double tr = rho.trace();
  if (!(tr > 0.0)) throw DomainError("state has nonpositive trace");
  const Matrix g = model.gradient(rho, eig);
  const double e = trace_product(h_hat.matrix(), rho.matrix()).real() / tr;
  const double var =
      trace_product(h_hat.matrix(), h_hat.matrix() * rho.matrix()).real() / tr -
      e * e;
  const Matrix grho = g * rho.matrix();
  const double g_mean = grho.trace().real() / tr;
  MultiplierSet m;
  m.sigma = sigma;
  if (var <= variance_floor(h_hat)) {
    m.zeta = 0.0;
  } else {
    const double num =
        (trace_product(h_hat.matrix(), grho).real() - e * grho.trace().real()) /
        tr;
    m.zeta = 0.5 * num / var;
  }
  m.xi = g_mean - 2.0 * m.zeta * e;
  return m;
}

}  // namespace mepq
