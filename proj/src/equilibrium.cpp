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

#include "mepq/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mepq/dynamics.hpp"

namespace mepq {

namespace {

// max_nu (ln g_nu - beta E_nu) shift for stable exponentials.
double weight_shift(const SupportSpectrum& s, double beta) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.energies.size(); ++i) {
    const double g = s.multiplicities.empty() ? 1.0 : s.multiplicities[i];
    m = std::max(m, std::log(g) - beta * s.energies[i]);
  }
  return m;
}

}  // namespace

void SupportSpectrum::validate() const {
  if (energies.empty()) throw DomainError("support spectrum is empty");
  for (std::size_t i = 1; i < energies.size(); ++i) {
    if (!(energies[i] > energies[i - 1])) {
      throw DomainError("support energies must be strictly increasing");
    }
  }
  if (!multiplicities.empty()) {
    if (multiplicities.size() != energies.size()) {
      throw DimensionError("multiplicities do not match energies");
    }
    for (int g : multiplicities) {
      if (g < 1) throw DomainError("multiplicities must be positive");
    }
  }
}

int SupportSpectrum::total_states() const {
  if (multiplicities.empty()) return static_cast<int>(energies.size());
  int n = 0;
  for (int g : multiplicities) n += g;
  return n;
}

double SupportSpectrum::mean_energy() const {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const double g = multiplicities.empty() ? 1.0 : multiplicities[i];
    num += g * energies[i];
    den += g;
  }
  return num / den;
}

double SupportSpectrum::thermal_energy(double beta) const {
  const double shift = weight_shift(*this, beta);
  double z = 0.0, ez = 0.0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const double g = multiplicities.empty() ? 1.0 : multiplicities[i];
    const double w = std::exp(std::log(g) - beta * energies[i] - shift);
    z += w;
    ez += w * energies[i];
  }
  return ez / z;
}

double SupportSpectrum::log_partition(double beta) const {
  const double shift = weight_shift(*this, beta);
  double z = 0.0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const double g = multiplicities.empty() ? 1.0 : multiplicities[i];
    z += std::exp(std::log(g) - beta * energies[i] - shift);
  }
  return shift + std::log(z);
}

GibbsSolution gibbs_at_beta(const SupportSpectrum& spectrum, double beta) {
  spectrum.validate();
  GibbsSolution out;
  out.beta = beta;
  out.logZ = spectrum.log_partition(beta);
  out.probabilities.resize(spectrum.energies.size());
  for (std::size_t i = 0; i < spectrum.energies.size(); ++i) {
    const double g =
        spectrum.multiplicities.empty() ? 1.0 : spectrum.multiplicities[i];
    out.probabilities[i] =
        std::exp(std::log(g) - beta * spectrum.energies[i] - out.logZ);
  }
  return out;
}

SupportSpectrum support_from_energies(const RealVector& energies,
                                      double merge_tol) {
  if (energies.size() == 0) throw DomainError("empty energy list");
  RealVector sorted = energies;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double gap =
      merge_tol * std::max(sorted[sorted.size() - 1] - sorted[0], 1e-300);
  SupportSpectrum s;
  s.energies.push_back(sorted[0]);
  s.multiplicities.push_back(1);
  for (Eigen::Index i = 1; i < sorted.size(); ++i) {
    if (sorted[i] - s.energies.back() <= gap) {
      ++s.multiplicities.back();
    } else {
      s.energies.push_back(sorted[i]);
      s.multiplicities.push_back(1);
    }
  }
  return s;
}

GibbsSolution solve_beta(const SupportSpectrum& spectrum, double energy,
                         double tol) {
  spectrum.validate();
  if (!(tol > 0.0)) throw DomainError("solve_beta: tol must be positive");
  const double lo = spectrum.min_energy();
  const double hi = spectrum.max_energy();
  const double range = spectrum.range();

  if (energy < lo || energy > hi) {
    throw DomainError("infeasible energy " + std::to_string(energy) +
                      " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  if (range == 0.0) return gibbs_at_beta(spectrum, 0.0);
  if (energy == lo || energy == hi) {
    // Endpoint targets: all weight on the extreme level, beta = +/- inf.
    GibbsSolution out;
    out.degenerate = true;
    out.beta = energy == lo ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
    out.probabilities.assign(spectrum.energies.size(), 0.0);
    const std::size_t idx = energy == lo ? 0 : spectrum.energies.size() - 1;
    out.probabilities[idx] = 1.0;
    const double g =
        spectrum.multiplicities.empty() ? 1.0 : spectrum.multiplicities[idx];
    // Formal limit of logZ with the divergent beta*E_extreme part removed.
    out.logZ = std::log(g);
    return out;
  }

  // The thermal energy is strictly decreasing in beta; expand a bracket
  // around beta = 0 until it straddles the target.
  double b_lo = -1.0 / range;  // low beta -> high energy
  double b_hi = 1.0 / range;
  for (int i = 0; i < 200 && spectrum.thermal_energy(b_lo) < energy; ++i) {
    b_lo *= 2.0;
  }
  for (int i = 0; i < 200 && spectrum.thermal_energy(b_hi) > energy; ++i) {
    b_hi *= 2.0;
  }
  if (spectrum.thermal_energy(b_lo) < energy ||
      spectrum.thermal_energy(b_hi) > energy) {
    throw DomainError("solve_beta: bracket expansion failed for energy " +
                      std::to_string(energy));
  }

  double mid = 0.0;
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (b_lo + b_hi);
    const double u = spectrum.thermal_energy(mid);
    if (std::abs(u - energy) <= tol * range) break;
    if (u > energy) {
      b_lo = mid;
    } else {
      b_hi = mid;
    }
    if (b_hi - b_lo <
        std::numeric_limits<double>::epsilon() *
            std::max(1.0, std::abs(b_lo) + std::abs(b_hi))) {
      break;
    }
  }
  return gibbs_at_beta(spectrum, mid);
}

bool negative_temperature_predicate(const SupportSpectrum& spectrum,
                                    double energy) {
  spectrum.validate();
  if (energy < spectrum.min_energy() || energy > spectrum.max_energy()) {
    throw DomainError("negative_temperature_predicate: infeasible energy");
  }
  return energy >= spectrum.mean_energy();
}

DensityMatrix gibbs_density(const HermitianOperator& h, double beta,
                            const std::optional<Matrix>& support_projector) {
  if (!std::isfinite(beta)) {
    throw DomainError("gibbs_density requires finite beta");
  }
  const auto eig = spectral_decompose(h);
  const Eigen::Index d = h.dim();
  std::vector<bool> keep(d, true);
  if (support_projector) {
    if (support_projector->rows() != d || support_projector->cols() != d) {
      throw DimensionError("support projector has wrong dimension");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      const Vector v = eig.eigenvectors.col(i);
      const double p = (v.adjoint() * (*support_projector) * v)(0, 0).real();
      keep[i] = p > 0.5;
    }
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (keep[i]) shift = std::max(shift, -beta * eig.eigenvalues[i]);
  }
  if (!std::isfinite(shift)) {
    throw DomainError("gibbs_density: empty support");
  }
  RealVector w = RealVector::Zero(d);
  double z = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!keep[i]) continue;
    w[i] = std::exp(-beta * eig.eigenvalues[i] - shift);
    z += w[i];
  }
  w /= z;
  return DensityMatrix::trusted(eig.eigenvectors * w.asDiagonal() *
                                eig.eigenvectors.adjoint());
}

StationarityReport stationarity_check(const DensityMatrix& rho,
                                      const HermitianOperator& h, double tol) {
  if (rho.dim() != h.dim()) {
    throw DimensionError("stationarity_check: dimension mismatch");
  }
  StationarityReport report;
  report.commutator_norm =
      (rho.matrix() * h.matrix() - h.matrix() * rho.matrix()).norm();
  ModelSpec model;
  model.hamiltonian = h;
  report.rhs_norm = rhs_rho(rho, model).norm();
  report.stationary =
      report.commutator_norm <= tol && report.rhs_norm <= tol;
  if (!report.stationary) return report;

  // Least-squares fit of ln rho_nu = -2 zeta (E_nu - E) - S/kB over the
  // occupied eigenvectors.
  const auto eig = spectral_decompose(rho);
  const double cutoff = eig.support_cutoff();
  const double e_mean = average(h, rho);
  double sxx = 0.0, sx = 0.0, sy = 0.0, sxy = 0.0;
  int n = 0;
  std::vector<std::pair<double, double>> points;  // (E_nu - E, ln rho_nu)
  for (Eigen::Index i = 0; i < eig.dim(); ++i) {
    const double w = eig.eigenvalues[i];
    if (w <= cutoff) continue;
    const Vector v = eig.eigenvectors.col(i);
    const double e_nu = (v.adjoint() * h.matrix() * v)(0, 0).real() - e_mean;
    const double y = std::log(w);
    points.emplace_back(e_nu, y);
    sx += e_nu;
    sy += y;
    sxx += e_nu * e_nu;
    sxy += e_nu * y;
    ++n;
  }
  if (n == 0) return report;
  const double det = n * sxx - sx * sx;
  double slope = 0.0, intercept = sy / n;
  if (std::abs(det) > 1e-14 * std::max(1.0, sxx) * n) {
    slope = (n * sxy - sx * sy) / det;
    intercept = (sy - slope * sx) / n;
  }
  report.zeta_eq = -0.5 * slope;
  report.entropy_eq = -intercept;
  double worst = 0.0;
  for (const auto& [x, y] : points) {
    worst = std::max(worst, std::abs(y - (slope * x + intercept)));
  }
  report.max_log_residual = worst;
  return report;
}

std::vector<EigenvalueFlowEntry> eigenvalue_flow(
    const SpectralDecomposition& rho_eig, const HermitianOperator& h,
    const MultiplierSet& multipliers) {
  if (rho_eig.dim() != h.dim()) {
    throw DimensionError("eigenvalue_flow: dimension mismatch");
  }
  const double cutoff = rho_eig.support_cutoff();
  std::vector<EigenvalueFlowEntry> out(rho_eig.dim());
  for (Eigen::Index i = 0; i < rho_eig.dim(); ++i) {
    const double w = rho_eig.eigenvalues[i];
    const Vector v = rho_eig.eigenvectors.col(i);
    const double h_nu = (v.adjoint() * h.matrix() * v)(0, 0).real();
    // alpha_nu = 2 zeta Tr[P_nu (H - E)] + S/kB = 2 zeta h_nu + xi.
    const double alpha = 2.0 * multipliers.zeta * h_nu + multipliers.xi;
    EigenvalueFlowEntry e;
    e.occupation = w;
    e.alpha = alpha;
    e.rate = w > cutoff
                 ? -multipliers.sigma * (w * std::log(w) + alpha * w)
                 : 0.0;
    out[i] = e;
  }
  return out;
}

}  // namespace mepq
