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

#include "mepq/linearized.hpp"

#include <cmath>
#include <limits>

#include "mepq/equilibrium.hpp"

namespace mepq {

void LinearizedModel::validate() const {
  units.validate();
  if (!(sigma_eq > 0.0)) throw DomainError("linearized: sigma_eq must be > 0");
  if (energies.size() < 1) throw DimensionError("linearized: empty spectrum");
  if (!std::isfinite(beta)) throw DomainError("linearized: beta must be finite");
}

LinearizedModel make_linearized(const HermitianOperator& h, double beta,
                                const SigmaPolicy& sigma,
                                const UnitsConfig& units) {
  LinearizedModel model;
  model.beta = beta;
  model.units = units;
  const auto eig = spectral_decompose(h);
  model.energies = eig.eigenvalues;
  const DensityMatrix rho_eq = gibbs_density(h, beta);
  model.sigma_eq = sigma.evaluate(rho_eq, h, average(h, rho_eq));
  model.validate();
  return model;
}

double xcothx(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-3) {
    const double x2 = x * x;
    return 1.0 + x2 / 3.0 - x2 * x2 / 45.0;
  }
  return x / std::tanh(x);
}

DecayRate decay_rate(Eigen::Index mu, Eigen::Index nu,
                     const LinearizedModel& model) {
  model.validate();
  if (mu < 0 || nu < 0 || mu >= model.dim() || nu >= model.dim()) {
    throw DimensionError("decay_rate: index out of range");
  }
  const double gap = model.energies[mu] - model.energies[nu];
  DecayRate r;
  r.lambda = model.sigma_eq * xcothx(0.5 * model.beta * gap);
  r.gamma_excess = r.lambda - model.sigma_eq;
  return r;
}

RealMatrix rate_matrix(const LinearizedModel& model) {
  model.validate();
  const Eigen::Index d = model.dim();
  RealMatrix rates(d, d);
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    for (Eigen::Index nu = 0; nu < d; ++nu) {
      rates(mu, nu) = model.sigma_eq *
                      xcothx(0.5 * model.beta *
                             (model.energies[mu] - model.energies[nu]));
    }
  }
  return rates;
}

Matrix linear_propagate(const Matrix& delta0, double t,
                        const LinearizedModel& model) {
  model.validate();
  const Eigen::Index d = model.dim();
  if (delta0.rows() != d || delta0.cols() != d) {
    throw DimensionError("linear_propagate: deviation has wrong shape");
  }
  const double tr = delta0.trace().real();
  if (std::abs(tr) > 1e-10) {
    throw DomainError("linear_propagate: Tr(delta0) = " + std::to_string(tr) +
                      " violates the traceless requirement");
  }
  double htr = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    htr += model.energies[i] * delta0(i, i).real();
  }
  if (std::abs(htr) > 1e-10) {
    throw DomainError("linear_propagate: Tr(H delta0) = " +
                      std::to_string(htr) +
                      " violates the energy restriction");
  }
  Matrix out(d, d);
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    for (Eigen::Index nu = 0; nu < d; ++nu) {
      const double lambda =
          model.sigma_eq * xcothx(0.5 * model.beta *
                                  (model.energies[mu] - model.energies[nu]));
      out(mu, nu) = std::exp(-lambda * t) * delta0(mu, nu);
    }
  }
  return out;
}

double commuting_observable_decay(const Matrix& observable,
                                  const Matrix& delta0, double t,
                                  const LinearizedModel& model) {
  model.validate();
  const Eigen::Index d = model.dim();
  if (observable.rows() != d || observable.cols() != d || delta0.rows() != d ||
      delta0.cols() != d) {
    throw DimensionError("commuting_observable_decay: shape mismatch");
  }
  double defect = 0.0;
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    for (Eigen::Index nu = 0; nu < d; ++nu) {
      defect += std::norm(observable(mu, nu) *
                          (model.energies[mu] - model.energies[nu]));
    }
  }
  if (std::sqrt(defect) > 1e-10) {
    throw DomainError(
        "commuting_observable_decay: observable does not commute with H "
        "(||[H, O]|| = " +
        std::to_string(std::sqrt(defect)) + ")");
  }
  const double initial = trace_product(observable, delta0).real();
  return std::exp(-model.sigma_eq * t) * initial;
}

TwoLevelRates two_level_rates(const LinearizedModel& model) {
  model.validate();
  if (model.dim() != 2) {
    throw DimensionError("two_level_rates requires a two-level spectrum");
  }
  SupportSpectrum s;
  s.energies = {model.energies[0], model.energies[1]};
  const GibbsSolution eq = gibbs_at_beta(s, model.beta);
  TwoLevelRates r;
  r.k12 = model.sigma_eq * eq.probabilities[1];
  r.k21 = model.sigma_eq * eq.probabilities[0];
  return r;
}

OscillatorDamping oscillator_damping(double omega,
                                     const LinearizedModel& model) {
  model.validate();
  if (!(omega > 0.0)) throw DomainError("oscillator_damping: omega must be > 0");
  OscillatorDamping out;
  out.gamma =
      model.sigma_eq * xcothx(0.5 * model.beta * model.units.hbar * omega);
  out.friction = 2.0 * out.gamma;
  out.stiffness = omega * omega + out.gamma * out.gamma;
  return out;
}

RealMatrix fit_elementwise_rates(const std::vector<double>& times,
                                 const std::vector<Matrix>& deviations,
                                 double magnitude_floor) {
  if (times.size() != deviations.size() || times.size() < 3) {
    throw DimensionError("fit_elementwise_rates: need >= 3 matched samples");
  }
  const Eigen::Index d = deviations.front().rows();
  RealMatrix rates =
      RealMatrix::Constant(d, d, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    for (Eigen::Index nu = 0; nu < d; ++nu) {
      double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
      int n = 0;
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double mag = std::abs(deviations[k](mu, nu));
        if (mag < magnitude_floor) continue;
        const double y = std::log(mag);
        sx += times[k];
        sy += y;
        sxx += times[k] * times[k];
        sxy += times[k] * y;
        ++n;
      }
      if (n < 3) continue;
      const double det = n * sxx - sx * sx;
      if (std::abs(det) < 1e-300) continue;
      rates(mu, nu) = -(n * sxy - sx * sy) / det;
    }
  }
  return rates;
}

}  // namespace mepq
