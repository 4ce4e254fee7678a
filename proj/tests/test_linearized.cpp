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

#include <doctest.h>

#include <cmath>

#include "mepq/equilibrium.hpp"
#include "mepq/linearized.hpp"
#include "mepq/random.hpp"
#include "test_support.hpp"

using namespace mepq;
using namespace mepq::test;

namespace {

LinearizedModel model_with(std::initializer_list<double> energies, double beta,
                           double sigma_eq) {
  LinearizedModel m;
  RealVector e(static_cast<Eigen::Index>(energies.size()));
  Eigen::Index i = 0;
  for (double x : energies) e[i++] = x;
  m.energies = e;
  m.beta = beta;
  m.sigma_eq = sigma_eq;
  return m;
}

}  // namespace

TEST_CASE("xcothx") {
  CHECK(xcothx(0.0) == doctest::Approx(1.0));
  // coth(1) = (e^2 + 1)/(e^2 - 1).
  const double coth1 =
      (std::exp(2.0) + 1.0) / (std::exp(2.0) - 1.0);
  CHECK(xcothx(1.0) == doctest::Approx(coth1).epsilon(1e-14));
  CHECK(xcothx(-1.0) == doctest::Approx(xcothx(1.0)).epsilon(1e-15));

  SUBCASE("series and closed form agree at the switchover") {
    for (const double x : {1e-3, -1e-3, 0.999e-3, 1.001e-3}) {
      const double series = 1.0 + x * x / 3.0 - x * x * x * x / 45.0;
      const double closed = x / std::tanh(x);
      CHECK(std::abs(series - closed) <= 1e-14);
      CHECK(std::abs(xcothx(x) - closed) <= 1e-14);
    }
  }
  SUBCASE("at least one, equality only at zero") {
    for (double x = -3.0; x <= 3.0; x += 0.17) {
      if (x == 0.0) continue;
      CHECK(xcothx(x) > 1.0);
    }
  }
}

TEST_CASE("decay_rate") {
  SUBCASE("equal energies relax at sigma_eq with no excess") {
    const auto m = model_with({0.5, 0.5, 1.5}, 2.0, 1.3);
    const DecayRate r = decay_rate(0, 1, m);
    CHECK(r.lambda == doctest::Approx(1.3).epsilon(1e-14));
    CHECK(r.gamma_excess == doctest::Approx(0.0));
  }
  SUBCASE("unit gap at beta = 2") {
    const auto m = model_with({0.0, 1.0}, 2.0, 1.0);
    const DecayRate r = decay_rate(1, 0, m);
    const double coth1 = 1.0 / std::tanh(1.0);
    CHECK(r.gamma_excess == doctest::Approx(coth1 - 1.0).epsilon(1e-14));
    CHECK(r.gamma_excess == doctest::Approx(0.3130352854993313).epsilon(1e-12));
  }
  SUBCASE("beta = 0 has no excess decoherence anywhere") {
    const auto m = model_with({0.0, 0.7, 2.9}, 0.0, 2.0);
    for (Eigen::Index a = 0; a < 3; ++a) {
      for (Eigen::Index b = 0; b < 3; ++b) {
        CHECK(decay_rate(a, b, m).gamma_excess == doctest::Approx(0.0));
      }
    }
  }
  SUBCASE("symmetry, positivity and monotone gap dependence") {
    const auto m = model_with({0.0, 0.3, 1.1, 2.6}, 1.7, 0.8);
    double previous = -1.0;
    for (Eigen::Index b = 1; b < 4; ++b) {
      const DecayRate r = decay_rate(0, b, m);
      const DecayRate rt = decay_rate(b, 0, m);
      CHECK(r.gamma_excess == doctest::Approx(rt.gamma_excess));
      CHECK(r.gamma_excess >= 0.0);
      CHECK(r.gamma_excess > previous);  // gaps from level 0 increase with b
      previous = r.gamma_excess;
    }
  }
}

// Helper giving an admissible 4x4 deviation for the model above.
static Matrix make_admissible(const LinearizedModel& m, unsigned seed) {
  CounterRng rng(seed);
  Matrix d = Matrix::Zero(m.dim(), m.dim());
  for (Eigen::Index i = 0; i < m.dim(); ++i) {
    for (Eigen::Index j = i + 1; j < m.dim(); ++j) {
      const Complex z = rng.complex_normal();
      d(i, j) = z;
      d(j, i) = std::conj(z);
    }
  }
  // Diagonal part: pattern orthogonal to both 1 and E.
  RealVector diag(m.dim());
  for (Eigen::Index i = 0; i < m.dim(); ++i) diag[i] = rng.normal_pair().first;
  const RealVector ones = RealVector::Ones(m.dim());
  const RealVector& e = m.energies;
  // Gram-Schmidt against {1, E}.
  RealVector e_perp = e - (e.dot(ones) / ones.dot(ones)) * ones;
  diag -= (diag.dot(ones) / ones.dot(ones)) * ones;
  diag -= (diag.dot(e_perp) / e_perp.dot(e_perp)) * e_perp;
  for (Eigen::Index i = 0; i < m.dim(); ++i) d(i, i) = diag[i];
  return d * (1e-3 / d.norm());
}

TEST_CASE("linear_propagate behavior") {
  const auto m = model_with({0.0, 1.0, 2.0, 3.2}, 2.0, 1.0);
  const Matrix d0 = make_admissible(m, 99);

  SUBCASE("t = 0 is the identity") {
    CHECK((linear_propagate(d0, 0.0, m) - d0).norm() < 1e-15);
  }
  SUBCASE("diagonal-only deviations decay at the common rate sigma_eq") {
    Matrix diag_dev = Matrix::Zero(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i) diag_dev(i, i) = d0(i, i);
    const Matrix out = linear_propagate(diag_dev, 0.7, m);
    const Matrix expected = std::exp(-m.sigma_eq * 0.7) * diag_dev;
    CHECK((out - expected).norm() <= 1e-14);
  }
  SUBCASE("single off-diagonal pair decays per the excess rate") {
    // Gap 1 at beta = 2, sigma_eq = 1: magnitude shrinks by e^{-coth(1)}.
    Matrix dev = Matrix::Zero(4, 4);
    dev(0, 1) = Complex(0.3, -0.2);
    dev(1, 0) = std::conj(dev(0, 1));
    const Matrix out = linear_propagate(dev, 1.0, m);
    const double factor = std::exp(-1.0 / std::tanh(1.0));
    CHECK(std::abs(out(0, 1)) ==
          doctest::Approx(std::abs(dev(0, 1)) * factor).epsilon(1e-12));
  }
  SUBCASE("precondition violations are rejected with the offending trace") {
    Matrix bad = d0;
    bad(0, 0) += 1e-3;  // breaks both traces
    CHECK_THROWS_AS(linear_propagate(bad, 1.0, m), DomainError);
  }
}

TEST_CASE("commuting_observable_decay") {
  const auto m = model_with({0.0, 1.0, 2.0}, 1.0, 1.0);
  Matrix obs = Matrix::Zero(3, 3);
  obs(0, 0) = 1.0;
  obs(1, 1) = -2.0;
  obs(2, 2) = 0.5;

  Matrix dev = Matrix::Zero(3, 3);
  dev(0, 0) = 0.4;
  dev(1, 1) = -0.1;
  dev(2, 2) = -0.3;

  SUBCASE("zero initial deviation average stays zero") {
    Matrix balanced = Matrix::Zero(3, 3);
    balanced(0, 0) = 1.0;
    balanced(1, 1) = 1.0;  // trace against obs with this dev: 0.4 - 0.2 ...
    Matrix dev0 = Matrix::Zero(3, 3);
    dev0(0, 0) = 2.0;
    dev0(1, 1) = 1.0;
    CHECK(commuting_observable_decay(balanced, dev0 - dev0, 1.3, m) ==
          doctest::Approx(0.0));
  }
  SUBCASE("t = 0 is the identity") {
    const double initial = (obs * dev).trace().real();
    CHECK(commuting_observable_decay(obs, dev, 0.0, m) ==
          doctest::Approx(initial).epsilon(1e-14));
  }
  SUBCASE("t = ln 2 halves the average") {
    const double initial = (obs * dev).trace().real();
    CHECK(commuting_observable_decay(obs, dev, std::log(2.0), m) ==
          doctest::Approx(0.5 * initial).epsilon(1e-12));
  }
  SUBCASE("non-commuting observables are rejected") {
    Matrix bad = obs;
    bad(0, 1) = 0.5;
    bad(1, 0) = 0.5;
    CHECK_THROWS_AS(commuting_observable_decay(bad, dev, 1.0, m), DomainError);
  }
}

TEST_CASE("two_level_rates") {
  SUBCASE("beta = 0 splits sigma evenly") {
    const auto r = two_level_rates(model_with({0.0, 1.0}, 0.0, 1.0));
    CHECK(r.k12 == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.k21 == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("beta = ln 3 gives 0.25/0.75 of sigma") {
    const auto r =
        two_level_rates(model_with({0.0, 1.0}, std::log(3.0), 2.0));
    CHECK(r.k12 == doctest::Approx(0.5).epsilon(1e-13));   // 2 * 0.25
    CHECK(r.k21 == doctest::Approx(1.5).epsilon(1e-13));   // 2 * 0.75
  }
  SUBCASE("low temperature saturates at the ground state") {
    const auto r = two_level_rates(model_with({0.0, 1.0}, 40.0, 1.0));
    CHECK(r.k12 <= 1e-12);
    CHECK(r.k21 == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("detailed balance and total rate") {
    for (double beta : {-1.3, 0.4, 2.2}) {
      const auto m = model_with({0.2, 1.4}, beta, 0.7);
      const auto r = two_level_rates(m);
      CHECK(r.k12 / r.k21 ==
            doctest::Approx(std::exp(-beta * 1.2)).epsilon(1e-12));
      // Populations relax toward equilibrium at rate k12 + k21 = sigma_eq,
      // the diagonal rate of the element-wise propagator.
      CHECK(r.k12 + r.k21 == doctest::Approx(m.sigma_eq).epsilon(1e-13));
      CHECK(decay_rate(0, 0, m).lambda ==
            doctest::Approx(m.sigma_eq).epsilon(1e-14));
    }
  }
}

TEST_CASE("oscillator_damping") {
  SUBCASE("beta = 0 reduces to sigma_eq") {
    const auto d = oscillator_damping(1.0, model_with({0.5, 1.5}, 0.0, 1.0));
    CHECK(d.gamma == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("beta hbar omega = 2 evaluates xcothx(1)") {
    const auto d = oscillator_damping(2.0, model_with({1.0, 3.0}, 1.0, 1.0));
    CHECK(d.gamma == doctest::Approx(1.0 / std::tanh(1.0)).epsilon(1e-14));
  }
  SUBCASE("second-order coefficients reproduce the first-order eigenvalues") {
    const double omega = 1.7, beta = 0.9;
    const auto m = model_with({0.5, 1.5}, beta, 1.1);
    const auto d = oscillator_damping(omega, m);
    // First-order system for (<p>, <q>).
    Matrix a(2, 2);
    a << -d.gamma, -omega * omega, 1.0, -d.gamma;
    const Eigen::ComplexEigenSolver<Matrix> solver(a);
    Vector ev = solver.eigenvalues();
    for (int i = 0; i < 2; ++i) {
      CHECK(ev[i].real() == doctest::Approx(-d.gamma).epsilon(1e-12));
      CHECK(std::abs(ev[i].imag()) == doctest::Approx(omega).epsilon(1e-12));
    }
    // s^2 + friction s + stiffness = 0 has the same roots.
    const Complex root(-d.gamma, omega);
    const Complex res = root * root + d.friction * root + d.stiffness;
    CHECK(std::abs(res) <= 1e-12);
  }
}

TEST_CASE("fit_elementwise_rates recovers exponents") {
  const auto m = model_with({0.0, 0.8, 1.9, 3.1}, 1.4, 0.9);
  const Matrix d0 = make_admissible(m, 321);
  std::vector<double> times;
  std::vector<Matrix> devs;
  for (int k = 0; k <= 20; ++k) {
    const double t = 0.1 * k;
    times.push_back(t);
    devs.push_back(linear_propagate(d0, t, m));
  }
  const RealMatrix fitted = fit_elementwise_rates(times, devs, 1e-12);
  const RealMatrix expected = rate_matrix(m);
  for (Eigen::Index a = 0; a < 4; ++a) {
    for (Eigen::Index b = 0; b < 4; ++b) {
      CHECK(fitted(a, b) == doctest::Approx(expected(a, b)).epsilon(1e-8));
    }
  }
}
