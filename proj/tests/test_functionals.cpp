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

#include "mepq/dynamics.hpp"
#include "mepq/equilibrium.hpp"
#include "mepq/functionals.hpp"
#include "mepq/random.hpp"
#include "test_support.hpp"

using namespace mepq;
using namespace mepq::test;

namespace {

DensityMatrix gibbs_on_subset(const HermitianOperator& h, double beta,
                              const std::vector<Eigen::Index>& kept) {
  const auto eig = spectral_decompose(h);
  Matrix proj = Matrix::Zero(h.dim(), h.dim());
  for (Eigen::Index i : kept) {
    proj += eig.eigenvectors.col(i) * eig.eigenvectors.col(i).adjoint();
  }
  return gibbs_density(h, beta, proj);
}

}  // namespace

TEST_CASE("von_neumann_entropy fixtures") {
  CHECK(von_neumann_entropy(diag_state({0.5, 0.5})) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(von_neumann_entropy(diag_state({1.0, 0.0})) ==
        doctest::Approx(0.0));
  // Scalar sum oracle: -(0.75 ln 0.75 + 0.25 ln 0.25).
  const double expected = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  CHECK(expected == doctest::Approx(0.5623351446188083).epsilon(1e-15));
  CHECK(von_neumann_entropy(diag_state({0.75, 0.25})) ==
        doctest::Approx(expected).epsilon(1e-14));
  // kB scales the result.
  UnitsConfig units;
  units.kB = 2.5;
  CHECK(von_neumann_entropy(diag_state({0.5, 0.5}), units) ==
        doctest::Approx(2.5 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("energy_variance fixtures") {
  const DensityMatrix rho = diag_state({0.75, 0.25});
  CHECK(energy_variance(rho, HermitianOperator(3.0 * Matrix::Identity(2, 2)))
        == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(energy_variance(rho, diag_operator({0.0, 1.0})) ==
        doctest::Approx(0.1875).epsilon(1e-14));
  Vector ground(2);
  ground << 1.0, 0.0;
  CHECK(energy_variance(pure_state(ground), diag_operator({0.0, 1.0})) ==
        doctest::Approx(0.0));
}

TEST_CASE("zeta fixtures") {
  const HermitianOperator h = diag_operator({0.0, 1.0});

  SUBCASE("pure states have zero zeta") {
    Vector psi(2);
    psi << 0.6, 0.8;
    CHECK(zeta(pure_state(psi), h) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("two-level diagonal states are Gibbs states") {
    // beta = ln(rho_1/rho_2)/(E_2 - E_1) = ln 3, so zeta = (ln 3)/2;
    // cross-checked by direct trace arithmetic.
    const DensityMatrix rho = diag_state({0.75, 0.25});
    const double b = 0.75 * std::log(0.75) * (0.0 - 0.25) +
                     0.25 * std::log(0.25) * (1.0 - 0.25);
    const double var = 0.1875;
    CHECK(zeta(rho, h) == doctest::Approx(-0.5 * b / var).epsilon(1e-14));
    CHECK(zeta(rho, h) ==
          doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-13));
  }
  SUBCASE("gibbs identity for random (H, beta)") {
    for (int trial = 0; trial < 40; ++trial) {
      const Eigen::Index d = 2 + trial % 5;
      const HermitianOperator hr = random_hermitian(d, 3000 + trial);
      const double beta = -2.0 + 4.0 * (trial / 39.0);
      const DensityMatrix rho = gibbs_density(hr, beta);
      CHECK(std::abs(zeta(rho, hr) - 0.5 * beta) <= 1e-12);
    }
  }
  SUBCASE("gibbs identity restricted to a subset of eigenstates") {
    const HermitianOperator hr = random_hermitian(5, 77);
    const DensityMatrix rho = gibbs_on_subset(hr, 1.3, {0, 2, 4});
    CHECK(std::abs(zeta(rho, hr) - 0.65) <= 1e-12);
  }
  SUBCASE("zero-point-of-energy invariance") {
    const DensityMatrix rho = random_mixed(4, 4, 11);
    const HermitianOperator hr = random_hermitian(4, 12);
    const HermitianOperator shifted(hr.matrix() +
                                    7.5 * Matrix::Identity(4, 4));
    CHECK(std::abs(zeta(rho, hr) - zeta(rho, shifted)) <= 1e-10);
  }
  SUBCASE("scaling invariance for unnormalized states") {
    const DensityMatrix rho = random_mixed(4, 4, 13);
    const HermitianOperator hr = random_hermitian(4, 14);
    for (double a : {0.2, 3.7}) {
      const DensityMatrix scaled = DensityMatrix::trusted(a * rho.matrix());
      CHECK(std::abs(zeta(scaled, hr) - zeta(rho, hr)) <= 1e-10);
    }
  }
  SUBCASE("variance floor resolves single-eigenspace states to zero") {
    CHECK(zeta(diag_state({0.3, 0.7}),
               HermitianOperator(2.0 * Matrix::Identity(2, 2))) == 0.0);
    // Support inside one degenerate eigenspace of a wider hamiltonian.
    CHECK(zeta(diag_state({0.3, 0.7, 0.0}), diag_operator({1.0, 1.0, 5.0}))
          == 0.0);
  }
}

TEST_CASE("xi fixtures") {
  const HermitianOperator h = diag_operator({0.0, 1.0});
  Vector psi(2);
  psi << 1.0, 0.0;
  CHECK(xi(pure_state(psi), h, 0.0) == doctest::Approx(0.0).epsilon(1e-12));

  // Uniform state: zeta = 0 by symmetry, xi = ln 2.
  const DensityMatrix unif = diag_state({0.5, 0.5});
  CHECK(zeta(unif, h) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(xi(unif, h, zeta(unif, h)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // Gibbs at beta = ln 3: xi = S/kB - beta E by the zeta = beta/2 identity.
  const DensityMatrix gibbs = diag_state({0.75, 0.25});
  const double s = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  const double expected = s - std::log(3.0) * 0.25;
  CHECK(xi(gibbs, h, zeta(gibbs, h)) ==
        doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("entropy_production") {
  const HermitianOperator h = diag_operator({0.0, 1.0});

  SUBCASE("pure state produces nothing") {
    Vector psi(2);
    psi << std::sqrt(0.5), std::sqrt(0.5);
    const DensityMatrix rho = pure_state(psi);
    const MultiplierSet m = lagrange_solve(rho, h, {}, 1.0);
    CHECK(entropy_production(state_from_density(rho), h, m) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("gibbs state produces nothing") {
    const DensityMatrix rho = diag_state({0.75, 0.25});
    const MultiplierSet m = lagrange_solve(rho, h, {}, 1.0);
    CHECK(entropy_production(state_from_density(rho), h, m) <= 1e-12);
  }
  SUBCASE("mixed states produce entropy, matching finite differences") {
    const HermitianOperator h3 = random_hermitian(3, 21);
    const DensityMatrix rho0 = random_mixed(3, 2, 22);
    const MultiplierSet m = lagrange_solve(rho0, h3, {}, 1.0);
    const double analytic =
        entropy_production(state_from_density(rho0), h3, m);
    CHECK(analytic > 1e-3);

    // Central difference of S = -kB Tr(rho ln rho) along the flow.
    ModelSpec model;
    model.hamiltonian = h3;
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-14;
    cfg.initial_step = 1e-5;
    const double hstep = 1e-3;
    cfg.t_end = 2.0 * hstep;
    cfg.record_every = hstep;
    const Trajectory traj = evolve(rho0, model, cfg);
    const double fd =
        (traj.diagnostics[2].entropy - traj.diagnostics[0].entropy) /
        (2.0 * hstep);
    const double mid = entropy_production(
        state_from_density(traj.states[1]), h3,
        lagrange_solve(traj.states[1], h3, {}, 1.0));
    CHECK(fd == doctest::Approx(mid).epsilon(1e-5));
  }
  SUBCASE("never negative on random states") {
    for (int trial = 0; trial < 25; ++trial) {
      const Eigen::Index d = 2 + trial % 4;
      const HermitianOperator hr = random_hermitian(d, 4000 + trial);
      const DensityMatrix rho = random_mixed(d, 1 + trial % d, 4100 + trial);
      const MultiplierSet m = lagrange_solve(rho, hr, {}, 1.0);
      CHECK(entropy_production(state_from_density(rho), hr, m) >= -1e-12);
    }
  }
  SUBCASE("constrained multipliers keep the production nonnegative") {
    const HermitianOperator h4 = diag_operator({0.0, 1.0, 2.0, 3.0});
    ConstraintSet cs;
    cs.operators.push_back(diag_operator({1.0, -1.0, 1.0, -1.0}));
    const DensityMatrix rho = random_mixed(4, 4, 23);
    const MultiplierSet m = lagrange_solve(rho, h4, cs, 1.0);
    const double production =
        entropy_production(state_from_density(rho), h4, m, cs);
    CHECK(production >= -1e-12);
  }
  SUBCASE("inconsistent multipliers are flagged") {
    const DensityMatrix rho = random_mixed(3, 3, 5);
    const HermitianOperator hr = random_hermitian(3, 6);
    MultiplierSet wrong = lagrange_solve(rho, hr, {}, 1.0);
    wrong.zeta += 0.25;
    CHECK_THROWS_AS(entropy_production(state_from_density(rho), hr, wrong),
                    ConsistencyError);
  }
}

TEST_CASE("lagrange_solve") {
  SUBCASE("empty constraints reduce to the scalar formulas") {
    const HermitianOperator h = random_hermitian(4, 31);
    const DensityMatrix rho = random_mixed(4, 4, 32);
    const MultiplierSet m = lagrange_solve(rho, h, {}, 1.0);
    CHECK(m.zeta == doctest::Approx(zeta(rho, h)).epsilon(1e-14));
    CHECK(m.xi == doctest::Approx(xi(rho, h, m.zeta)).epsilon(1e-14));
    CHECK(m.eta.empty());
  }
  SUBCASE("a constraint equal to H is degenerate") {
    const HermitianOperator h = diag_operator({0.0, 1.0, 2.0, 3.0});
    ConstraintSet cs;
    cs.operators.push_back(h);
    const DensityMatrix rho = random_mixed(4, 4, 33);
    CHECK_THROWS_WITH_AS(lagrange_solve(rho, h, cs, 1.0),
                         doctest::Contains("constraint 1"),
                         DegenerateConstraintsError);
  }
  SUBCASE("residual of the solved system vanishes") {
    const HermitianOperator h = diag_operator({0.0, 1.0, 2.0, 3.0});
    ConstraintSet cs;
    cs.operators.push_back(diag_operator({1.0, -1.0, 1.0, -1.0}));
    const DensityMatrix rho = random_mixed(4, 4, 34);
    const double sigma = 1.0;
    const MultiplierSet m = lagrange_solve(rho, h, cs, sigma);
    REQUIRE(m.eta.size() == 1);

    // Independent residual evaluation by direct matrix products.
    const Matrix rlnr = entropy_operator(rho).matrix();
    const double tr = rho.trace();
    const double e = (h.matrix() * rho.matrix()).trace().real() / tr;
    const Matrix id = Matrix::Identity(4, 4);
    const Matrix x0 = h.matrix() - e * id;
    const double cavg =
        (cs.operators[0].matrix() * rho.matrix()).trace().real() / tr;
    const Matrix x1 = cs.operators[0].matrix() - cavg * id;
    const double r0 =
        (x0 * rlnr).trace().real() +
        2.0 * m.zeta * (x0 * x0 * rho.matrix()).trace().real() +
        m.eta[0] * ((x0 * x1 + x1 * x0) * rho.matrix()).trace().real();
    const Complex comm_term =
        Complex(0.0, 1.0) / sigma *
        ((x1 * x0 - x0 * x1) * rho.matrix()).trace();
    const double r1 =
        (x1 * rlnr).trace().real() + comm_term.real() +
        m.zeta * ((x1 * x0 + x0 * x1) * rho.matrix()).trace().real() +
        m.eta[0] * 2.0 * (x1 * x1 * rho.matrix()).trace().real();
    const double scale = std::max(1.0, (x0 * x0 * rho.matrix()).trace().real());
    CHECK(std::abs(r0) <= 1e-10 * scale);
    CHECK(std::abs(r1) <= 1e-10 * scale);
  }
  SUBCASE("two commuting constraints in d = 6") {
    const HermitianOperator h = diag_operator({0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
    ConstraintSet cs;
    cs.operators.push_back(diag_operator({1, -1, 1, -1, 1, -1}));
    cs.operators.push_back(diag_operator({1, 1, -1, -1, 1, 1}));
    CHECK(cs.invariant_grade(h));
    const DensityMatrix rho = random_mixed(6, 6, 35);
    const MultiplierSet m = lagrange_solve(rho, h, cs, 1.0);
    CHECK(m.eta.size() == 2);
    CHECK(std::isfinite(m.eta[0]));
    CHECK(std::isfinite(m.eta[1]));
  }
  SUBCASE("sigma = 0 is rejected when commutators are live") {
    const HermitianOperator h(pauli_z());
    ConstraintSet cs;
    cs.operators.emplace_back(pauli_x());
    Matrix rho_m(2, 2);
    rho_m << 0.7, Complex(0.1, 0.05), Complex(0.1, -0.05), 0.3;
    const DensityMatrix rho = DensityMatrix::trusted(rho_m);
    CHECK_THROWS_AS(lagrange_solve(rho, h, cs, 0.0), DomainError);
    CHECK_NOTHROW(lagrange_solve(rho, h, cs, 1.0));
  }
}

TEST_CASE("tsallis entropy and zeta") {
  SUBCASE("pure state has zero q-entropy") {
    CHECK(tsallis_entropy(diag_state({1.0, 0.0}), 2.0) ==
          doctest::Approx(0.0));
  }
  SUBCASE("uniform two-level state at q = 2") {
    // Tr rho^2 = 1/2, so S_2/kB = (1 - 1/2)/(2 - 1) = 1/2.
    CHECK(tsallis_entropy(diag_state({0.5, 0.5}), 2.0) ==
          doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("q -> 1 recovers the von Neumann entropy") {
    const DensityMatrix rho = random_mixed(4, 4, 41);
    const double s = von_neumann_entropy(rho);
    CHECK(tsallis_entropy(rho, 1.0 + 1e-6) ==
          doctest::Approx(s).epsilon(1e-5));
    CHECK(tsallis_entropy(rho, 1.0 - 1e-6) ==
          doctest::Approx(s).epsilon(1e-5));
  }
  SUBCASE("q -> 1 recovers zeta") {
    const DensityMatrix rho = random_mixed(4, 4, 42);
    const HermitianOperator h = random_hermitian(4, 43);
    const double z = zeta(rho, h);
    CHECK(tsallis_zeta(rho, h, 1.0 + 1e-6) ==
          doctest::Approx(z).epsilon(1e-5));
  }
  SUBCASE("q <= 0 with a singular state is a domain error") {
    CHECK_THROWS_AS(tsallis_entropy(diag_state({1.0, 0.0}), -0.5),
                    DomainError);
    CHECK_THROWS_AS(
        tsallis_zeta(diag_state({1.0, 0.0}), diag_operator({0.0, 1.0}), -0.5),
        DomainError);
  }
  SUBCASE("q = 1 is rejected") {
    CHECK_THROWS_AS(tsallis_entropy(diag_state({0.5, 0.5}), 1.0),
                    DomainError);
  }
}

TEST_CASE("generalized_multipliers") {
  SUBCASE("von Neumann data reproduces zeta") {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index d = 2 + trial % 4;
      const DensityMatrix rho = random_mixed(d, d, 600 + trial);
      const HermitianOperator h = random_hermitian(d, 650 + trial);
      const MultiplierSet m =
          generalized_multipliers(rho, h, EntropyModel::von_neumann());
      CHECK(m.zeta == doctest::Approx(zeta(rho, h)).epsilon(1e-12));
    }
  }
  SUBCASE("pure states give zero") {
    Vector psi(3);
    psi << 0.5, Complex(0.0, 0.5), std::sqrt(0.5);
    const MultiplierSet m = generalized_multipliers(
        pure_state(psi), random_hermitian(3, 71), EntropyModel::von_neumann());
    CHECK(std::abs(m.zeta) <= 1e-12);
  }
  SUBCASE("tsallis model matches tsallis_zeta") {
    const DensityMatrix rho = random_mixed(4, 4, 81);
    const HermitianOperator h = random_hermitian(4, 82);
    for (double q : {0.5, 2.0, 3.0}) {
      const MultiplierSet m =
          generalized_multipliers(rho, h, EntropyModel::tsallis(q));
      CHECK(m.zeta == doctest::Approx(tsallis_zeta(rho, h, q)).epsilon(1e-12));
    }
  }
  SUBCASE("non-hermitian custom gradients are rejected") {
    const auto bad = EntropyModel::custom(
        "bad",
        [](const DensityMatrix&, const SpectralDecomposition&) { return 0.0; },
        [](const DensityMatrix& r, const SpectralDecomposition&) {
          Matrix g = Matrix::Zero(r.dim(), r.dim());
          g(0, 1) = 1.0;
          return g;
        });
    CHECK_THROWS_AS(generalized_multipliers(random_mixed(3, 3, 91),
                                            random_hermitian(3, 92), bad),
                    HermiticityError);
  }
}

TEST_CASE("sigma policy admissibility") {
  CHECK_THROWS_AS(SigmaPolicy::constant(-1.0), DomainError);
  const SigmaPolicy cb = SigmaPolicy::callback(
      "negative", [](const DensityMatrix&, const HermitianOperator&, double) {
        return -0.5;
      });
  CHECK_THROWS_AS(
      cb.evaluate(diag_state({0.5, 0.5}), diag_operator({0.0, 1.0}), 0.5),
      DomainError);
}
