# Copyright 2026 The mepq authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests of the compiled module through the python surface."""

import math

import numpy as np
import pytest

import mepq


def two_level(e1=0.0, e2=1.0):
    return np.diag([e1, e2]).astype(complex)


def test_gibbs_zeta_is_half_beta():
    h = two_level()
    rho = mepq.gibbs_density(h, math.log(3.0))
    assert abs(mepq.zeta(rho, h) - 0.5 * math.log(3.0)) < 1e-12
    assert rho[0, 0].real == pytest.approx(0.75, abs=1e-12)


def test_entropy_values():
    rho = np.diag([0.5, 0.5]).astype(complex)
    assert mepq.von_neumann_entropy(rho) == pytest.approx(math.log(2.0))
    assert mepq.tsallis_entropy(rho, 2.0) == pytest.approx(0.5)
    pure = np.diag([1.0, 0.0]).astype(complex)
    assert mepq.von_neumann_entropy(pure) == pytest.approx(0.0, abs=1e-12)


def test_solve_beta_closed_form():
    sol = mepq.solve_beta([0.0, 1.0], 0.25)
    assert sol.beta == pytest.approx(math.log(3.0), abs=1e-10)
    inverted = mepq.solve_beta([0.0, 1.0], 0.75)
    assert inverted.beta == pytest.approx(-math.log(3.0), abs=1e-10)
    assert mepq.negative_temperature_predicate([0.0, 1.0], 0.75)
    assert not mepq.negative_temperature_predicate([0.0, 1.0], 0.25)


def test_evolve_conserves_and_relaxes():
    h = mepq.random_hermitian(4, seed=5)
    rho0 = mepq.random_mixed(4, 4, seed=6)
    traj = mepq.evolve(rho0, h, t_end=50.0, record_every=1.0,
                       rel_tol=1e-10, abs_tol=1e-12)
    assert traj.status in ("completed", "stationary")
    energy = np.asarray(traj.energy)
    assert np.max(np.abs(energy - energy[0])) < 1e-6
    entropy = np.asarray(traj.entropy)
    assert np.all(np.diff(entropy) > -1e-9)
    # The final state is the gibbs state at the conserved energy.
    w = np.linalg.eigvalsh(h)
    sol = mepq.solve_beta(list(w), float(energy[0]), tol=1e-14)
    target = mepq.gibbs_density(h, sol.beta)
    assert mepq.trace_distance(traj.states[-1], target) < 1e-5
    report = mepq.stationarity_check(traj.states[-1], h)
    assert report.stationary
    assert 2.0 * report.zeta_eq == pytest.approx(sol.beta, abs=1e-5)


def test_rank_preservation():
    h = mepq.random_hermitian(4, seed=9)
    rho0 = mepq.random_mixed(4, 2, seed=10)
    traj = mepq.evolve(rho0, h, t_end=5.0, record_every=0.5)
    eigs = np.asarray(traj.eigenvalues)  # descending per row
    assert np.max(eigs[:, 2:]) < 1e-8


def test_rhs_is_stationary_on_gibbs():
    h = two_level()
    rho = mepq.gibbs_density(h, 1.3)
    assert np.linalg.norm(mepq.rhs_rho(rho, h)) < 1e-12


def test_thermal_contact_common_temperature():
    h = two_level()
    pair = mepq.evolve_composite(
        mepq.gibbs_density(h, 0.5), mepq.gibbs_density(h, 2.0), h, h,
        mode="thermal_contact", t_end=40.0, record_every=1.0,
        rel_tol=1e-10, abs_tol=1e-12)
    total = np.asarray(pair.total_energy)
    assert np.max(np.abs(total - total[0])) < 1e-7
    beta_common = 2.0 * pair.zeta_shared[-1]
    assert 0.5 < beta_common < 2.0
    target = mepq.gibbs_density(h, beta_common)
    assert mepq.trace_distance(pair.factor1.states[-1], target) < 1e-4
    assert mepq.trace_distance(pair.factor2.states[-1], target) < 1e-4


def test_linearized_rates():
    assert mepq.xcothx(0.0) == pytest.approx(1.0)
    coth1 = 1.0 / math.tanh(1.0)
    assert mepq.xcothx(1.0) == pytest.approx(coth1)
    rates = mepq.rate_matrix([0.0, 1.0], beta=2.0, sigma_eq=1.0)
    assert rates[0, 0] == pytest.approx(1.0)
    assert rates[0, 1] == pytest.approx(coth1)
    k12, k21 = mepq.two_level_rates(0.0, 1.0, beta=math.log(3.0))
    assert k12 == pytest.approx(0.25)
    assert k21 == pytest.approx(0.75)
    gamma, friction, stiffness = mepq.oscillator_damping(1.0, beta=2.0)
    assert gamma == pytest.approx(coth1)
    assert friction == pytest.approx(2.0 * coth1)
    assert stiffness == pytest.approx(1.0 + coth1 * coth1)


def test_random_mixed_determinism():
    a = mepq.random_mixed(4, 4, seed=2024)
    b = mepq.random_mixed(4, 4, seed=2024)
    assert np.array_equal(a, b)
    assert np.trace(a).real == pytest.approx(1.0, abs=1e-12)


def test_multipliers_and_entropy_production():
    h = mepq.random_hermitian(3, seed=11)
    rho = mepq.random_mixed(3, 3, seed=12)
    mult = mepq.lagrange_solve(rho, h)
    assert mult.zeta == pytest.approx(mepq.zeta(rho, h), abs=1e-13)
    assert mepq.entropy_production(rho, h) >= 0.0


def test_errors_are_pythonic():
    with pytest.raises(ValueError):
        mepq.von_neumann_entropy(np.diag([0.4, 0.4]).astype(complex))
    with pytest.raises(ValueError):
        mepq.solve_beta([0.0, 1.0], 2.0)
    with pytest.raises(ValueError):
        mepq.tsallis_entropy(np.diag([1.0, 0.0]).astype(complex), -0.5)
