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

"""Nonlinear density-matrix dynamics with maximal entropy production.

The heavy lifting lives in the compiled ``_mepq`` extension: spectral
operator calculus, the constrained steepest-entropy-ascent flow and its
adaptive integrator, Gibbs equilibrium solvers, and the near-equilibrium
relaxation rates.
"""

from ._mepq import (
    CompositeTrajectory,
    GibbsSolution,
    MepqError,
    MultiplierSet,
    StationarityReport,
    Trajectory,
    average,
    density_from_state,
    energy_variance,
    entropy_operator,
    entropy_production,
    evolve,
    evolve_composite,
    gibbs_at_beta,
    gibbs_density,
    lagrange_solve,
    linear_propagate,
    negative_temperature_predicate,
    oscillator_damping,
    random_hermitian,
    random_mixed,
    rate_matrix,
    rhs_rho,
    solve_beta,
    spectral_decompose,
    state_from_density,
    stationarity_check,
    trace_distance,
    tsallis_entropy,
    tsallis_zeta,
    two_level_rates,
    von_neumann_entropy,
    xcothx,
    xi,
    zeta,
)

__version__ = "0.1.0"

__all__ = [
    "CompositeTrajectory",
    "GibbsSolution",
    "MepqError",
    "MultiplierSet",
    "StationarityReport",
    "Trajectory",
    "average",
    "density_from_state",
    "energy_variance",
    "entropy_operator",
    "entropy_production",
    "evolve",
    "evolve_composite",
    "gibbs_at_beta",
    "gibbs_density",
    "lagrange_solve",
    "linear_propagate",
    "negative_temperature_predicate",
    "oscillator_damping",
    "random_hermitian",
    "random_mixed",
    "rate_matrix",
    "rhs_rho",
    "solve_beta",
    "spectral_decompose",
    "state_from_density",
    "stationarity_check",
    "trace_distance",
    "tsallis_entropy",
    "tsallis_zeta",
    "two_level_rates",
    "von_neumann_entropy",
    "xcothx",
    "xi",
    "zeta",
]
