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

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "mepq/dynamics.hpp"
#include "mepq/equilibrium.hpp"
#include "mepq/linearized.hpp"
#include "mepq/random.hpp"
#include "mepq/scenario.hpp"

namespace py = pybind11;
using namespace mepq;

namespace {

DensityMatrix as_density(const Matrix& m) { return DensityMatrix::checked(m); }

HermitianOperator as_hermitian(const Matrix& m) { return HermitianOperator(m); }

SupportSpectrum as_spectrum(const std::vector<double>& energies,
                            const std::optional<std::vector<int>>& mult) {
  SupportSpectrum s;
  s.energies = energies;
  if (mult) s.multiplicities = *mult;
  s.validate();
  return s;
}

ModelSpec build_model(const Matrix& h, double sigma, std::optional<double> q,
                      const std::vector<Matrix>& constraints, double hbar,
                      double kB) {
  ModelSpec model;
  model.hamiltonian = as_hermitian(h);
  model.sigma_policy = SigmaPolicy::constant(sigma);
  if (q) model.entropy_model = EntropyModel::tsallis(*q);
  for (const Matrix& c : constraints) {
    model.constraints.operators.push_back(as_hermitian(c));
  }
  model.units.hbar = hbar;
  model.units.kB = kB;
  model.validate();
  return model;
}

IntegratorConfig build_config(double t_end, double record_every,
                              double rel_tol, double abs_tol,
                              double max_step) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.record_every = record_every;
  cfg.rel_tol = rel_tol;
  cfg.abs_tol = abs_tol;
  cfg.max_step = max_step;
  cfg.validate();
  return cfg;
}

LinearizedModel build_linearized(const std::vector<double>& energies,
                                 double beta, double sigma_eq, double hbar) {
  LinearizedModel m;
  m.energies =
      Eigen::Map<const RealVector>(energies.data(), energies.size());
  m.beta = beta;
  m.sigma_eq = sigma_eq;
  m.units.hbar = hbar;
  m.validate();
  return m;
}

RealVector collect(const Trajectory& t, double SampleDiagnostics::*field) {
  RealVector out(t.diagnostics.size());
  for (std::size_t k = 0; k < t.diagnostics.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = t.diagnostics[k].*field;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_mepq, m) {
  m.doc() =
      "Nonlinear density-matrix dynamics with maximal entropy production: "
      "steepest-entropy-ascent flows, Gibbs equilibrium solvers and "
      "near-equilibrium relaxation rates.";

  py::register_exception<Error>(m, "MepqError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DomainError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DimensionError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const HermiticityError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const PositivityError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<MultiplierSet>(m, "MultiplierSet")
      .def_readonly("zeta", &MultiplierSet::zeta)
      .def_readonly("xi", &MultiplierSet::xi)
      .def_readonly("eta", &MultiplierSet::eta)
      .def_readonly("sigma", &MultiplierSet::sigma)
      .def("__repr__", [](const MultiplierSet& s) {
        return "MultiplierSet(zeta=" + format_double(s.zeta) +
               ", xi=" + format_double(s.xi) + ", n_eta=" +
               std::to_string(s.eta.size()) + ", sigma=" +
               format_double(s.sigma) + ")";
      });

  py::class_<GibbsSolution>(m, "GibbsSolution")
      .def_readonly("beta", &GibbsSolution::beta)
      .def_readonly("logZ", &GibbsSolution::logZ)
      .def_readonly("probabilities", &GibbsSolution::probabilities)
      .def_readonly("degenerate", &GibbsSolution::degenerate);

  py::class_<StationarityReport>(m, "StationarityReport")
      .def_readonly("commutator_norm", &StationarityReport::commutator_norm)
      .def_readonly("rhs_norm", &StationarityReport::rhs_norm)
      .def_readonly("stationary", &StationarityReport::stationary)
      .def_readonly("zeta_eq", &StationarityReport::zeta_eq)
      .def_readonly("entropy_eq", &StationarityReport::entropy_eq)
      .def_readonly("max_log_residual",
                    &StationarityReport::max_log_residual);

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly(
          "times",
          [](const Trajectory& t) { return t.times; })
      .def_property_readonly(
          "states",
          [](const Trajectory& t) {
            std::vector<Matrix> out;
            out.reserve(t.states.size());
            for (const auto& s : t.states) out.push_back(s.matrix());
            return out;
          })
      .def_property_readonly(
          "status",
          [](const Trajectory& t) { return std::string(to_string(t.status)); })
      .def_readonly("message", &Trajectory::message)
      .def_property_readonly(
          "trace",
          [](const Trajectory& t) { return collect(t, &SampleDiagnostics::trace); })
      .def_property_readonly(
          "energy",
          [](const Trajectory& t) { return collect(t, &SampleDiagnostics::energy); })
      .def_property_readonly(
          "entropy",
          [](const Trajectory& t) { return collect(t, &SampleDiagnostics::entropy); })
      .def_property_readonly(
          "entropy_production",
          [](const Trajectory& t) {
            return collect(t, &SampleDiagnostics::entropy_production);
          })
      .def_property_readonly(
          "zeta",
          [](const Trajectory& t) { return collect(t, &SampleDiagnostics::zeta); })
      .def_property_readonly(
          "eigenvalues",
          [](const Trajectory& t) {
            const Eigen::Index d =
                t.diagnostics.empty() ? 0
                                      : t.diagnostics.front().eigenvalues.size();
            RealMatrix out(t.diagnostics.size(), d);
            for (std::size_t k = 0; k < t.diagnostics.size(); ++k) {
              out.row(static_cast<Eigen::Index>(k)) =
                  t.diagnostics[k].eigenvalues;
            }
            return out;
          })
      .def_property_readonly(
          "constraint_averages",
          [](const Trajectory& t) {
            const std::size_t n =
                t.diagnostics.empty()
                    ? 0
                    : t.diagnostics.front().constraint_averages.size();
            RealMatrix out(t.diagnostics.size(), n);
            for (std::size_t k = 0; k < t.diagnostics.size(); ++k) {
              for (std::size_t j = 0; j < n; ++j) {
                out(static_cast<Eigen::Index>(k),
                    static_cast<Eigen::Index>(j)) =
                    t.diagnostics[k].constraint_averages[j];
              }
            }
            return out;
          })
      .def("__len__", [](const Trajectory& t) { return t.times.size(); })
      .def("__repr__", [](const Trajectory& t) {
        return "Trajectory(samples=" + std::to_string(t.times.size()) +
               ", status=" + to_string(t.status) + ")";
      });

  py::class_<CompositeTrajectory>(m, "CompositeTrajectory")
      .def_readonly("factor1", &CompositeTrajectory::factor1)
      .def_readonly("factor2", &CompositeTrajectory::factor2)
      .def_readonly("zeta_shared", &CompositeTrajectory::zeta_shared)
      .def_readonly("total_energy", &CompositeTrajectory::total_energy)
      .def_readonly("total_entropy", &CompositeTrajectory::total_entropy)
      .def_property_readonly("status", [](const CompositeTrajectory& t) {
        return std::string(to_string(t.status));
      });

  // ---- operator calculus -------------------------------------------------

  m.def(
      "spectral_decompose",
      [](const Matrix& a) {
        const auto eig = spectral_decompose(as_hermitian(a));
        return py::make_tuple(eig.eigenvalues, eig.eigenvectors);
      },
      py::arg("operator"),
      "Eigenvalues (ascending) and orthonormal eigenvectors of a hermitian "
      "operator.");
  m.def(
      "density_from_state",
      [](const Matrix& gamma) {
        return density_from_state(StateOperator(gamma)).matrix();
      },
      py::arg("gamma"), "rho = gamma gamma^dagger.");
  m.def(
      "state_from_density",
      [](const Matrix& rho) { return state_from_density(as_density(rho)).matrix(); },
      py::arg("rho"),
      "A square-root factor of rho; thin (d x rank) for rank-deficient "
      "states.");
  m.def(
      "entropy_operator",
      [](const Matrix& rho) { return entropy_operator(as_density(rho)).matrix(); },
      py::arg("rho"), "rho ln rho on the support of rho.");
  m.def(
      "average",
      [](const Matrix& o, const Matrix& rho) {
        return average(as_hermitian(o), as_density(rho));
      },
      py::arg("observable"), py::arg("rho"), "Tr(O rho)/Tr(rho).");
  m.def(
      "trace_distance",
      [](const Matrix& a, const Matrix& b) {
        return trace_distance(DensityMatrix::trusted(a),
                              DensityMatrix::trusted(b));
      },
      py::arg("rho1"), py::arg("rho2"));

  // ---- scalar functionals -------------------------------------------------

  m.def(
      "von_neumann_entropy",
      [](const Matrix& rho, double kB) {
        UnitsConfig units;
        units.kB = kB;
        return von_neumann_entropy(as_density(rho), units);
      },
      py::arg("rho"), py::arg("kB") = 1.0, "S = -kB Tr(rho ln rho).");
  m.def(
      "energy_variance",
      [](const Matrix& rho, const Matrix& h) {
        return energy_variance(as_density(rho), as_hermitian(h));
      },
      py::arg("rho"), py::arg("hamiltonian"));
  m.def(
      "zeta",
      [](const Matrix& rho, const Matrix& h) {
        return zeta(as_density(rho), as_hermitian(h));
      },
      py::arg("rho"), py::arg("hamiltonian"),
      "The energy multiplier -Tr[(H-E) rho ln rho] / (2 Tr[(H-E)^2 rho]); "
      "beta/2 on gibbs states.");
  m.def(
      "xi",
      [](const Matrix& rho, const Matrix& h, double zeta_value) {
        return xi(as_density(rho), as_hermitian(h), zeta_value);
      },
      py::arg("rho"), py::arg("hamiltonian"), py::arg("zeta"));
  m.def(
      "tsallis_entropy",
      [](const Matrix& rho, double q, double kB) {
        UnitsConfig units;
        units.kB = kB;
        return tsallis_entropy(as_density(rho), q, units);
      },
      py::arg("rho"), py::arg("q"), py::arg("kB") = 1.0);
  m.def(
      "tsallis_zeta",
      [](const Matrix& rho, const Matrix& h, double q) {
        return tsallis_zeta(as_density(rho), as_hermitian(h), q);
      },
      py::arg("rho"), py::arg("hamiltonian"), py::arg("q"));
  m.def(
      "lagrange_solve",
      [](const Matrix& rho, const Matrix& h,
         const std::vector<Matrix>& constraints, double sigma, double hbar) {
        ConstraintSet cs;
        for (const Matrix& c : constraints) {
          cs.operators.push_back(as_hermitian(c));
        }
        UnitsConfig units;
        units.hbar = hbar;
        return lagrange_solve(as_density(rho), as_hermitian(h), cs, sigma,
                              units);
      },
      py::arg("rho"), py::arg("hamiltonian"),
      py::arg("constraints") = std::vector<Matrix>{}, py::arg("sigma") = 1.0,
      py::arg("hbar") = 1.0,
      "Multipliers (zeta, xi, eta) conserving energy and every <C_j>.");
  m.def(
      "entropy_production",
      [](const Matrix& rho, const Matrix& h, double sigma, double kB) {
        const DensityMatrix state = as_density(rho);
        const HermitianOperator ham = as_hermitian(h);
        const MultiplierSet mult = lagrange_solve(state, ham, {}, sigma);
        UnitsConfig units;
        units.kB = kB;
        return entropy_production(state_from_density(state), ham, mult, {},
                                  units);
      },
      py::arg("rho"), py::arg("hamiltonian"), py::arg("sigma") = 1.0,
      py::arg("kB") = 1.0, "dS/dt = kB sigma (theta|theta) >= 0.");

  // ---- dynamics ------------------------------------------------------------

  m.def(
      "rhs_rho",
      [](const Matrix& rho, const Matrix& h, double sigma,
         std::optional<double> q, const std::vector<Matrix>& constraints,
         double hbar) {
        return rhs_rho(as_density(rho),
                       build_model(h, sigma, q, constraints, hbar, 1.0));
      },
      py::arg("rho"), py::arg("hamiltonian"), py::arg("sigma") = 1.0,
      py::arg("q") = py::none(), py::arg("constraints") = std::vector<Matrix>{},
      py::arg("hbar") = 1.0, "d rho/dt of the nonlinear flow.");
  m.def(
      "evolve",
      [](const Matrix& rho0, const Matrix& h, double t_end,
         double record_every, double sigma, std::optional<double> q,
         const std::vector<Matrix>& constraints, double rel_tol,
         double abs_tol, double max_step, double hbar, double kB) {
        return evolve(as_density(rho0),
                      build_model(h, sigma, q, constraints, hbar, kB),
                      build_config(t_end, record_every, rel_tol, abs_tol,
                                   max_step));
      },
      py::arg("rho0"), py::arg("hamiltonian"), py::arg("t_end") = 10.0,
      py::arg("record_every") = 0.1, py::arg("sigma") = 1.0,
      py::arg("q") = py::none(), py::arg("constraints") = std::vector<Matrix>{},
      py::arg("rel_tol") = 1e-8, py::arg("abs_tol") = 1e-10,
      py::arg("max_step") = 0.25, py::arg("hbar") = 1.0, py::arg("kB") = 1.0,
      "Integrate the state-operator flow; positivity holds by construction.");
  m.def(
      "evolve_composite",
      [](const Matrix& rho1, const Matrix& rho2, const Matrix& h1,
         const Matrix& h2, const std::string& mode, double t_end,
         double record_every, double sigma, double rel_tol, double abs_tol,
         double max_step, double hbar, double kB) {
        CompositeSpec spec;
        spec.h1 = as_hermitian(h1);
        spec.h2 = as_hermitian(h2);
        if (mode == "thermal_contact") {
          spec.mode = CompositeMode::thermal_contact;
        } else if (mode == "adiabatic") {
          spec.mode = CompositeMode::adiabatic;
        } else if (mode == "isolated") {
          spec.mode = CompositeMode::isolated;
        } else {
          throw DomainError("unknown composite mode '" + mode + "'");
        }
        spec.sigma_policy = SigmaPolicy::constant(sigma);
        spec.units.hbar = hbar;
        spec.units.kB = kB;
        return evolve_composite(as_density(rho1), as_density(rho2), spec,
                                build_config(t_end, record_every, rel_tol,
                                             abs_tol, max_step));
      },
      py::arg("rho1"), py::arg("rho2"), py::arg("h1"), py::arg("h2"),
      py::arg("mode") = "thermal_contact", py::arg("t_end") = 10.0,
      py::arg("record_every") = 0.1, py::arg("sigma") = 1.0,
      py::arg("rel_tol") = 1e-8, py::arg("abs_tol") = 1e-10,
      py::arg("max_step") = 0.25, py::arg("hbar") = 1.0, py::arg("kB") = 1.0,
      "Product-form evolution of two noninteracting factors.");

  // ---- equilibrium ----------------------------------------------------------

  m.def(
      "solve_beta",
      [](const std::vector<double>& energies, double energy,
         const std::optional<std::vector<int>>& multiplicities, double tol) {
        return solve_beta(as_spectrum(energies, multiplicities), energy, tol);
      },
      py::arg("energies"), py::arg("energy"),
      py::arg("multiplicities") = py::none(), py::arg("tol") = 1e-12,
      "Inverse temperature with the given mean energy on a finite support.");
  m.def(
      "gibbs_at_beta",
      [](const std::vector<double>& energies, double beta,
         const std::optional<std::vector<int>>& multiplicities) {
        return gibbs_at_beta(as_spectrum(energies, multiplicities), beta);
      },
      py::arg("energies"), py::arg("beta"),
      py::arg("multiplicities") = py::none());
  m.def(
      "negative_temperature_predicate",
      [](const std::vector<double>& energies, double energy,
         const std::optional<std::vector<int>>& multiplicities) {
        return negative_temperature_predicate(
            as_spectrum(energies, multiplicities), energy);
      },
      py::arg("energies"), py::arg("energy"),
      py::arg("multiplicities") = py::none());
  m.def(
      "gibbs_density",
      [](const Matrix& h, double beta,
         const std::optional<Matrix>& support_projector) {
        return gibbs_density(as_hermitian(h), beta, support_projector)
            .matrix();
      },
      py::arg("hamiltonian"), py::arg("beta"),
      py::arg("support_projector") = py::none(),
      "exp(-beta H)/Z, optionally restricted to a commuting projector.");
  m.def(
      "stationarity_check",
      [](const Matrix& rho, const Matrix& h, double tol) {
        return stationarity_check(as_density(rho), as_hermitian(h), tol);
      },
      py::arg("rho"), py::arg("hamiltonian"), py::arg("tol") = 1e-8);

  // ---- near-equilibrium rates ----------------------------------------------

  m.def("xcothx", &xcothx, py::arg("x"), "x coth x, smooth and >= 1.");
  m.def(
      "rate_matrix",
      [](const std::vector<double>& energies, double beta, double sigma_eq,
         double hbar) {
        return rate_matrix(build_linearized(energies, beta, sigma_eq, hbar));
      },
      py::arg("energies"), py::arg("beta"), py::arg("sigma_eq") = 1.0,
      py::arg("hbar") = 1.0,
      "Element-wise relaxation rates sigma_eq * xcothx(beta dE / 2).");
  m.def(
      "linear_propagate",
      [](const Matrix& delta0, double t, const std::vector<double>& energies,
         double beta, double sigma_eq, double hbar) {
        return linear_propagate(delta0, t,
                                build_linearized(energies, beta, sigma_eq,
                                                 hbar));
      },
      py::arg("delta0"), py::arg("t"), py::arg("energies"), py::arg("beta"),
      py::arg("sigma_eq") = 1.0, py::arg("hbar") = 1.0);
  m.def(
      "two_level_rates",
      [](double e1, double e2, double beta, double sigma_eq) {
        const auto r = two_level_rates(
            build_linearized({e1, e2}, beta, sigma_eq, 1.0));
        return py::make_tuple(r.k12, r.k21);
      },
      py::arg("e1"), py::arg("e2"), py::arg("beta"), py::arg("sigma_eq") = 1.0,
      "Kinetic rates (k12, k21) of the two-level relaxation law.");
  m.def(
      "oscillator_damping",
      [](double omega, double beta, double sigma_eq, double hbar) {
        const auto d = oscillator_damping(
            omega, build_linearized({0.5 * hbar * omega, 1.5 * hbar * omega},
                                    beta, sigma_eq, hbar));
        return py::make_tuple(d.gamma, d.friction, d.stiffness);
      },
      py::arg("omega"), py::arg("beta"), py::arg("sigma_eq") = 1.0,
      py::arg("hbar") = 1.0,
      "(gamma, 2 gamma, omega^2 + gamma^2) of the damped-oscillator law.");

  // ---- deterministic state generation ----------------------------------------

  m.def(
      "random_mixed",
      [](Eigen::Index dim, Eigen::Index rank, std::uint64_t seed) {
        return random_mixed(dim, rank, seed).matrix();
      },
      py::arg("dim"), py::arg("rank"), py::arg("seed"),
      "Seeded rank-exact mixed state from the counter-based splitmix64 "
      "stream.");
  m.def(
      "random_hermitian",
      [](Eigen::Index dim, std::uint64_t seed, double scale) {
        return random_hermitian(dim, seed, scale).matrix();
      },
      py::arg("dim"), py::arg("seed"), py::arg("scale") = 1.0);
}
