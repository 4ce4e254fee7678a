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

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mepq {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Physical constants entering the equations of motion. Natural units
/// (hbar = kB = 1) by default; both must be strictly positive.
struct UnitsConfig {
  double hbar = 1.0;
  double kB = 1.0;
  void validate() const;
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct HermiticityError : Error {
  using Error::Error;
};

struct PositivityError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct DegenerateConstraintsError : Error {
  using Error::Error;
};

/// An internal relation that must hold by construction failed; signals a
/// multiplier or bookkeeping bug rather than bad input.
struct ConsistencyError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Tr(A B) without forming the product.
inline Complex trace_product(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace mepq
