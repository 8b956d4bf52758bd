// Copyright 2026 The saferegret Authors
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

#include <stdexcept>
#include <string>

namespace sls {

// Tolerance constants shared by every module. Tests may construct a tighter
// copy and pass it explicitly where an overload accepts one.
struct NumericSettings {
  double symmetry_tol = 1e-10;
  double psd_tol = 1e-9;        // smallest admissible eigenvalue of a PSD weight is -psd_tol
  double pd_tol = 1e-9;         // smallest admissible eigenvalue of a PD weight
  double achievability_tol = 1e-6;
  double ill_conditioned = 1e12;
  double lambda_floor = 1e-12;  // strict positivity of the regret level
  double safety_tol = 1e-6;
  double solver_tol = 1e-8;
};

inline const NumericSettings& default_settings() {
  static const NumericSettings settings{};
  return settings;
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSystemError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NotPsdError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidSetError : public Error {
 public:
  using Error::Error;
};

class DigestMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace sls
