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

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "sls/settings.hpp"

namespace sls {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// x_{t+1} = A_t x_t + B_t u_t + w_t over T steps; A and B hold T-1 entries.
class LtvSystem {
 public:
  LtvSystem(int n, int m, int horizon, std::vector<MatrixXd> a, std::vector<MatrixXd> b);

  // Replicates a single (A, B) pair over the horizon.
  static LtvSystem time_invariant(const MatrixXd& a, const MatrixXd& b, int horizon);

  int n() const { return n_; }
  int m() const { return m_; }
  int horizon() const { return horizon_; }
  const std::vector<MatrixXd>& a() const { return a_; }
  const std::vector<MatrixXd>& b() const { return b_; }

 private:
  int n_;
  int m_;
  int horizon_;
  std::vector<MatrixXd> a_;
  std::vector<MatrixXd> b_;
};

struct BlockOperators {
  MatrixXd z;  // block downshift, nT x nT
  MatrixXd a;  // blkdiag(A_0, ..., A_{T-2}, 0)
  MatrixXd b;  // blkdiag(B_0, ..., B_{T-2}, 0)
};

BlockOperators build_block_operators(const LtvSystem& sys);

// x = F u + G w for stacked signals.
struct PlantMaps {
  MatrixXd f;  // nT x mT
  MatrixXd g;  // nT x nT
};

PlantMaps build_plant_maps(const LtvSystem& sys);

class CostWeights {
 public:
  CostWeights(MatrixXd q, MatrixXd r, const NumericSettings& settings = default_settings());

  static CostWeights identity(const LtvSystem& sys);

  const MatrixXd& q() const { return q_; }
  const MatrixXd& r() const { return r_; }
  // blkdiag(Q, R)
  MatrixXd joint() const;

 private:
  MatrixXd q_;
  MatrixXd r_;
};

enum class SignalKind { state, input, disturbance };

struct StackedSignal {
  SignalKind kind = SignalKind::disturbance;
  VectorXd data;  // disturbance: x0 followed by w_0 ... w_{T-2}

  void validate(const LtvSystem& sys) const;
};

struct ClosedLoopResponse {
  MatrixXd phi_x;  // nT x nT
  MatrixXd phi_u;  // mT x nT
  bool causal = false;

  // [phi_x; phi_u]
  MatrixXd stacked() const;
};

// Frobenius norm of (I - Z A) phi_x - Z B phi_u - I.
double achievability_residual(const ClosedLoopResponse& resp, const LtvSystem& sys);

// True when every block above the block diagonal is exactly zero.
bool is_block_lower(const MatrixXd& m, int row_block, int col_block);

// Throws ContractViolation when the response is not achievable for sys or
// claims causality it does not have.
void check_response(const ClosedLoopResponse& resp, const LtvSystem& sys,
                    const NumericSettings& settings = default_settings());

// Response of the zero controller: phi_x = G, phi_u = 0.
ClosedLoopResponse zero_controller_response(const LtvSystem& sys);

class CausalController {
 public:
  CausalController(MatrixXd k, int n, int m);

  const MatrixXd& k() const { return k_; }

 private:
  MatrixXd k_;
};

struct ControllerRecovery {
  CausalController controller;
  double condition_number = 1.0;
  bool ill_conditioned = false;
};

// K = phi_u phi_x^{-1}; requires a causal response.
ControllerRecovery recover_controller(const ClosedLoopResponse& resp, const LtvSystem& sys,
                                      const NumericSettings& settings = default_settings());

// phi_x = (I - Z(A + B K))^{-1}, phi_u = K phi_x.
ClosedLoopResponse response_from_controller(const CausalController& k, const LtvSystem& sys);

double evaluate_cost(const StackedSignal& w, const StackedSignal& u, const CostWeights& weights,
                     const PlantMaps& maps);

MatrixXd psd_sqrt(const MatrixXd& m, const NumericSettings& settings = default_settings());

// {v : H v <= h}
class PolytopeSet {
 public:
  PolytopeSet(MatrixXd h_mat, VectorXd h_vec);

  static PolytopeSet box(const VectorXd& lo, const VectorXd& hi);

  int dim() const { return static_cast<int>(h_mat_.cols()); }
  int rows() const { return static_cast<int>(h_mat_.rows()); }
  const MatrixXd& h_mat() const { return h_mat_; }
  const VectorXd& h_vec() const { return h_vec_; }

  // Set when every row is a scaled coordinate bound and each coordinate has
  // exactly one upper and one lower bound.
  const std::optional<std::pair<VectorXd, VectorXd>>& box_bounds() const { return box_; }

  bool contains(const VectorXd& v, double tol) const;
  // max c'v over the set; +inf when unbounded.
  double support(const VectorXd& c) const;
  // Maximizer of c'v; requires a bounded direction.
  VectorXd support_point(const VectorXd& c) const;

  PolytopeSet scaled(double factor) const;

 private:
  MatrixXd h_mat_;
  VectorXd h_vec_;
  std::optional<std::pair<VectorXd, VectorXd>> box_;
};

// Throws InvalidSetError unless the set is bounded and contains the origin
// in its interior.
void validate_disturbance_set(const PolytopeSet& w);

}  // namespace sls
