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
#include <Eigen/Sparse>

#include <iosfwd>
#include <string>
#include <vector>

namespace sls::conic {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class ConeKind { zero, nonneg, soc, psd };

std::string to_string(ConeKind kind);

// One constraint block: map * x + offset must lie in the cone.
//
// For psd(d) blocks the rows hold the scaled-symmetric vectorization of a
// d x d symmetric matrix: upper triangle, column-major, off-diagonal entries
// multiplied by sqrt(2) so that <svec(X), svec(Y)> = trace(X Y).
struct ConeBlock {
  ConeKind kind = ConeKind::nonneg;
  int dim = 0;  // k for zero/nonneg/soc, matrix order d for psd
  SparseRows map;
  Eigen::VectorXd offset;

  int rows() const;
};

struct ConicProgram {
  int nvar = 0;
  Eigen::VectorXd objective;
  std::vector<ConeBlock> blocks;

  explicit ConicProgram(int num_vars = 0);

  // Appends variables and returns the index of the first one.
  int add_variables(int count);
  void add_block(ConeKind kind, int dim, SparseRows map, Eigen::VectorXd offset);
  // Throws DimensionError when a block is malformed.
  void validate() const;
  int total_rows() const;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iterations, numerical_error };

std::string to_string(SolveStatus status);

struct SolverReport {
  SolveStatus status = SolveStatus::numerical_error;
  double objective_value = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  double wall_time = 0.0;  // seconds
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 120;
  bool verbose = false;
  // Programs with at most this many variables after presolve are factored
  // as a single dense normal matrix.
  int dense_variable_limit = 800;
  // Inequality rows with more nonzeros than this are accumulated with a dense
  // rank update instead of sparse outer products.
  int dense_row_nnz = 256;
};

struct ConicSolution {
  Eigen::VectorXd x;
  // Per block, concatenated in block order: the slack map*x+offset as seen by
  // the solver and the dual multiplier (zero blocks: free multiplier).
  Eigen::VectorXd slack;
  Eigen::VectorXd dual;
  SolverReport report;
};

ConicSolution solve(const ConicProgram& prog, double tol = 1e-8);
ConicSolution solve(const ConicProgram& prog, const SolverOptions& options);

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
};

// Replays a candidate (x, dual) through the program. primal = relative
// distance of every block image from its cone, dual = relative stationarity
// residual plus dual cone violation, gap = relative objective gap.
Residuals evaluate_residuals(const ConicProgram& prog, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& dual);

// Scaled-symmetric vectorization helpers.
int svec_size(int d);
int svec_index(int i, int j);  // i <= j
Eigen::VectorXd svec(const Eigen::MatrixXd& s);
Eigen::MatrixXd smat(const Eigen::VectorXd& v, int d);

// Projection of a block image onto its cone (zero cone projects to 0).
Eigen::VectorXd project_onto_cone(ConeKind kind, int dim, const Eigen::VectorXd& v);

// Text dump: objective line, then one line per block with the cone tag,
// dimensions and the dense rows of [map | offset].
void dump_program(const ConicProgram& prog, std::ostream& out);

}  // namespace sls::conic
