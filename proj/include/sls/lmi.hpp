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

#include "sls/conic.hpp"
#include "sls/model.hpp"

namespace sls {

// Matrix-valued affine expression M(x) = constant + mat(coef * x), with
// entries vectorized column-major.
struct AffineMatrix {
  using Coef = Eigen::SparseMatrix<double, Eigen::ColMajor>;

  int rows = 0;
  int cols = 0;
  MatrixXd constant;
  Coef coef;  // (rows * cols) x nvar

  AffineMatrix() = default;
  AffineMatrix(MatrixXd constant_part, Coef coefficients);

  int nvar() const { return static_cast<int>(coef.cols()); }
  AffineMatrix left(const MatrixXd& p) const;   // p * M
  AffineMatrix right(const MatrixXd& s) const;  // M * s
  AffineMatrix with_nvar(int nvar) const;
  MatrixXd evaluate(const VectorXd& x) const;
  // vec(M(x)) = map * x + offset
  conic::SparseRows vec_map() const;
  VectorXd vec_offset() const;
};

// [[I, W^{1/2} Phi], [Phi' W^{1/2}, lambda I + C]] in svec form. phi is the
// stacked response [Phi_x; Phi_u] and lambda_var indexes the scalar level.
conic::ConeBlock assemble_lmi_schur(const AffineMatrix& phi, const CostWeights& weights,
                                    const MatrixXd& benchmark_cost, int lambda_var,
                                    const NumericSettings& settings = default_settings());

// [[gamma I, M], [M', gamma I]] in svec form.
conic::ConeBlock assemble_spectral_norm_lmi(const AffineMatrix& m, int gamma_var);

// blkdiag(Q^{1/2}, R^{1/2})
MatrixXd weight_sqrt(const CostWeights& weights,
                     const NumericSettings& settings = default_settings());

}  // namespace sls
