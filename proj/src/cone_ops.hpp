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

// Cone algebra for the interior-point solver. Vectors live in the stacked
// inequality space: all nonnegative rows first, then each second-order cone,
// then each PSD cone in svec form.

#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sls::conic::detail {

struct SocCone {
  int start = 0;
  int dim = 0;
};

struct PsdCone {
  int start = 0;
  int order = 0;
  int rows() const { return order * (order + 1) / 2; }
};

struct ConeLayout {
  int nonneg = 0;
  std::vector<SocCone> soc;
  std::vector<PsdCone> psd;
  int rows = 0;

  // Barrier degree: nonneg rows + number of SOCs + sum of PSD orders.
  int degree() const;
};

struct SocScaling {
  double eta = 1.0;
  Eigen::VectorXd wbar;  // wbar' J wbar = 1
};

struct PsdScaling {
  Eigen::MatrixXd r;      // W(u) = r' u r
  Eigen::MatrixXd r_inv;  // inverse of r
  Eigen::MatrixXd v;      // (W'W)^{-1}(u) = v u v,  v = r^{-T} r^{-1}
  Eigen::VectorXd lambda; // diagonal of the scaled point
};

// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
struct Scaling {
  Eigen::VectorXd nonneg_w;  // sqrt(s / z)
  std::vector<SocScaling> soc;
  std::vector<PsdScaling> psd;
  Eigen::VectorXd lambda;    // stacked scaled point (psd part in svec form)

  static Scaling identity(const ConeLayout& layout);
  // Returns false if s or z is not strictly interior.
  static bool compute(const ConeLayout& layout, const Eigen::VectorXd& s,
                      const Eigen::VectorXd& z, Scaling& out);

  Eigen::VectorXd apply_w(const ConeLayout& layout, const Eigen::VectorXd& u) const;
  Eigen::VectorXd apply_wt(const ConeLayout& layout, const Eigen::VectorXd& u) const;
  Eigen::VectorXd apply_w_inv(const ConeLayout& layout, const Eigen::VectorXd& u) const;
  Eigen::VectorXd apply_wt_inv(const ConeLayout& layout, const Eigen::VectorXd& u) const;
  Eigen::VectorXd apply_wtw(const ConeLayout& layout, const Eigen::VectorXd& u) const;
  Eigen::VectorXd apply_wtw_inv(const ConeLayout& layout, const Eigen::VectorXd& u) const;
  // Solves lambda o x = u for x.
  Eigen::VectorXd lambda_div(const ConeLayout& layout, const Eigen::VectorXd& u) const;
  Eigen::VectorXd lambda_sq(const ConeLayout& layout) const;
  // Largest alpha with lambda + alpha * u in the cone (capped at 1e30).
  double max_step(const ConeLayout& layout, const Eigen::VectorXd& u) const;
};

Eigen::VectorXd identity_element(const ConeLayout& layout);
Eigen::VectorXd jordan_product(const ConeLayout& layout, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v);
// Smallest "eigenvalue" of u over all cones (nonneg: entry, soc: u0-|u1|,
// psd: lambda_min).
double min_eigenvalue(const ConeLayout& layout, const Eigen::VectorXd& u);

}  // namespace sls::conic::detail
