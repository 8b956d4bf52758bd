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

#include "sls/lmi.hpp"

#include <vector>

namespace sls {
namespace {

using Triplet = Eigen::Triplet<double>;

// Upper triangle of a symmetric matrix of the given order, filled block by
// block, emitted in svec order.
class SvecAssembler {
 public:
  SvecAssembler(int order, int nvar) : order_(order), nvar_(nvar), constant_(MatrixXd::Zero(order, order)) {}

  void add_constant(int r0, int c0, const MatrixXd& m) {
    constant_.block(r0, c0, m.rows(), m.cols()) += m;
    if (r0 != c0) constant_.block(c0, r0, m.cols(), m.rows()) += m.transpose();
  }

  // Off-diagonal block with r0 + rows <= c0.
  void add_offdiag(int r0, int c0, const AffineMatrix& m) {
    add_constant(r0, c0, m.constant);
    for (int k = 0; k < m.coef.outerSize(); ++k) {
      for (AffineMatrix::Coef::InnerIterator it(m.coef, k); it; ++it) {
        const int i = static_cast<int>(it.row()) % m.rows;
        const int j = static_cast<int>(it.row()) / m.rows;
        trip_.emplace_back(conic::svec_index(r0 + i, c0 + j), k, M_SQRT2 * it.value());
      }
    }
  }

  void add_scaled_identity(int r0, int size, int var) {
    for (int i = 0; i < size; ++i) trip_.emplace_back(conic::svec_index(r0 + i, r0 + i), var, 1.0);
  }

  conic::ConeBlock finish() const {
    conic::ConeBlock b;
    b.kind = conic::ConeKind::psd;
    b.dim = order_;
    b.map.resize(conic::svec_size(order_), nvar_);
    b.map.setFromTriplets(trip_.begin(), trip_.end());
    b.map.makeCompressed();
    b.offset = conic::svec(constant_);
    return b;
  }

 private:
  int order_;
  int nvar_;
  MatrixXd constant_;
  std::vector<Triplet> trip_;
};

AffineMatrix::Coef sparse_kron_identity_left(int c, const MatrixXd& p) {
  // I_c (x) P
  std::vector<Triplet> t;
  for (int j = 0; j < p.cols(); ++j)
    for (int i = 0; i < p.rows(); ++i)
      if (p(i, j) != 0.0)
        for (int b = 0; b < c; ++b) t.emplace_back(b * p.rows() + i, b * p.cols() + j, p(i, j));
  AffineMatrix::Coef k(c * p.rows(), c * p.cols());
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

AffineMatrix::Coef sparse_kron_identity_right(int r, const MatrixXd& s) {
  // S' (x) I_r
  std::vector<Triplet> t;
  for (int j = 0; j < s.cols(); ++j)
    for (int i = 0; i < s.rows(); ++i)
      if (s(i, j) != 0.0)
        for (int a = 0; a < r; ++a) t.emplace_back(j * r + a, i * r + a, s(i, j));
  AffineMatrix::Coef k(s.cols() * r, s.rows() * r);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

}  // namespace

AffineMatrix::AffineMatrix(MatrixXd constant_part, Coef coefficients)
    : rows(static_cast<int>(constant_part.rows())),
      cols(static_cast<int>(constant_part.cols())),
      constant(std::move(constant_part)),
      coef(std::move(coefficients)) {
  if (coef.rows() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("AffineMatrix: coefficient rows must equal rows*cols");
  }
}

AffineMatrix AffineMatrix::left(const MatrixXd& p) const {
  if (p.cols() != rows) throw DimensionError("AffineMatrix::left: inner dimensions differ");
  Coef c = sparse_kron_identity_left(cols, p) * coef;
  c.prune(0.0);
  return AffineMatrix(p * constant, std::move(c));
}

AffineMatrix AffineMatrix::right(const MatrixXd& s) const {
  if (s.rows() != cols) throw DimensionError("AffineMatrix::right: inner dimensions differ");
  Coef c = sparse_kron_identity_right(rows, s) * coef;
  c.prune(0.0);
  return AffineMatrix(constant * s, std::move(c));
}

AffineMatrix AffineMatrix::with_nvar(int nvar) const {
  AffineMatrix out = *this;
  out.coef.conservativeResize(coef.rows(), nvar);
  return out;
}

MatrixXd AffineMatrix::evaluate(const VectorXd& x) const {
  const VectorXd v = coef * x;
  return constant + Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

conic::SparseRows AffineMatrix::vec_map() const { return conic::SparseRows(coef); }

VectorXd AffineMatrix::vec_offset() const {
  return Eigen::Map<const VectorXd>(constant.data(), constant.size());
}

MatrixXd weight_sqrt(const CostWeights& weights, const NumericSettings& settings) {
  const auto nq = weights.q().rows();
  const auto nr = weights.r().rows();
  MatrixXd s = MatrixXd::Zero(nq + nr, nq + nr);
  s.topLeftCorner(nq, nq) = psd_sqrt(weights.q(), settings);
  s.bottomRightCorner(nr, nr) = psd_sqrt(weights.r(), settings);
  return s;
}

conic::ConeBlock assemble_lmi_schur(const AffineMatrix& phi, const CostWeights& weights,
                                    const MatrixXd& benchmark_cost, int lambda_var,
                                    const NumericSettings& settings) {
  const int k = phi.rows;
  const int nw = phi.cols;
  if (k != weights.q().rows() + weights.r().rows()) {
    throw DimensionError("assemble_lmi_schur: response rows do not match the weights");
  }
  if (benchmark_cost.rows() != nw || benchmark_cost.cols() != nw) {
    throw DimensionError("assemble_lmi_schur: benchmark cost must be square of response width");
  }
  if (lambda_var < 0 || lambda_var >= phi.nvar()) {
    throw DimensionError("assemble_lmi_schur: lambda variable out of range");
  }
  const MatrixXd c = 0.5 * (benchmark_cost + benchmark_cost.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -settings.psd_tol * (1.0 + c.norm())) {
    throw NotPsdError("assemble_lmi_schur: benchmark cost is not positive semidefinite");
  }
  SvecAssembler lmi(k + nw, phi.nvar());
  lmi.add_constant(0, 0, MatrixXd::Identity(k, k));
  lmi.add_offdiag(0, k, phi.left(weight_sqrt(weights, settings)));
  lmi.add_constant(k, k, c);
  lmi.add_scaled_identity(k, nw, lambda_var);
  return lmi.finish();
}

conic::ConeBlock assemble_spectral_norm_lmi(const AffineMatrix& m, int gamma_var) {
  if (gamma_var < 0 || gamma_var >= m.nvar()) {
    throw DimensionError("assemble_spectral_norm_lmi: gamma variable out of range");
  }
  SvecAssembler lmi(m.rows + m.cols, m.nvar());
  lmi.add_scaled_identity(0, m.rows + m.cols, gamma_var);
  lmi.add_offdiag(0, m.rows, m);
  return lmi.finish();
}

}  // namespace sls
