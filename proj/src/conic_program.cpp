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

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "sls/conic.hpp"
#include "sls/settings.hpp"

namespace sls::conic {

std::string to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::zero: return "zero";
    case ConeKind::nonneg: return "nonneg";
    case ConeKind::soc: return "soc";
    case ConeKind::psd: return "psd";
  }
  return "unknown";
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::numerical_error: return "numerical_error";
  }
  return "unknown";
}

int svec_size(int d) { return d * (d + 1) / 2; }

int svec_index(int i, int j) { return j * (j + 1) / 2 + i; }

Eigen::VectorXd svec(const Eigen::MatrixXd& s) {
  const int d = static_cast<int>(s.rows());
  Eigen::VectorXd v(svec_size(d));
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < j; ++i) v(svec_index(i, j)) = M_SQRT2 * 0.5 * (s(i, j) + s(j, i));
    v(svec_index(j, j)) = s(j, j);
  }
  return v;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v, int d) {
  if (v.size() != svec_size(d)) throw DimensionError("smat: vector length does not match order");
  Eigen::MatrixXd s(d, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < j; ++i) {
      const double x = v(svec_index(i, j)) / M_SQRT2;
      s(i, j) = x;
      s(j, i) = x;
    }
    s(j, j) = v(svec_index(j, j));
  }
  return s;
}

int ConeBlock::rows() const { return kind == ConeKind::psd ? svec_size(dim) : dim; }

ConicProgram::ConicProgram(int num_vars)
    : nvar(num_vars), objective(Eigen::VectorXd::Zero(num_vars)) {}

int ConicProgram::add_variables(int count) {
  const int first = nvar;
  nvar += count;
  objective.conservativeResize(nvar);
  objective.tail(count).setZero();
  for (auto& b : blocks) b.map.conservativeResize(b.map.rows(), nvar);
  return first;
}

void ConicProgram::add_block(ConeKind kind, int dim, SparseRows map, Eigen::VectorXd offset) {
  ConeBlock b;
  b.kind = kind;
  b.dim = dim;
  b.map = std::move(map);
  b.offset = std::move(offset);
  if (b.map.cols() < nvar) b.map.conservativeResize(b.map.rows(), nvar);
  b.map.makeCompressed();
  blocks.push_back(std::move(b));
}

void ConicProgram::validate() const {
  if (objective.size() != nvar) throw DimensionError("conic program: objective length != nvar");
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    std::ostringstream where;
    where << "conic program block " << k << " (" << to_string(b.kind) << "): ";
    if (b.dim < 1) throw DimensionError(where.str() + "dimension must be positive");
    if (b.map.cols() != nvar) throw DimensionError(where.str() + "map column count != nvar");
    if (b.map.rows() != b.rows() || b.offset.size() != b.rows()) {
      throw DimensionError(where.str() + "row count does not match cone dimension");
    }
  }
}

int ConicProgram::total_rows() const {
  int r = 0;
  for (const auto& b : blocks) r += b.rows();
  return r;
}

Eigen::VectorXd project_onto_cone(ConeKind kind, int dim, const Eigen::VectorXd& v) {
  switch (kind) {
    case ConeKind::zero:
      return Eigen::VectorXd::Zero(v.size());
    case ConeKind::nonneg:
      return v.cwiseMax(0.0);
    case ConeKind::soc: {
      const double t = v(0);
      const double nx = v.tail(dim - 1).norm();
      if (nx <= t) return v;
      if (nx <= -t) return Eigen::VectorXd::Zero(v.size());
      Eigen::VectorXd p(v.size());
      const double a = 0.5 * (t + nx);
      p(0) = a;
      p.tail(dim - 1) = (a / nx) * v.tail(dim - 1);
      return p;
    }
    case ConeKind::psd: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(smat(v, dim));
      const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
      const Eigen::MatrixXd p = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
      return svec(p);
    }
  }
  return v;
}

Residuals evaluate_residuals(const ConicProgram& prog, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& dual) {
  Residuals r;
  Eigen::VectorXd stat = prog.objective;
  double pviol = 0.0;
  double dviol = 0.0;
  double offnorm = 0.0;
  double dobj = 0.0;
  int pos = 0;
  for (const auto& b : prog.blocks) {
    const int rows = b.rows();
    const Eigen::VectorXd img = b.map * x + b.offset;
    const Eigen::VectorXd z = dual.segment(pos, rows);
    pos += rows;
    pviol += (img - project_onto_cone(b.kind, b.dim, img)).squaredNorm();
    if (b.kind != ConeKind::zero) {
      // the cones used here are self-dual
      dviol += (z - project_onto_cone(b.kind, b.dim, z)).squaredNorm();
    }
    stat.noalias() -= b.map.transpose() * z;
    dobj -= b.offset.dot(z);
    offnorm += b.offset.squaredNorm();
  }
  r.primal_objective = prog.objective.dot(x);
  r.dual_objective = dobj;
  r.primal = std::sqrt(pviol) / (1.0 + std::sqrt(offnorm));
  r.dual = std::sqrt(stat.squaredNorm() + dviol) / (1.0 + prog.objective.norm());
  r.gap = std::abs(r.primal_objective - r.dual_objective) /
          (1.0 + std::abs(r.primal_objective) + std::abs(r.dual_objective));
  return r;
}

void dump_program(const ConicProgram& prog, std::ostream& out) {
  out << std::setprecision(17);
  out << "conic_program nvar " << prog.nvar << " blocks " << prog.blocks.size() << "\n";
  out << "objective";
  for (int j = 0; j < prog.nvar; ++j) out << " " << prog.objective(j);
  out << "\n";
  for (const auto& b : prog.blocks) {
    const Eigen::MatrixXd dense(b.map);
    out << to_string(b.kind) << " " << b.dim << " " << b.rows() << " offset";
    for (int i = 0; i < b.rows(); ++i) out << " " << b.offset(i);
    out << " map";
    for (int i = 0; i < b.rows(); ++i) {
      for (int j = 0; j < prog.nvar; ++j) out << " " << dense(i, j);
    }
    out << "\n";
  }
}

}  // namespace sls::conic
