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

#include "sls/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sls/conic.hpp"

namespace sls {
namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidSystemError(msg);
}

double min_eig(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double asymmetry(const MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

LtvSystem::LtvSystem(int n, int m, int horizon, std::vector<MatrixXd> a, std::vector<MatrixXd> b)
    : n_(n), m_(m), horizon_(horizon), a_(std::move(a)), b_(std::move(b)) {
  require(n_ >= 1 && m_ >= 1, "LtvSystem: dimensions n and m must be at least 1");
  require(horizon_ >= 1, "LtvSystem: horizon must be at least 1");
  require(static_cast<int>(a_.size()) == horizon_ - 1,
          "LtvSystem: expected T-1 state matrices");
  require(static_cast<int>(b_.size()) == horizon_ - 1,
          "LtvSystem: expected T-1 input matrices");
  for (std::size_t t = 0; t < a_.size(); ++t) {
    std::ostringstream os;
    os << "LtvSystem: A_" << t << " must be " << n_ << "x" << n_;
    require(a_[t].rows() == n_ && a_[t].cols() == n_, os.str());
    os.str("");
    os << "LtvSystem: B_" << t << " must be " << n_ << "x" << m_;
    require(b_[t].rows() == n_ && b_[t].cols() == m_, os.str());
    require(a_[t].allFinite() && b_[t].allFinite(), "LtvSystem: non-finite entries");
  }
}

LtvSystem LtvSystem::time_invariant(const MatrixXd& a, const MatrixXd& b, int horizon) {
  require(horizon >= 1, "LtvSystem: horizon must be at least 1");
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  return LtvSystem(n, m, horizon, std::vector<MatrixXd>(horizon - 1, a),
                   std::vector<MatrixXd>(horizon - 1, b));
}

BlockOperators build_block_operators(const LtvSystem& sys) {
  const int n = sys.n();
  const int m = sys.m();
  const int T = sys.horizon();
  BlockOperators ops;
  ops.z = MatrixXd::Zero(n * T, n * T);
  ops.a = MatrixXd::Zero(n * T, n * T);
  ops.b = MatrixXd::Zero(n * T, m * T);
  for (int t = 0; t + 1 < T; ++t) {
    ops.z.block((t + 1) * n, t * n, n, n).setIdentity();
    ops.a.block(t * n, t * n, n, n) = sys.a()[t];
    ops.b.block(t * n, t * m, n, m) = sys.b()[t];
  }
  return ops;
}

PlantMaps build_plant_maps(const LtvSystem& sys) {
  const int n = sys.n();
  const int m = sys.m();
  const int T = sys.horizon();
  PlantMaps maps;
  maps.g = MatrixXd::Zero(n * T, n * T);
  maps.f = MatrixXd::Zero(n * T, m * T);
  for (int k = 0; k < T; ++k) {
    maps.g.block(k * n, k * n, n, n).setIdentity();
    for (int t = k + 1; t < T; ++t) {
      maps.g.block(t * n, k * n, n, n) = sys.a()[t - 1] * maps.g.block((t - 1) * n, k * n, n, n);
    }
  }
  for (int k = 0; k + 1 < T; ++k) {
    for (int t = k + 1; t < T; ++t) {
      maps.f.block(t * n, k * m, n, m) = maps.g.block(t * n, (k + 1) * n, n, n) * sys.b()[k];
    }
  }
  return maps;
}

CostWeights::CostWeights(MatrixXd q, MatrixXd r, const NumericSettings& settings)
    : q_(std::move(q)), r_(std::move(r)) {
  if (q_.rows() != q_.cols() || r_.rows() != r_.cols()) {
    throw DimensionError("CostWeights: Q and R must be square");
  }
  if (asymmetry(q_) > settings.symmetry_tol) throw NotPsdError("CostWeights: Q is not symmetric");
  if (asymmetry(r_) > settings.symmetry_tol) throw NotPsdError("CostWeights: R is not symmetric");
  if (min_eig(q_) < -settings.psd_tol) throw NotPsdError("CostWeights: Q is not positive semidefinite");
  if (min_eig(r_) < settings.pd_tol) throw NotPsdError("CostWeights: R is not positive definite");
}

CostWeights CostWeights::identity(const LtvSystem& sys) {
  const int T = sys.horizon();
  return CostWeights(MatrixXd::Identity(sys.n() * T, sys.n() * T),
                     MatrixXd::Identity(sys.m() * T, sys.m() * T));
}

MatrixXd CostWeights::joint() const {
  const auto nq = q_.rows();
  const auto nr = r_.rows();
  MatrixXd w = MatrixXd::Zero(nq + nr, nq + nr);
  w.topLeftCorner(nq, nq) = q_;
  w.bottomRightCorner(nr, nr) = r_;
  return w;
}

void StackedSignal::validate(const LtvSystem& sys) const {
  const int expected = (kind == SignalKind::input ? sys.m() : sys.n()) * sys.horizon();
  if (data.size() != expected) {
    std::ostringstream os;
    os << "StackedSignal: expected length " << expected << ", got " << data.size();
    throw DimensionError(os.str());
  }
}

MatrixXd ClosedLoopResponse::stacked() const {
  MatrixXd s(phi_x.rows() + phi_u.rows(), phi_x.cols());
  s << phi_x, phi_u;
  return s;
}

double achievability_residual(const ClosedLoopResponse& resp, const LtvSystem& sys) {
  const int nT = sys.n() * sys.horizon();
  const int mT = sys.m() * sys.horizon();
  if (resp.phi_x.rows() != nT || resp.phi_x.cols() != nT || resp.phi_u.rows() != mT ||
      resp.phi_u.cols() != nT) {
    throw DimensionError("achievability_residual: response dimensions do not match the system");
  }
  const BlockOperators ops = build_block_operators(sys);
  const MatrixXd za = ops.z * ops.a;
  const MatrixXd zb = ops.z * ops.b;
  const MatrixXd r = resp.phi_x - za * resp.phi_x - zb * resp.phi_u - MatrixXd::Identity(nT, nT);
  return r.norm();
}

bool is_block_lower(const MatrixXd& m, int row_block, int col_block) {
  const int rb = static_cast<int>(m.rows()) / row_block;
  const int cb = static_cast<int>(m.cols()) / col_block;
  for (int i = 0; i < rb; ++i) {
    for (int j = i + 1; j < cb; ++j) {
      if ((m.block(i * row_block, j * col_block, row_block, col_block).array() != 0.0).any()) {
        return false;
      }
    }
  }
  return true;
}

void check_response(const ClosedLoopResponse& resp, const LtvSystem& sys,
                    const NumericSettings& settings) {
  const double res = achievability_residual(resp, sys);
  if (!(res <= settings.achievability_tol * (1.0 + resp.phi_x.norm()))) {
    std::ostringstream os;
    os << "response is not achievable: residual " << res;
    throw ContractViolation(os.str());
  }
  if (resp.causal && (!is_block_lower(resp.phi_x, sys.n(), sys.n()) ||
                      !is_block_lower(resp.phi_u, sys.m(), sys.n()))) {
    throw ContractViolation("response is flagged causal but has blocks above the diagonal");
  }
}

ClosedLoopResponse zero_controller_response(const LtvSystem& sys) {
  ClosedLoopResponse r;
  r.phi_x = build_plant_maps(sys).g;
  r.phi_u = MatrixXd::Zero(sys.m() * sys.horizon(), sys.n() * sys.horizon());
  r.causal = true;
  return r;
}

CausalController::CausalController(MatrixXd k, int n, int m) : k_(std::move(k)) {
  if (k_.rows() % m != 0 || k_.cols() % n != 0 || k_.rows() / m != k_.cols() / n) {
    throw DimensionError("CausalController: K must be mT x nT");
  }
  if (!is_block_lower(k_, m, n)) {
    throw ContractViolation("CausalController: K has nonzero blocks above the block diagonal");
  }
}

ControllerRecovery recover_controller(const ClosedLoopResponse& resp, const LtvSystem& sys,
                                      const NumericSettings& settings) {
  if (!resp.causal || !is_block_lower(resp.phi_u, sys.m(), sys.n()) ||
      !is_block_lower(resp.phi_x, sys.n(), sys.n())) {
    throw ContractViolation("recover_controller: response is not causal");
  }
  const int nT = static_cast<int>(resp.phi_x.rows());
  // block lower with identity diagonal blocks, hence unit lower triangular
  const MatrixXd inv =
      resp.phi_x.triangularView<Eigen::UnitLower>().solve(MatrixXd::Identity(nT, nT));
  MatrixXd k = resp.phi_u * inv;
  Eigen::JacobiSVD<MatrixXd> svd(resp.phi_x);
  const auto sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  return ControllerRecovery{CausalController(std::move(k), sys.n(), sys.m()), cond,
                            !(cond <= settings.ill_conditioned)};
}

ClosedLoopResponse response_from_controller(const CausalController& k, const LtvSystem& sys) {
  const BlockOperators ops = build_block_operators(sys);
  const int nT = sys.n() * sys.horizon();
  const MatrixXd m = MatrixXd::Identity(nT, nT) - ops.z * (ops.a + ops.b * k.k());
  ClosedLoopResponse r;
  r.phi_x = m.triangularView<Eigen::UnitLower>().solve(MatrixXd::Identity(nT, nT));
  r.phi_u = k.k() * r.phi_x;
  r.causal = true;
  return r;
}

double evaluate_cost(const StackedSignal& w, const StackedSignal& u, const CostWeights& weights,
                     const PlantMaps& maps) {
  if (w.data.size() != maps.g.cols() || u.data.size() != maps.f.cols()) {
    throw DimensionError("evaluate_cost: signal lengths do not match the plant maps");
  }
  const VectorXd x = maps.f * u.data + maps.g * w.data;
  const double c = x.dot(weights.q() * x) + u.data.dot(weights.r() * u.data);
  return std::max(0.0, c);
}

MatrixXd psd_sqrt(const MatrixXd& m, const NumericSettings& settings) {
  if (m.rows() != m.cols()) throw DimensionError("psd_sqrt: matrix must be square");
  if (m.size() == 0) return m;
  if (asymmetry(m) > settings.symmetry_tol * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw NotPsdError("psd_sqrt: matrix is not symmetric");
  }
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  const VectorXd ev = es.eigenvalues();
  if (ev(0) < -settings.psd_tol) {
    std::ostringstream os;
    os << "psd_sqrt: smallest eigenvalue " << ev(0) << " is below -" << settings.psd_tol;
    throw NotPsdError(os.str());
  }
  const VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  const MatrixXd s = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

PolytopeSet::PolytopeSet(MatrixXd h_mat, VectorXd h_vec)
    : h_mat_(std::move(h_mat)), h_vec_(std::move(h_vec)) {
  if (h_mat_.rows() != h_vec_.size()) {
    throw DimensionError("PolytopeSet: row count of H must equal the length of h");
  }
  if (h_mat_.cols() < 1) throw DimensionError("PolytopeSet: dimension must be positive");
  const int d = dim();
  VectorXd lo = VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
  VectorXd hi = lo;
  bool is_box = true;
  for (int i = 0; i < rows() && is_box; ++i) {
    int nz = -1;
    for (int j = 0; j < d; ++j) {
      if (h_mat_(i, j) != 0.0) {
        if (nz >= 0) {
          is_box = false;
          break;
        }
        nz = j;
      }
    }
    if (!is_box || nz < 0) {
      is_box = false;
      break;
    }
    const double a = h_mat_(i, nz);
    const double bound = h_vec_(i) / a;
    if (a > 0) {
      if (!std::isnan(hi(nz))) is_box = false;
      hi(nz) = bound;
    } else {
      if (!std::isnan(lo(nz))) is_box = false;
      lo(nz) = bound;
    }
  }
  if (is_box && !lo.array().isNaN().any() && !hi.array().isNaN().any()) {
    box_ = std::make_pair(lo, hi);
  }
}

PolytopeSet PolytopeSet::box(const VectorXd& lo, const VectorXd& hi) {
  if (lo.size() != hi.size()) throw DimensionError("PolytopeSet::box: bound lengths differ");
  const int d = static_cast<int>(lo.size());
  MatrixXd h(2 * d, d);
  h << MatrixXd::Identity(d, d), -MatrixXd::Identity(d, d);
  VectorXd v(2 * d);
  v << hi, -lo;
  return PolytopeSet(std::move(h), std::move(v));
}

bool PolytopeSet::contains(const VectorXd& v, double tol) const {
  return ((h_mat_ * v - h_vec_).array() <= tol).all();
}

double PolytopeSet::support(const VectorXd& c) const {
  if (c.size() != dim()) throw DimensionError("PolytopeSet::support: direction length mismatch");
  if (box_) {
    const auto& [lo, hi] = *box_;
    return c.cwiseProduct(hi).cwiseMax(c.cwiseProduct(lo)).sum();
  }
  const VectorXd p = support_point(c);
  if (!p.allFinite()) return std::numeric_limits<double>::infinity();
  return c.dot(p);
}

VectorXd PolytopeSet::support_point(const VectorXd& c) const {
  if (box_) {
    const auto& [lo, hi] = *box_;
    VectorXd p(dim());
    for (int i = 0; i < dim(); ++i) p(i) = c(i) >= 0.0 ? hi(i) : lo(i);
    return p;
  }
  conic::ConicProgram lp(dim());
  lp.objective = -c;
  lp.add_block(conic::ConeKind::nonneg, rows(), conic::SparseRows((-h_mat_).sparseView()),
               h_vec_);
  const auto sol = conic::solve(lp, 1e-9);
  if (sol.report.status == conic::SolveStatus::unbounded) {
    return VectorXd::Constant(dim(), std::numeric_limits<double>::infinity());
  }
  if (sol.report.status != conic::SolveStatus::optimal) {
    throw InvalidSetError("PolytopeSet: support LP failed with status " +
                          conic::to_string(sol.report.status));
  }
  return sol.x;
}

PolytopeSet PolytopeSet::scaled(double factor) const { return PolytopeSet(h_mat_, factor * h_vec_); }

void validate_disturbance_set(const PolytopeSet& w) {
  if (!(w.h_vec().array() > 0.0).all()) {
    throw InvalidSetError("disturbance set must contain the origin in its interior (h > 0)");
  }
  for (int i = 0; i < w.dim(); ++i) {
    for (double sign : {1.0, -1.0}) {
      const VectorXd e = sign * VectorXd::Unit(w.dim(), i);
      if (!std::isfinite(w.support(e))) {
        std::ostringstream os;
        os << "disturbance set is unbounded along coordinate " << i;
        throw InvalidSetError(os.str());
      }
    }
  }
}

}  // namespace sls
