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

#include "sls/synthesis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

namespace sls {

namespace {

using Triplet = Eigen::Triplet<double>;

bool is_exact_identity(const MatrixXd& m) {
  return m.rows() == m.cols() && m == MatrixXd::Identity(m.rows(), m.cols());
}

void check_sigma(const MatrixXd& sigma_w, int nt, const NumericSettings& settings) {
  if (sigma_w.rows() != nt || sigma_w.cols() != nt) {
    throw DimensionError("disturbance covariance must be nT x nT");
  }
  if ((sigma_w - sigma_w.transpose()).cwiseAbs().maxCoeff() >
      settings.symmetry_tol * (1.0 + sigma_w.cwiseAbs().maxCoeff())) {
    throw NotPsdError("disturbance covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma_w, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) <= settings.pd_tol) {
    throw NotPsdError("disturbance covariance is not positive definite");
  }
}

// Right factor S with S S' = sigma; the identity stays exactly the identity
// so the Kronecker structure of the program stays sparse.
MatrixXd covariance_factor(const MatrixXd& sigma_w) {
  if (is_exact_identity(sigma_w)) return sigma_w;
  Eigen::LLT<MatrixXd> llt(sigma_w);
  if (llt.info() != Eigen::Success) throw NotPsdError("disturbance covariance factorization failed");
  return llt.matrixL();
}

conic::SparseRows unit_row(int nvar, int var) {
  conic::SparseRows r(1, nvar);
  r.insert(0, var) = 1.0;
  r.makeCompressed();
  return r;
}

// Shared skeleton: response variables, the scalar objective variable and the
// affine response.
struct Skeleton {
  conic::ConicProgram prog;
  ResponseVariables vars;
  int scalar = -1;
  PlantMaps maps;
  AffineMatrix phi;
  std::optional<SafetyDualization> dual;
};

Skeleton make_skeleton(const LtvSystem& sys, bool causal) {
  Skeleton s;
  s.maps = build_plant_maps(sys);
  s.vars = add_response_variables(s.prog, sys, causal);
  s.scalar = s.prog.add_variables(1);
  s.prog.objective(s.scalar) = 1.0;
  s.phi = response_affine(s.vars, s.maps, s.prog.nvar);
  return s;
}

// Bound rows are tightened by the solver tolerance so that the returned
// certificate holds despite residual infeasibility of the iterate.
void attach_safety(Skeleton& s, const LtvSystem& sys, const std::optional<SafetySpec>& spec,
                   double margin) {
  if (!spec) return;
  spec->validate(sys);
  const AffineMatrix h_phi = s.phi.left(spec->constraint.h_mat());
  s.dual = dualize_safety(s.prog, h_phi, spec->constraint.h_vec(), spec->disturbance_set, margin);
}

SynthesisResult finish(Skeleton& s, const std::string& kind, const SynthesisOptions& options,
                       double (*objective_map)(double), const LtvSystem& sys) {
  const conic::ConicSolution sol = conic::solve(s.prog, options.solver);
  SynthesisResult out;
  out.kind = kind;
  out.report = sol.report;
  if (sol.report.status != conic::SolveStatus::optimal &&
      sol.report.status != conic::SolveStatus::max_iterations &&
      sol.report.status != conic::SolveStatus::numerical_error) {
    return out;
  }
  if (sol.x.size() != s.prog.nvar || !sol.x.allFinite()) return out;
  out.response = materialize_response(s.vars, s.maps, sol.x);
  out.objective_value = objective_map(sol.x(s.scalar));
  if (s.dual) out.certificate = s.dual->certificate(sol.x);
  if (out.optimal()) check_response(out.response, sys, options.settings);
  return out;
}

double identity_map(double v) { return v; }
double square_map(double v) { return v * v; }

SynthesisResult h2_program(const LtvSystem& sys, const CostWeights& weights,
                           const MatrixXd& sigma_w, const std::optional<SafetySpec>& spec,
                           const SynthesisOptions& options, bool causal, const std::string& kind) {
  Skeleton s = make_skeleton(sys, causal);
  const AffineMatrix m = s.phi.left(weight_sqrt(weights, options.settings))
                             .right(covariance_factor(sigma_w));
  attach_safety(s, sys, spec, options.solver.tol);
  const int nvar = s.prog.nvar;
  const AffineMatrix mm = m.with_nvar(nvar);
  const int len = mm.rows * mm.cols;

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(mm.coef.nonZeros()) + 1);
  trips.emplace_back(0, s.scalar, 1.0);
  for (int k = 0; k < mm.coef.outerSize(); ++k) {
    for (AffineMatrix::Coef::InnerIterator it(mm.coef, k); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()) + 1, k, it.value());
    }
  }
  conic::SparseRows map(len + 1, nvar);
  map.setFromTriplets(trips.begin(), trips.end());
  VectorXd offset(len + 1);
  offset(0) = 0.0;
  offset.tail(len) = mm.vec_offset();
  s.prog.add_block(conic::ConeKind::soc, len + 1, std::move(map), std::move(offset));
  return finish(s, kind, options, square_map, sys);
}

SynthesisResult hinf_program(const LtvSystem& sys, const CostWeights& weights,
                             const std::optional<SafetySpec>& spec,
                             const SynthesisOptions& options, bool causal,
                             const std::string& kind) {
  Skeleton s = make_skeleton(sys, causal);
  const AffineMatrix m = s.phi.left(weight_sqrt(weights, options.settings));
  attach_safety(s, sys, spec, options.solver.tol);
  conic::ConeBlock lmi = assemble_spectral_norm_lmi(m.with_nvar(s.prog.nvar), s.scalar);
  s.prog.add_block(lmi.kind, lmi.dim, std::move(lmi.map), std::move(lmi.offset));
  return finish(s, kind, options, square_map, sys);
}

// Unconstrained H2 is a least-squares problem over the free entries of Phi_u.
SynthesisResult h2_least_squares(const LtvSystem& sys, const CostWeights& weights,
                                 const MatrixXd& sigma_w, const SynthesisOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const PlantMaps maps = build_plant_maps(sys);
  const int nt = static_cast<int>(maps.g.rows());
  const int mt = static_cast<int>(maps.f.cols());
  conic::ConicProgram scratch;
  const ResponseVariables vars = add_response_variables(scratch, sys, true);

  // Objective tr((Phi0 + L U)' W (Phi0 + L U) Sigma) with L = [F; I].
  const MatrixXd mq = maps.f.transpose() * weights.q() * maps.f + weights.r();
  const MatrixXd nq = maps.f.transpose() * weights.q() * maps.g * sigma_w;

  std::vector<std::pair<int, int>> entries(static_cast<std::size_t>(vars.count));
  for (int b = 0; b < nt; ++b) {
    for (int a = 0; a < mt; ++a) {
      const int k = vars.index(a, b);
      if (k >= 0) entries[static_cast<std::size_t>(k - vars.first)] = {a, b};
    }
  }
  MatrixXd kkt(vars.count, vars.count);
  VectorXd rhs(vars.count);
  for (int p = 0; p < vars.count; ++p) {
    const auto [a, b] = entries[static_cast<std::size_t>(p)];
    rhs(p) = -nq(a, b);
    for (int q = 0; q < vars.count; ++q) {
      const auto [a2, b2] = entries[static_cast<std::size_t>(q)];
      kkt(p, q) = mq(a, a2) * sigma_w(b2, b);
    }
  }
  Eigen::LLT<MatrixXd> llt(kkt);
  if (llt.info() != Eigen::Success) throw NotPsdError("h2 normal equations are not definite");
  const VectorXd u = llt.solve(rhs);

  VectorXd x = VectorXd::Zero(vars.first + vars.count);
  x.segment(vars.first, vars.count) = u;
  SynthesisResult out;
  out.kind = "h2";
  out.response = materialize_response(vars, maps, x);
  const MatrixXd phi = out.response.stacked();
  out.objective_value = (phi.transpose() * weights.joint() * phi * sigma_w).trace();
  out.report.status = conic::SolveStatus::optimal;
  out.report.objective_value = out.objective_value;
  out.report.primal_residual = (kkt * u - rhs).norm() / (1.0 + rhs.norm());
  out.report.iterations = 0;
  out.report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check_response(out.response, sys, options.settings);
  return out;
}

}  // namespace

void SafetySpec::validate(const LtvSystem& sys) const {
  const int nt = sys.n() * sys.horizon();
  const int st = (sys.n() + sys.m()) * sys.horizon();
  if (constraint.dim() != st) {
    throw DimensionError("safety constraint must act on the stacked (x, u) trajectory");
  }
  if (disturbance_set.dim() != nt) {
    throw DimensionError("disturbance set must act on the stacked disturbance");
  }
  validate_disturbance_set(disturbance_set);
}

CertificateCheck check_certificate(const DualCertificate& cert, const ClosedLoopResponse& resp,
                                   const SafetySpec& spec) {
  const MatrixXd& h = spec.constraint.h_mat();
  const MatrixXd& hw = spec.disturbance_set.h_mat();
  if (cert.z.rows() != hw.rows() || cert.z.cols() != h.rows()) {
    throw DimensionError("certificate shape does not match the safety specification");
  }
  CertificateCheck c;
  c.bound_violation =
      (cert.z.transpose() * spec.disturbance_set.h_vec() - spec.constraint.h_vec()).maxCoeff();
  c.equality_error = (h * resp.stacked() - cert.z.transpose() * hw).cwiseAbs().maxCoeff();
  c.min_entry = cert.z.size() > 0 ? cert.z.minCoeff() : 0.0;
  return c;
}

Benchmark Benchmark::clairvoyant(const ClairvoyantResult& r) {
  return {"clairvoyant", 0.5 * (r.cost_operator + r.cost_operator.transpose())};
}

Benchmark safe_benchmark(const SynthesisResult& r, const CostWeights& weights) {
  const MatrixXd phi = r.response.stacked();
  if (phi.size() == 0) throw ContractViolation("safe benchmark requires a solved response");
  MatrixXd c = phi.transpose() * weights.joint() * phi;
  return {"safe_" + r.kind, 0.5 * (c + c.transpose())};
}

ResponseVariables add_response_variables(conic::ConicProgram& prog, const LtvSystem& sys,
                                         bool causal) {
  const int n = sys.n();
  const int m = sys.m();
  const int nt = n * sys.horizon();
  const int mt = m * sys.horizon();
  ResponseVariables v;
  v.causal = causal;
  v.index = Eigen::MatrixXi::Constant(mt, nt, -1);
  v.first = prog.nvar;
  int count = 0;
  for (int b = 0; b < nt; ++b) {
    for (int a = 0; a < mt; ++a) {
      if (!causal || a / m >= b / n) v.index(a, b) = v.first + count++;
    }
  }
  v.count = count;
  prog.add_variables(count);
  return v;
}

AffineMatrix response_affine(const ResponseVariables& vars, const PlantMaps& maps, int nvar) {
  const int nt = static_cast<int>(maps.g.rows());
  const int mt = static_cast<int>(maps.f.cols());
  const int rows = nt + mt;
  MatrixXd constant = MatrixXd::Zero(rows, nt);
  constant.topRows(nt) = maps.g;
  std::vector<Triplet> trips;
  for (int b = 0; b < nt; ++b) {
    for (int a = 0; a < mt; ++a) {
      const int k = vars.index(a, b);
      if (k < 0) continue;
      for (int i = 0; i < nt; ++i) {
        if (maps.f(i, a) != 0.0) trips.emplace_back(i + b * rows, k, maps.f(i, a));
      }
      trips.emplace_back(nt + a + b * rows, k, 1.0);
    }
  }
  AffineMatrix::Coef coef(rows * nt, nvar);
  coef.setFromTriplets(trips.begin(), trips.end());
  return AffineMatrix(std::move(constant), std::move(coef));
}

ClosedLoopResponse materialize_response(const ResponseVariables& vars, const PlantMaps& maps,
                                        const VectorXd& x) {
  ClosedLoopResponse r;
  r.phi_u = MatrixXd::Zero(vars.index.rows(), vars.index.cols());
  for (int b = 0; b < vars.index.cols(); ++b) {
    for (int a = 0; a < vars.index.rows(); ++a) {
      const int k = vars.index(a, b);
      if (k >= 0) r.phi_u(a, b) = x(k);
    }
  }
  r.phi_x = maps.g + maps.f * r.phi_u;
  r.causal = vars.causal;
  return r;
}

DualCertificate SafetyDualization::certificate(const VectorXd& x) const {
  DualCertificate c;
  c.z.resize(rows_w, rows_h);
  for (int i = 0; i < rows_h; ++i) {
    for (int k = 0; k < rows_w; ++k) c.z(k, i) = std::max(0.0, x(z_first + i * rows_w + k));
  }
  return c;
}

SafetyDualization dualize_safety(conic::ConicProgram& prog, const AffineMatrix& h_phi,
                                 const VectorXd& h, const PolytopeSet& disturbance_set,
                                 double margin) {
  if (!(margin >= 0.0)) throw ContractViolation("dualize_safety: margin must be nonnegative");
  if (h_phi.rows != h.size()) throw DimensionError("dualize_safety: bound length differs from rows");
  if (h_phi.cols != disturbance_set.dim()) {
    throw DimensionError("dualize_safety: response width differs from disturbance dimension");
  }
  if (h_phi.nvar() != prog.nvar) throw DimensionError("dualize_safety: variable count mismatch");
  SafetyDualization d;
  d.rows_h = h_phi.rows;
  d.rows_w = disturbance_set.rows();
  d.z_first = prog.add_variables(d.rows_w * d.rows_h);
  const int nvar = prog.nvar;
  const MatrixXd& hw = disturbance_set.h_mat();
  const VectorXd& hwv = disturbance_set.h_vec();
  const int nw = h_phi.cols;
  auto zvar = [&](int k, int i) { return d.z_first + i * d.rows_w + k; };

  // vec(H Phi) - vec(Z' H_w) = 0, entry (i, j) at i + j * rows_h
  {
    std::vector<Triplet> trips;
    for (int j = 0; j < nw; ++j) {
      for (int k = 0; k < d.rows_w; ++k) {
        const double v = hw(k, j);
        if (v == 0.0) continue;
        for (int i = 0; i < d.rows_h; ++i) trips.emplace_back(i + j * d.rows_h, zvar(k, i), -v);
      }
    }
    conic::SparseRows zpart(d.rows_h * nw, nvar);
    zpart.setFromTriplets(trips.begin(), trips.end());
    conic::SparseRows map = h_phi.with_nvar(nvar).vec_map();
    map += zpart;
    map.prune(0.0);
    prog.add_block(conic::ConeKind::zero, d.rows_h * nw, std::move(map), h_phi.vec_offset());
  }
  // Z >= 0
  {
    const int nz = d.rows_w * d.rows_h;
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(nz));
    for (int p = 0; p < nz; ++p) trips.emplace_back(p, d.z_first + p, 1.0);
    conic::SparseRows map(nz, nvar);
    map.setFromTriplets(trips.begin(), trips.end());
    prog.add_block(conic::ConeKind::nonneg, nz, std::move(map), VectorXd::Zero(nz));
  }
  // h - Z' h_w >= 0
  {
    std::vector<Triplet> trips;
    for (int i = 0; i < d.rows_h; ++i) {
      for (int k = 0; k < d.rows_w; ++k) {
        if (hwv(k) != 0.0) trips.emplace_back(i, zvar(k, i), -hwv(k));
      }
    }
    conic::SparseRows map(d.rows_h, nvar);
    map.setFromTriplets(trips.begin(), trips.end());
    const VectorXd bound = h.array() - margin * (1.0 + h.array().abs());
    prog.add_block(conic::ConeKind::nonneg, d.rows_h, std::move(map), bound);
  }
  return d;
}

SynthesisResult synth_h2(const LtvSystem& sys, const CostWeights& weights, const MatrixXd& sigma_w,
                         const std::optional<SafetySpec>& spec, const SynthesisOptions& options) {
  check_sigma(sigma_w, sys.n() * sys.horizon(), options.settings);
  if (!spec) return h2_least_squares(sys, weights, sigma_w, options);
  return h2_program(sys, weights, sigma_w, spec, options, true, "h2");
}

SynthesisResult synth_hinf(const LtvSystem& sys, const CostWeights& weights,
                           const std::optional<SafetySpec>& spec, const SynthesisOptions& options) {
  return hinf_program(sys, weights, spec, options, true, "hinf");
}

SynthesisResult synth_safe_clairvoyant(const LtvSystem& sys, const CostWeights& weights,
                                       const SafetySpec& spec, BenchmarkMode mode,
                                       const MatrixXd& sigma_w, const SynthesisOptions& options) {
  if (mode == BenchmarkMode::h2) {
    check_sigma(sigma_w, sys.n() * sys.horizon(), options.settings);
    return h2_program(sys, weights, sigma_w, spec, options, false, "clairvoyant_h2");
  }
  return hinf_program(sys, weights, spec, options, false, "clairvoyant_hinf");
}

SynthesisResult synth_regret(const LtvSystem& sys, const CostWeights& weights,
                             const std::optional<SafetySpec>& spec, const Benchmark& benchmark,
                             const SynthesisOptions& options) {
  Skeleton s = make_skeleton(sys, true);
  attach_safety(s, sys, spec, options.solver.tol);
  const int nvar = s.prog.nvar;
  conic::ConeBlock lmi = assemble_lmi_schur(s.phi.with_nvar(nvar), weights, benchmark.cost,
                                            s.scalar, options.settings);
  s.prog.add_block(lmi.kind, lmi.dim, std::move(lmi.map), std::move(lmi.offset));
  s.prog.add_block(conic::ConeKind::nonneg, 1, unit_row(nvar, s.scalar),
                   VectorXd::Constant(1, -options.settings.lambda_floor));
  SynthesisResult out = finish(s, "regret", options, identity_map, sys);
  out.benchmark_id = benchmark.id;
  return out;
}

double regret_value(const ClosedLoopResponse& resp, const MatrixXd& benchmark_cost,
                    const CostWeights& weights) {
  const MatrixXd phi = resp.stacked();
  if (phi.rows() != weights.joint().rows() || benchmark_cost.rows() != phi.cols() ||
      benchmark_cost.cols() != phi.cols()) {
    throw DimensionError("regret_value: dimension mismatch");
  }
  MatrixXd delta = phi.transpose() * weights.joint() * phi - benchmark_cost;
  delta = 0.5 * (delta + delta.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(delta, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

}  // namespace sls
