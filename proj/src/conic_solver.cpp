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
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "cone_ops.hpp"
#include "sls/conic.hpp"
#include "sls/settings.hpp"

namespace sls::conic {
namespace {

using detail::ConeLayout;
using detail::Scaling;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SpCol = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Eliminates equality rows that own a variable appearing in no other
// equality row. x_full = sub * x + shift.
struct Presolve {
  SpCol sub;
  VectorXd shift;
  int n = 0;
  // per global equality row: pivot variable (or -1) and its coefficient
  std::vector<int> pivot_var;
  std::vector<double> pivot_coef;
  // per global equality row: index among the kept rows (or -1)
  std::vector<int> kept_index;
  int kept = 0;
  SpMat eq;         // all equality rows over the full variables
  VectorXd eq_rhs;  // eq * x = eq_rhs
};

Presolve presolve(const ConicProgram& prog) {
  Presolve p;
  const int nvar = prog.nvar;
  std::vector<Triplet> trip;
  std::vector<double> rhs;
  int nrow = 0;
  for (const auto& b : prog.blocks) {
    if (b.kind != ConeKind::zero) continue;
    for (int i = 0; i < b.rows(); ++i) {
      for (SpMat::InnerIterator it(b.map, i); it; ++it) {
        if (it.value() != 0.0) trip.emplace_back(nrow, static_cast<int>(it.col()), it.value());
      }
      rhs.push_back(-b.offset(i));
      ++nrow;
    }
  }
  p.eq.resize(nrow, nvar);
  p.eq.setFromTriplets(trip.begin(), trip.end());
  p.eq_rhs = Eigen::Map<VectorXd>(rhs.data(), nrow);

  std::vector<int> count(nvar, 0);
  for (int i = 0; i < nrow; ++i) {
    for (SpMat::InnerIterator it(p.eq, i); it; ++it) ++count[it.col()];
  }
  p.pivot_var.assign(nrow, -1);
  p.pivot_coef.assign(nrow, 0.0);
  p.kept_index.assign(nrow, -1);
  std::vector<char> is_pivot(nvar, 0);
  for (int i = 0; i < nrow; ++i) {
    double rowmax = 0.0;
    for (SpMat::InnerIterator it(p.eq, i); it; ++it) rowmax = std::max(rowmax, std::abs(it.value()));
    int best = -1;
    double bestval = 0.0;
    for (SpMat::InnerIterator it(p.eq, i); it; ++it) {
      const double a = std::abs(it.value());
      if (count[it.col()] == 1 && a >= 1e-3 * rowmax && a > bestval) {
        best = static_cast<int>(it.col());
        bestval = a;
      }
    }
    if (best >= 0) {
      p.pivot_var[i] = best;
      p.pivot_coef[i] = p.eq.coeff(i, best);
      is_pivot[best] = 1;
    } else {
      p.kept_index[i] = p.kept++;
    }
  }

  std::vector<int> reduced(nvar, -1);
  for (int v = 0; v < nvar; ++v) {
    if (!is_pivot[v]) reduced[v] = p.n++;
  }
  std::vector<Triplet> st;
  p.shift = VectorXd::Zero(nvar);
  for (int v = 0; v < nvar; ++v) {
    if (reduced[v] >= 0) st.emplace_back(v, reduced[v], 1.0);
  }
  for (int i = 0; i < nrow; ++i) {
    const int pv = p.pivot_var[i];
    if (pv < 0) continue;
    const double a = p.pivot_coef[i];
    p.shift(pv) = p.eq_rhs(i) / a;
    for (SpMat::InnerIterator it(p.eq, i); it; ++it) {
      if (it.col() == pv) continue;
      st.emplace_back(pv, reduced[it.col()], -it.value() / a);
    }
  }
  p.sub.resize(nvar, p.n);
  p.sub.setFromTriplets(st.begin(), st.end());
  return p;
}

// min c'x  s.t.  A x = b,  G x + s = h,  s in K (nonneg, soc, psd order).
struct Standard {
  int n = 0;
  VectorXd c, b, h;
  SpMat A, G;
  ConeLayout layout;
  std::vector<int> block_start;  // internal row start per original block (-1 for zero)
};

Standard build_standard(const ConicProgram& prog, const Presolve& pre) {
  Standard sf;
  sf.n = pre.n;
  sf.c = pre.sub.transpose() * prog.objective;

  std::vector<int> order;
  for (ConeKind kind : {ConeKind::nonneg, ConeKind::soc, ConeKind::psd}) {
    for (std::size_t k = 0; k < prog.blocks.size(); ++k) {
      if (prog.blocks[k].kind == kind) order.push_back(static_cast<int>(k));
    }
  }
  sf.block_start.assign(prog.blocks.size(), -1);
  std::vector<Triplet> trip;
  std::vector<double> hv;
  int row = 0;
  for (int k : order) {
    const auto& blk = prog.blocks[k];
    sf.block_start[k] = row;
    if (blk.kind == ConeKind::nonneg) {
      sf.layout.nonneg += blk.rows();
    } else if (blk.kind == ConeKind::soc) {
      sf.layout.soc.push_back({row, blk.dim});
    } else {
      sf.layout.psd.push_back({row, blk.dim});
    }
    const SpMat m = blk.map * pre.sub;
    const VectorXd off = blk.offset + blk.map * pre.shift;
    for (int i = 0; i < m.rows(); ++i) {
      for (SpMat::InnerIterator it(m, i); it; ++it) {
        if (it.value() != 0.0) trip.emplace_back(row + i, static_cast<int>(it.col()), -it.value());
      }
      hv.push_back(off(i));
    }
    row += blk.rows();
  }
  sf.layout.rows = row;
  sf.G.resize(row, sf.n);
  sf.G.setFromTriplets(trip.begin(), trip.end());
  sf.h = Eigen::Map<VectorXd>(hv.data(), row);

  std::vector<Triplet> at;
  sf.b.resize(pre.kept);
  const SpMat eqr = pre.eq * pre.sub;
  const VectorXd eqoff = pre.eq * pre.shift;
  for (int i = 0; i < eqr.rows(); ++i) {
    const int k = pre.kept_index[i];
    if (k < 0) continue;
    for (SpMat::InnerIterator it(eqr, i); it; ++it) {
      if (it.value() != 0.0) at.emplace_back(k, static_cast<int>(it.col()), it.value());
    }
    sf.b(k) = pre.eq_rhs(i) - eqoff(i);
  }
  sf.A.resize(pre.kept, sf.n);
  sf.A.setFromTriplets(at.begin(), at.end());
  return sf;
}

// Factors H = G' (W'W)^{-1} G + delta*I and applies its inverse.
// diagonal block; nonneg rows with many nonzeros enter as dense rank-one terms.
// diagonal block; nonneg rows with many nonzeros enter through Woodbury.
class NormalSolver {
 public:
  NormalSolver(const Standard& sf, const SolverOptions& opt) : sf_(sf) { setup(opt); }

  bool factor(const Scaling& w);
  MatrixXd solve(const MatrixXd& r) const;
  int core_count() const { return static_cast<int>(core_vars_.size()); }
  int aux_count() const { return static_cast<int>(aux_vars_.size()); }
  int dense_row_count() const { return static_cast<int>(dense_.size()); }

 private:
  struct RowInfo {
    int row = 0;
    int aux = -1;  // local aux index
    double aux_coef = 0.0;
    std::vector<int> idx;  // core local, ascending
    std::vector<double> val;
  };
  // A nonneg row folded in through a dense rank-one update. Its auxiliary
  // variables appear in no other dense row.
  struct DenseRow {
    int row = 0;
    std::vector<int> aux;
    std::vector<double> aux_val;
    std::vector<int> core;
    std::vector<double> core_val;
    double beta = 0.0;
  };
  struct PsdGroups {
    MatrixXd c;             // order x groups
    std::vector<int> col;   // matrix column of each group
    std::vector<int> var;   // core local variable of each group
  };

  void setup(const SolverOptions& opt);
  MatrixXd solve_base(const MatrixXd& r) const;

  const Standard& sf_;
  int n_ = 0;
  std::vector<int> core_of_, aux_of_;
  std::vector<int> core_vars_, aux_vars_;
  std::vector<RowInfo> rows_;
  std::vector<std::vector<int>> aux_rows_;
  std::vector<DenseRow> dense_;
  std::vector<PsdGroups> psd_;
  std::vector<int> soc_row_cone_;

  MatrixXd s_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd haa_;
  std::vector<int> h_start_, h_idx_;
  std::vector<double> h_val_;
};

// Sparse rows touching more non-core variables than this are treated as dense
// rather than promoting those variables into the core.
constexpr int kMaxRowAux = 8;

void NormalSolver::setup(const SolverOptions& opt) {
  n_ = sf_.n;
  const auto& L = sf_.layout;
  std::vector<char> core(n_, 0);
  std::vector<char> dense_row(L.nonneg, 0);
  const SpMat& G = sf_.G;
  if (n_ <= opt.dense_variable_limit) {
    std::fill(core.begin(), core.end(), 1);
  } else {
    for (int r = L.nonneg; r < L.rows; ++r) {
      for (SpMat::InnerIterator it(G, r); it; ++it) core[it.col()] = 1;
    }
    for (int k = 0; k < sf_.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf_.A, k); it; ++it) core[it.col()] = 1;
    }
    for (int r = 0; r < L.nonneg; ++r) {
      int free_vars = 0;
      for (SpMat::InnerIterator it(G, r); it; ++it) free_vars += core[it.col()] ? 0 : 1;
      if (G.row(r).nonZeros() > opt.dense_row_nnz || free_vars > kMaxRowAux) dense_row[r] = 1;
    }
    for (int r = 0; r < L.nonneg; ++r) {
      if (dense_row[r]) continue;
      bool seen = false;
      for (SpMat::InnerIterator it(G, r); it; ++it) {
        if (core[it.col()]) continue;
        if (seen) core[it.col()] = 1;
        seen = true;
      }
    }
    std::vector<int> appear(n_, 0);
    for (int r = 0; r < L.nonneg; ++r) {
      if (dense_row[r]) continue;
      for (SpMat::InnerIterator it(G, r); it; ++it) ++appear[it.col()];
    }
    for (int v = 0; v < n_; ++v) {
      if (!core[v] && appear[v] == 0) core[v] = 1;
    }
    std::vector<int> dense_appear(n_, 0);
    for (int r = 0; r < L.nonneg; ++r) {
      if (!dense_row[r]) continue;
      for (SpMat::InnerIterator it(G, r); it; ++it) ++dense_appear[it.col()];
    }
    for (int v = 0; v < n_; ++v) {
      if (!core[v] && dense_appear[v] > 1) core[v] = 1;
    }
  }
  core_of_.assign(n_, -1);
  aux_of_.assign(n_, -1);
  for (int v = 0; v < n_; ++v) {
    if (core[v]) {
      core_of_[v] = static_cast<int>(core_vars_.size());
      core_vars_.push_back(v);
    } else {
      aux_of_[v] = static_cast<int>(aux_vars_.size());
      aux_vars_.push_back(v);
    }
  }
  aux_rows_.assign(aux_vars_.size(), {});

  soc_row_cone_.clear();
  const int sparse_end = L.psd.empty() ? L.rows : L.psd.front().start;
  for (int r = 0; r < sparse_end; ++r) {
    if (r < L.nonneg && dense_row[r]) {
      DenseRow dr;
      dr.row = r;
      for (SpMat::InnerIterator it(G, r); it; ++it) {
        const int v = static_cast<int>(it.col());
        if (core_of_[v] >= 0) {
          dr.core.push_back(core_of_[v]);
          dr.core_val.push_back(it.value());
        } else {
          dr.aux.push_back(aux_of_[v]);
          dr.aux_val.push_back(it.value());
        }
      }
      dense_.push_back(std::move(dr));
      continue;
    }
    RowInfo info;
    info.row = r;
    std::vector<std::pair<int, double>> entries;
    for (SpMat::InnerIterator it(G, r); it; ++it) {
      const int v = static_cast<int>(it.col());
      if (core_of_[v] >= 0) {
        entries.emplace_back(core_of_[v], it.value());
      } else {
        info.aux = aux_of_[v];
        info.aux_coef = it.value();
      }
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& e : entries) {
      info.idx.push_back(e.first);
      info.val.push_back(e.second);
    }
    if (info.aux >= 0) aux_rows_[info.aux].push_back(static_cast<int>(rows_.size()));
    rows_.push_back(std::move(info));
  }
  for (std::size_t k = 0; k < L.soc.size(); ++k) {
    for (int i = 0; i < L.soc[k].dim; ++i) soc_row_cone_.push_back(static_cast<int>(k));
  }

  for (const auto& cone : L.psd) {
    const int d = cone.order;
    std::vector<int> ii(cone.rows()), jj(cone.rows());
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i <= j; ++i) {
        ii[svec_index(i, j)] = i;
        jj[svec_index(i, j)] = j;
      }
    }
    std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> groups;
    for (int q = 0; q < cone.rows(); ++q) {
      for (SpMat::InnerIterator it(G, cone.start + q); it; ++it) {
        const int v = core_of_[it.col()];
        const int i = ii[q];
        const int j = jj[q];
        const double val = i == j ? 0.5 * it.value() : it.value() * M_SQRT1_2;
        groups[{v, j}].emplace_back(i, val);
      }
    }
    PsdGroups pg;
    pg.c = MatrixXd::Zero(d, static_cast<int>(groups.size()));
    int g = 0;
    for (const auto& [key, entries] : groups) {
      pg.var.push_back(key.first);
      pg.col.push_back(key.second);
      for (const auto& e : entries) pg.c(e.first, g) += e.second;
      ++g;
    }
    psd_.push_back(std::move(pg));
  }
}

bool NormalSolver::factor(const Scaling& w) {
  const auto& L = sf_.layout;
  const int nc = static_cast<int>(core_vars_.size());
  const int na = static_cast<int>(aux_vars_.size());
  s_.setZero(nc, nc);

  auto row_weight = [&](int r) {
    if (r < L.nonneg) return 1.0 / (w.nonneg_w(r) * w.nonneg_w(r));
    const double eta = w.soc[soc_row_cone_[r - L.nonneg]].eta;
    return 1.0 / (eta * eta);
  };

  auto add_outer = [&](const RowInfo& r1, const RowInfo& r2, double coef) {
    for (std::size_t b = 0; b < r2.idx.size(); ++b) {
      const double vb = coef * r2.val[b];
      const int cb = r2.idx[b];
      for (std::size_t a = 0; a < r1.idx.size(); ++a) {
        const int ca = r1.idx[a];
        if (ca >= cb) s_(ca, cb) += r1.val[a] * vb;
        if (&r1 != &r2 && cb >= ca) s_(cb, ca) += r1.val[a] * vb;
      }
    }
  };
  auto add_self = [&](const RowInfo& r, double coef) {
    const int k = static_cast<int>(r.idx.size());
    for (int b = 0; b < k; ++b) {
      const double vb = coef * r.val[b];
      const int cb = r.idx[b];
      for (int a = b; a < k; ++a) s_(r.idx[a], cb) += r.val[a] * vb;
    }
  };

  for (const auto& info : rows_) {
    if (info.aux < 0) add_self(info, row_weight(info.row));
  }

  // Eliminating an auxiliary variable from its rows leaves V' M V with
  // M = D - D a a' D / (a' D a); the diagonal of M is formed from the other
  // rows' weights so that no large terms cancel.
  haa_.resize(na);
  h_start_.assign(na + 1, 0);
  h_idx_.clear();
  h_val_.clear();
  std::vector<double> scratch(nc, 0.0);
  std::vector<int> touched;
  std::vector<double> dw, da;
  for (int a = 0; a < na; ++a) {
    const auto& rl = aux_rows_[a];
    const int k = static_cast<int>(rl.size());
    dw.resize(k);
    da.resize(k);
    double sigma = 0.0;
    for (int q = 0; q < k; ++q) {
      const auto& info = rows_[rl[q]];
      dw[q] = row_weight(info.row);
      da[q] = dw[q] * info.aux_coef;
      sigma += da[q] * info.aux_coef;
    }
    for (int q = 0; q < k; ++q) {
      const auto& rq = rows_[rl[q]];
      if (rq.idx.empty()) continue;
      double others = 0.0;
      for (int t = 0; t < k; ++t) {
        if (t != q) others += da[t] * rows_[rl[t]].aux_coef;
      }
      add_self(rq, dw[q] * others / sigma);
      for (int t = q + 1; t < k; ++t) {
        const auto& rt = rows_[rl[t]];
        if (rt.idx.empty()) continue;
        add_outer(rq, rt, -da[q] * da[t] / sigma);
      }
    }
    touched.clear();
    for (int q = 0; q < k; ++q) {
      const auto& info = rows_[rl[q]];
      for (std::size_t e = 0; e < info.idx.size(); ++e) {
        const int ci = info.idx[e];
        if (scratch[ci] == 0.0) touched.push_back(ci);
        scratch[ci] += da[q] * info.val[e];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int ci : touched) {
      if (scratch[ci] != 0.0) {
        h_idx_.push_back(ci);
        h_val_.push_back(scratch[ci]);
      }
      scratch[ci] = 0.0;
    }
    haa_(a) = sigma;
    h_start_[a + 1] = static_cast<int>(h_idx_.size());
  }

  for (std::size_t k = 0; k < L.soc.size(); ++k) {
    const auto& cone = L.soc[k];
    const auto& sw = w.soc[k];
    VectorXd jw = sw.wbar;
    jw.tail(cone.dim - 1) *= -1.0;
    // G' (2 a a' - J) G = 2 p p' - 2 g0 g0' + sum of row outer products
    VectorXd p = VectorXd::Zero(nc);
    VectorXd g0 = VectorXd::Zero(nc);
    for (int i = 0; i < cone.dim; ++i) {
      for (SpMat::InnerIterator it(sf_.G, cone.start + i); it; ++it) {
        const int ci = core_of_[it.col()];
        p(ci) += it.value() * jw(i);
        if (i == 0) g0(ci) = it.value();
      }
    }
    const double e2 = 1.0 / (sw.eta * sw.eta);
    s_.selfadjointView<Eigen::Lower>().rankUpdate(p, 2.0 * e2);
    s_.selfadjointView<Eigen::Lower>().rankUpdate(g0, -2.0 * e2);
  }

  for (std::size_t k = 0; k < L.psd.size(); ++k) {
    const auto& pg = psd_[k];
    const MatrixXd& v = w.psd[k].v;
    const MatrixXd y = v * pg.c;
    MatrixXd pm(pg.c.cols(), pg.c.cols());
    pm.triangularView<Eigen::Lower>() = pg.c.transpose() * y;
    const int ng = static_cast<int>(pg.c.cols());
    for (int g2 = 0; g2 < ng; ++g2) {
      const int j2 = pg.col[g2];
      const int v2 = pg.var[g2];
      for (int g1 = g2; g1 < ng; ++g1) {
        const int j1 = pg.col[g1];
        const double val = 2.0 * (y(j1, g2) * y(j2, g1) + v(j1, j2) * pm(g1, g2));
        const int v1 = pg.var[g1];
        s_(v1, v2) += val;
        if (g1 != g2 && v1 == v2) s_(v1, v2) += val;
      }
    }
  }

  // Eliminating the auxiliaries of a dense row with weight d and auxiliary
  // coefficients a leaves beta (c - q)(c - q)' with beta = 1 / (1/d + a' D^-1 a)
  // and q the core image of D^-1 a.
  const int nd = static_cast<int>(dense_.size());
  if (nd > 0) {
    MatrixXd vd = MatrixXd::Zero(nc, nd);
    for (int k = 0; k < nd; ++k) {
      auto& dr = dense_[k];
      const double d = row_weight(dr.row);
      double kappa = 0.0;
      for (std::size_t e = 0; e < dr.aux.size(); ++e) {
        const int a = dr.aux[e];
        const double sh = dr.aux_val[e] / haa_(a);
        kappa += dr.aux_val[e] * sh;
        for (int q = h_start_[a]; q < h_start_[a + 1]; ++q) vd(h_idx_[q], k) -= sh * h_val_[q];
      }
      for (std::size_t e = 0; e < dr.core.size(); ++e) vd(dr.core[e], k) += dr.core_val[e];
      dr.beta = 1.0 / (1.0 / d + kappa);
      vd.col(k) *= std::sqrt(dr.beta);
    }
    s_.selfadjointView<Eigen::Lower>().rankUpdate(vd);
  }

  bool ok = false;
  const VectorXd diag = s_.diagonal();
  for (int attempt = 0; attempt < 6 && !ok; ++attempt) {
    const double rel = 1e-13 * std::pow(100.0, attempt);
    const double shift = attempt == 0 ? 0.0 : 1e-14 * std::pow(100.0, attempt - 1);
    s_.diagonal() = diag.array() * (1.0 + rel) + shift;
    llt_.compute(s_);
    ok = llt_.info() == Eigen::Success;
  }
  return ok;
}

MatrixXd NormalSolver::solve_base(const MatrixXd& r) const {
  const int nc = static_cast<int>(core_vars_.size());
  const int na = static_cast<int>(aux_vars_.size());
  const int k = static_cast<int>(r.cols());
  MatrixXd rc(nc, k), ra(na, k);
  for (int i = 0; i < nc; ++i) rc.row(i) = r.row(core_vars_[i]);
  for (int i = 0; i < na; ++i) ra.row(i) = r.row(aux_vars_[i]);

  // projections s' u of the dense rows, s = D^-1 a
  auto project = [&](const DenseRow& dr, const MatrixXd& u) {
    Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(k);
    for (std::size_t e = 0; e < dr.aux.size(); ++e) {
      p += (dr.aux_val[e] / haa_(dr.aux[e])) * u.row(dr.aux[e]);
    }
    return p;
  };
  auto apply_haa_inv = [&](MatrixXd& u) {
    std::vector<Eigen::RowVectorXd> proj;
    proj.reserve(dense_.size());
    for (const auto& dr : dense_) proj.push_back(project(dr, u));
    for (int a = 0; a < na; ++a) u.row(a) /= haa_(a);
    for (std::size_t q = 0; q < dense_.size(); ++q) {
      const auto& dr = dense_[q];
      for (std::size_t e = 0; e < dr.aux.size(); ++e) {
        u.row(dr.aux[e]) -= (dr.beta * dr.aux_val[e] / haa_(dr.aux[e])) * proj[q];
      }
    }
  };

  std::vector<Eigen::RowVectorXd> pr;
  pr.reserve(dense_.size());
  for (const auto& dr : dense_) pr.push_back(project(dr, ra));
  MatrixXd ta = ra;
  apply_haa_inv(ta);
  for (int a = 0; a < na; ++a) {
    for (int e = h_start_[a]; e < h_start_[a + 1]; ++e) rc.row(h_idx_[e]) -= h_val_[e] * ta.row(a);
  }
  for (std::size_t q = 0; q < dense_.size(); ++q) {
    const auto& dr = dense_[q];
    for (std::size_t e = 0; e < dr.core.size(); ++e) {
      rc.row(dr.core[e]) -= (dr.beta * dr.core_val[e]) * pr[q];
    }
  }
  if (nc > 0) llt_.solveInPlace(rc);

  for (int a = 0; a < na; ++a) {
    for (int e = h_start_[a]; e < h_start_[a + 1]; ++e) ra.row(a) -= h_val_[e] * rc.row(h_idx_[e]);
  }
  apply_haa_inv(ra);
  for (const auto& dr : dense_) {
    Eigen::RowVectorXd cx = Eigen::RowVectorXd::Zero(k);
    for (std::size_t e = 0; e < dr.core.size(); ++e) cx += dr.core_val[e] * rc.row(dr.core[e]);
    for (std::size_t e = 0; e < dr.aux.size(); ++e) {
      ra.row(dr.aux[e]) -= (dr.beta * dr.aux_val[e] / haa_(dr.aux[e])) * cx;
    }
  }
  MatrixXd out(n_, k);
  for (int i = 0; i < nc; ++i) out.row(core_vars_[i]) = rc.row(i);
  for (int i = 0; i < na; ++i) out.row(aux_vars_[i]) = ra.row(i);
  return out;
}

MatrixXd NormalSolver::solve(const MatrixXd& r) const { return solve_base(r); }

struct KktVec {
  VectorXd x, y, z;
  VectorXd zt;  // W z
};

// Solves [[0, A', G'], [A, 0, 0], [G, 0, -W'W]] [x; y; z] = [r1; r2; r3] given
// the scaled right-hand side W^{-T} r3. Residuals are measured in the scaled
// variables W z so that W'W is never formed.
class KktSolver {
 public:
  KktSolver(const Standard& sf, const SolverOptions& opt) : sf_(sf), normal_(sf, opt) {}

  bool factor(const Scaling& w) {
    w_ = &w;
    if (!normal_.factor(w)) return false;
    const int p = static_cast<int>(sf_.A.rows());
    if (p > 0) {
      const MatrixXd at = MatrixXd(sf_.A.transpose());
      hinv_at_ = normal_.solve(at);
      MatrixXd e = sf_.A * hinv_at_;
      e = 0.5 * (e + e.transpose());
      e.diagonal().array() += 1e-14 * std::max(1.0, e.diagonal().maxCoeff());
      eq_.compute(e);
      if (eq_.info() != Eigen::Success) return false;
    }
    return true;
  }

  KktVec solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3s) const {
    const auto& L = sf_.layout;
    const double rn = std::sqrt(r1.squaredNorm() + r2.squaredNorm() + r3s.squaredNorm());
    KktVec v = solve_once(r1, r2, r3s);
    KktVec prev;
    double err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 4; ++it) {
      const VectorXd e1 = r1 - sf_.A.transpose() * v.y - sf_.G.transpose() * v.z;
      const VectorXd e2 = r2 - sf_.A * v.x;
      const VectorXd e3 = r3s - (w_->apply_wt_inv(L, sf_.G * v.x) - v.zt);
      const double en =
          std::sqrt(e1.squaredNorm() + e2.squaredNorm() + e3.squaredNorm()) / (1.0 + rn);
      if (en >= err) {
        // refinement stopped helping; undo the last correction
        v = prev;
        break;
      }
      err = en;
      if (en <= 1e-15 || it == 3) break;
      prev = v;
      const KktVec d = solve_once(e1, e2, e3);
      v.x += d.x;
      v.y += d.y;
      v.z += d.z;
      v.zt += d.zt;
    }
    last_error_ = err;
    return v;
  }

  double last_error() const { return last_error_; }
  const NormalSolver& normal() const { return normal_; }

 private:
  KktVec solve_once(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3s) const {
    const auto& L = sf_.layout;
    KktVec v;
    VectorXd rhs = r1 + sf_.G.transpose() * w_->apply_w_inv(L, r3s);
    if (sf_.A.rows() > 0) {
      const VectorXd hr = normal_.solve(rhs);
      v.y = eq_.solve(sf_.A * hr - r2);
      v.x = hr - hinv_at_ * v.y;
    } else {
      v.y.resize(0);
      v.x = normal_.solve(rhs);
    }
    v.zt = w_->apply_wt_inv(L, sf_.G * v.x) - r3s;
    v.z = w_->apply_w_inv(L, v.zt);
    return v;
  }

  const Standard& sf_;
  NormalSolver normal_;
  const Scaling* w_ = nullptr;
  mutable double last_error_ = 0.0;

 private:
  MatrixXd hinv_at_;
  Eigen::LDLT<MatrixXd> eq_;
};

struct Recovered {
  VectorXd x;
  VectorXd dual;
};

Recovered recover(const ConicProgram& prog, const Presolve& pre, const Standard& sf,
                  const VectorXd& x, const VectorXd& y, const VectorXd& z) {
  Recovered out;
  out.x = pre.sub * x + pre.shift;
  out.dual.resize(prog.total_rows());
  // G_full' z over the original variables, G = -map
  VectorXd gtz = VectorXd::Zero(prog.nvar);
  for (std::size_t k = 0; k < prog.blocks.size(); ++k) {
    const auto& b = prog.blocks[k];
    if (b.kind == ConeKind::zero) continue;
    gtz.noalias() -= b.map.transpose() * z.segment(sf.block_start[k], b.rows());
  }
  int pos = 0;
  int eqrow = 0;
  for (std::size_t k = 0; k < prog.blocks.size(); ++k) {
    const auto& b = prog.blocks[k];
    if (b.kind != ConeKind::zero) {
      out.dual.segment(pos, b.rows()) = z.segment(sf.block_start[k], b.rows());
    } else {
      for (int i = 0; i < b.rows(); ++i, ++eqrow) {
        double yi;
        const int pv = pre.pivot_var[eqrow];
        if (pv >= 0) {
          yi = -(prog.objective(pv) + gtz(pv)) / pre.pivot_coef[eqrow];
        } else {
          yi = y(pre.kept_index[eqrow]);
        }
        out.dual(pos + i) = -yi;
      }
    }
    pos += b.rows();
  }
  return out;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, double tol) {
  SolverOptions opt;
  opt.tol = tol;
  return solve(prog, opt);
}

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  prog.validate();
  if (!(opt.tol >= 1e-10 && opt.tol <= 1e-3)) {
    throw ContractViolation("conic solve: tolerance must lie in [1e-10, 1e-3]");
  }
  const Presolve pre = presolve(prog);
  const Standard sf = build_standard(prog, pre);
  const ConeLayout& L = sf.layout;
  const int m = L.rows;
  const double nu = L.degree();

  ConicSolution sol;
  auto finish = [&](SolveStatus status, const VectorXd& x, const VectorXd& y, const VectorXd& z,
                    const VectorXd& s, double tau, int iters) {
    const Recovered rec = recover(prog, pre, sf, x / tau, y / tau, z / tau);
    sol.x = rec.x;
    sol.dual = rec.dual;
    sol.slack.resize(prog.total_rows());
    int pos = 0;
    for (const auto& b : prog.blocks) {
      sol.slack.segment(pos, b.rows()) = b.map * sol.x + b.offset;
      pos += b.rows();
    }
    (void)s;
    const Residuals res = evaluate_residuals(prog, sol.x, sol.dual);
    sol.report.status = status;
    sol.report.objective_value = res.primal_objective;
    sol.report.primal_residual = res.primal;
    sol.report.dual_residual = res.dual;
    sol.report.duality_gap = res.gap;
    sol.report.iterations = iters;
    sol.report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  };

  KktSolver kkt(sf, opt);
  if (opt.verbose) {
    std::printf("vars %d (presolved %d) eq %d rows %d core %d aux %d dense rows %d\n", prog.nvar,
                sf.n, static_cast<int>(sf.A.rows()), m, kkt.normal().core_count(),
                kkt.normal().aux_count(), kkt.normal().dense_row_count());
    std::fflush(stdout);
  }
  Scaling w = Scaling::identity(L);
  const VectorXd zero_n = VectorXd::Zero(sf.n);
  const VectorXd zero_p = VectorXd::Zero(sf.b.size());
  const VectorXd zero_m = VectorXd::Zero(m);
  if (!kkt.factor(w)) {
    return finish(SolveStatus::numerical_error, zero_n, zero_p, zero_m, zero_m, 1.0, 0);
  }
  const KktVec pinit = kkt.solve(zero_n, sf.b, sf.h);
  const KktVec dinit = kkt.solve(-sf.c, zero_p, zero_m);
  VectorXd x = pinit.x;
  VectorXd s = -pinit.z;
  VectorXd y = dinit.y;
  VectorXd z = dinit.z;
  const VectorXd e = detail::identity_element(L);
  if (m > 0) {
    const double ts = -detail::min_eigenvalue(L, s);
    if (ts >= -1e-8 * std::max(s.norm(), 1.0)) s += (1.0 + ts) * e;
    const double tz = -detail::min_eigenvalue(L, z);
    if (tz >= -1e-8 * std::max(z.norm(), 1.0)) z += (1.0 + tz) * e;
  }
  double tau = 1.0;
  double kappa = 1.0;

  struct Best {
    double merit = std::numeric_limits<double>::infinity();
    VectorXd x, y, z, s;
    double tau = 1.0;
    int iter = 0;
  } best;
  auto fallback = [&](SolveStatus status, int iter) {
    if (best.merit <= opt.tol) status = SolveStatus::optimal;
    if (!std::isfinite(best.merit)) return finish(status, x, y, z, s, tau, iter);
    return finish(status, best.x, best.y, best.z, best.s, best.tau, iter);
  };

  const double cnorm = std::max(1.0, sf.c.norm());
  const double bhnorm = std::max(1.0, std::sqrt(sf.b.squaredNorm() + sf.h.squaredNorm()));

  for (int iter = 0;; ++iter) {
    const VectorXd fx = sf.A.transpose() * y + sf.G.transpose() * z + sf.c * tau;
    const VectorXd fy = -(sf.A * x) + sf.b * tau;
    const VectorXd fz = -(sf.G * x) + sf.h * tau - s;
    const double cx = sf.c.dot(x);
    const double byhz = sf.b.dot(y) + sf.h.dot(z);
    const double ftau = -cx - byhz - kappa;

    const Recovered rec = recover(prog, pre, sf, x / tau, y / tau, z / tau);
    const Residuals res = evaluate_residuals(prog, rec.x, rec.dual);
    if (opt.verbose) {
      std::fprintf(stderr, "%3d  pobj % .9e  dobj % .9e  pres %.2e  dres %.2e  gap %.2e  k/t %.2e\n",
                   iter, res.primal_objective, res.dual_objective, res.primal, res.dual, res.gap,
                   kappa / tau);
    }
    const double merit = std::max({res.primal, res.dual, res.gap});
    if (merit <= opt.tol) {
      return finish(SolveStatus::optimal, x, y, z, s, tau, iter);
    }
    if (merit < best.merit) {
      best.merit = merit;
      best.x = x;
      best.y = y;
      best.z = z;
      best.s = s;
      best.tau = tau;
      best.iter = iter;
    }
    if (byhz < 0.0) {
      const double pinf = (sf.A.transpose() * y + sf.G.transpose() * z).norm() / cnorm;
      if (pinf / (-byhz) <= opt.tol) {
        return finish(SolveStatus::infeasible, x, y, z, s, tau, iter);
      }
    }
    if (cx < 0.0) {
      const double dinf =
          std::sqrt((sf.A * x).squaredNorm() + (sf.G * x + s).squaredNorm()) / bhnorm;
      if (dinf / (-cx) <= opt.tol) {
        return finish(SolveStatus::unbounded, x, y, z, s, tau, iter);
      }
    }
    if (iter >= opt.max_iterations) return fallback(SolveStatus::max_iterations, iter);

    if (!Scaling::compute(L, s, z, w) || !kkt.factor(w)) {
      return fallback(SolveStatus::numerical_error, iter);
    }
    const double mu = (s.dot(z) + tau * kappa) / (nu + 1.0);
    const KktVec v1 = kkt.solve(-sf.c, sf.b, w.apply_wt_inv(L, sf.h));
    const double den1 = kappa / tau - sf.c.dot(v1.x) - sf.b.dot(v1.y) - sf.h.dot(v1.z);
    const VectorXd lsq = w.lambda_sq(L);

    double sigma = 0.0;
    VectorXd ds_aff, dz_aff;
    double dtau_aff = 0.0;
    double dkappa_aff = 0.0;
    VectorXd dx, dy, dz, ds;
    double dtau = 0.0;
    double dkappa = 0.0;
    double alpha = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      VectorXd dsv = -lsq;
      double dk = -tau * kappa;
      if (pass == 1) {
        dsv -= detail::jordan_product(L, ds_aff, dz_aff);
        dsv += sigma * mu * e;
        dk += -dtau_aff * dkappa_aff + sigma * mu;
      }
      const double f = pass == 0 ? 1.0 : 1.0 - sigma;
      const VectorXd ldiv = w.lambda_div(L, dsv);
      const KktVec v2 = kkt.solve(-f * fx, f * fy, w.apply_wt_inv(L, f * fz) - ldiv);
      dtau = (-f * ftau + dk / tau + sf.c.dot(v2.x) + sf.b.dot(v2.y) + sf.h.dot(v2.z)) / den1;
      dx = v2.x + dtau * v1.x;
      dy = v2.y + dtau * v1.y;
      dz = v2.z + dtau * v1.z;
      const VectorXd dzt = v2.zt + dtau * v1.zt;
      const VectorXd dst = ldiv - dzt;
      dkappa = (dk - kappa * dtau) / tau;
      double amax = std::min(w.max_step(L, dst), w.max_step(L, dzt));
      if (dtau < 0.0) amax = std::min(amax, -tau / dtau);
      if (dkappa < 0.0) amax = std::min(amax, -kappa / dkappa);
      if (pass == 0) {
        const double aa = std::min(1.0, amax);
        sigma = std::pow(1.0 - aa, 3);
        ds_aff = dst;
        dz_aff = dzt;
        dtau_aff = dtau;
        dkappa_aff = dkappa;
      } else {
        alpha = std::min(1.0, 0.99 * amax);
        ds = w.apply_wt(L, dst);
      }
    }
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
      return fallback(SolveStatus::numerical_error, iter + 1);
    }
    if (opt.verbose) {
      std::fprintf(stderr, "     alpha %.3e  sigma %.3e  kkt %.2e\n", alpha, sigma, kkt.last_error());
    }
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }
}

}  // namespace sls::conic
