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

#include "cone_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sls/conic.hpp"

namespace sls::conic::detail {
namespace {

constexpr double kInfStep = 1e30;

Eigen::MatrixXd segment_mat(const Eigen::VectorXd& u, const PsdCone& c) {
  return smat(u.segment(c.start, c.rows()), c.order);
}

// Smallest positive root of a*t^2 + 2*b*t + c with c > 0, or kInfStep.
double soc_boundary(double a, double b, double c) {
  if (std::abs(a) < 1e-300) {
    return b < 0.0 ? -c / (2.0 * b) : kInfStep;
  }
  const double disc = b * b - a * c;
  if (disc < 0.0) return kInfStep;
  const double sq = std::sqrt(disc);
  const double t = -(b + (b >= 0.0 ? sq : -sq));
  double best = kInfStep;
  if (t != 0.0) {
    const double r1 = t / a;
    const double r2 = c / t;
    if (r1 > 0.0) best = std::min(best, r1);
    if (r2 > 0.0) best = std::min(best, r2);
  }
  return best;
}

double soc_jdot(const Eigen::Ref<const Eigen::VectorXd>& u) {
  return u(0) * u(0) - u.tail(u.size() - 1).squaredNorm();
}

// factor * [[w0, w1'], [w1, I + w1 w1' / (1 + w0)]] * u
Eigen::VectorXd soc_apply(const SocScaling& sw, const Eigen::Ref<const Eigen::VectorXd>& u,
                          double factor) {
  const int d = static_cast<int>(u.size());
  const double w0 = sw.wbar(0);
  const auto w1 = sw.wbar.tail(d - 1);
  const double t = w1.dot(u.tail(d - 1));
  Eigen::VectorXd out(d);
  out(0) = w0 * u(0) + t;
  out.tail(d - 1) = u.tail(d - 1) + (u(0) + t / (1.0 + w0)) * w1;
  return factor * out;
}

}  // namespace

int ConeLayout::degree() const {
  int deg = nonneg + static_cast<int>(soc.size());
  for (const auto& c : psd) deg += c.order;
  return deg;
}

Scaling Scaling::identity(const ConeLayout& layout) {
  Scaling w;
  w.nonneg_w = Eigen::VectorXd::Ones(layout.nonneg);
  for (const auto& c : layout.soc) {
    SocScaling s;
    s.eta = 1.0;
    s.wbar = Eigen::VectorXd::Zero(c.dim);
    s.wbar(0) = 1.0;
    w.soc.push_back(std::move(s));
  }
  for (const auto& c : layout.psd) {
    PsdScaling p;
    p.r = Eigen::MatrixXd::Identity(c.order, c.order);
    p.r_inv = p.r;
    p.v = p.r;
    p.lambda = Eigen::VectorXd::Ones(c.order);
    w.psd.push_back(std::move(p));
  }
  w.lambda = identity_element(layout);
  return w;
}

bool Scaling::compute(const ConeLayout& layout, const Eigen::VectorXd& s,
                      const Eigen::VectorXd& z, Scaling& w) {
  w.lambda.resize(layout.rows);
  w.soc.clear();
  w.psd.clear();
  const int nn = layout.nonneg;
  if (nn > 0) {
    const auto sn = s.head(nn).array();
    const auto zn = z.head(nn).array();
    if ((sn <= 0.0).any() || (zn <= 0.0).any()) return false;
    w.nonneg_w = (sn / zn).sqrt().matrix();
    w.lambda.head(nn) = (sn * zn).sqrt().matrix();
  } else {
    w.nonneg_w.resize(0);
  }

  for (const auto& c : layout.soc) {
    const auto sc = s.segment(c.start, c.dim);
    const auto zc = z.segment(c.start, c.dim);
    const double sj = soc_jdot(sc);
    const double zj = soc_jdot(zc);
    if (sj <= 0.0 || zj <= 0.0 || sc(0) <= 0.0 || zc(0) <= 0.0) return false;
    const Eigen::VectorXd sb = sc / std::sqrt(sj);
    Eigen::VectorXd zb = zc / std::sqrt(zj);
    const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
    zb.tail(c.dim - 1) *= -1.0;  // J * zbar
    SocScaling sw;
    sw.wbar = (sb + zb) / (2.0 * gamma);
    sw.eta = std::pow(sj / zj, 0.25);
    w.soc.push_back(std::move(sw));
  }
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const auto& c = layout.soc[k];
    w.lambda.segment(c.start, c.dim) =
        soc_apply(w.soc[k], z.segment(c.start, c.dim), w.soc[k].eta);
  }

  for (const auto& c : layout.psd) {
    const Eigen::MatrixXd sm = segment_mat(s, c);
    const Eigen::MatrixXd zm = segment_mat(z, c);
    Eigen::LLT<Eigen::MatrixXd> ls(sm);
    Eigen::LLT<Eigen::MatrixXd> lz(zm);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Eigen::MatrixXd lsm = ls.matrixL();
    const Eigen::MatrixXd lzm = lz.matrixL();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(lzm.transpose() * lsm,
                                       Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd sigma = svd.singularValues();
    if (sigma.minCoeff() <= 0.0) return false;
    const Eigen::VectorXd isq = sigma.cwiseSqrt().cwiseInverse();
    PsdScaling p;
    p.r = lsm * svd.matrixV() * isq.asDiagonal();
    p.r_inv = isq.asDiagonal() * svd.matrixU().transpose() * lzm.transpose();
    p.v = p.r_inv.transpose() * p.r_inv;
    p.lambda = sigma;
    Eigen::MatrixXd lam = sigma.asDiagonal();
    w.lambda.segment(c.start, c.rows()) = svec(lam);
    w.psd.push_back(std::move(p));
  }
  return true;
}

Eigen::VectorXd Scaling::apply_w(const ConeLayout& layout, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(u.size());
  const int nn = layout.nonneg;
  out.head(nn) = nonneg_w.cwiseProduct(u.head(nn));
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const auto& c = layout.soc[k];
    out.segment(c.start, c.dim) = soc_apply(soc[k], u.segment(c.start, c.dim), soc[k].eta);
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const Eigen::MatrixXd um = segment_mat(u, c);
    const Eigen::MatrixXd res = psd[k].r.transpose() * um * psd[k].r;
    out.segment(c.start, c.rows()) = svec(res);
  }
  return out;
}

Eigen::VectorXd Scaling::apply_wt(const ConeLayout& layout, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = apply_w(layout, u);  // nonneg and soc parts are symmetric
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const Eigen::MatrixXd um = segment_mat(u, c);
    const Eigen::MatrixXd res = psd[k].r * um * psd[k].r.transpose();
    out.segment(c.start, c.rows()) = svec(res);
  }
  return out;
}

Eigen::VectorXd Scaling::apply_w_inv(const ConeLayout& layout, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(u.size());
  const int nn = layout.nonneg;
  out.head(nn) = u.head(nn).cwiseQuotient(nonneg_w);
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const auto& c = layout.soc[k];
    // Wbar^{-1} = J Wbar J
    Eigen::VectorXd ju = u.segment(c.start, c.dim);
    ju.tail(c.dim - 1) *= -1.0;
    Eigen::VectorXd res = soc_apply(soc[k], ju, 1.0 / soc[k].eta);
    res.tail(c.dim - 1) *= -1.0;
    out.segment(c.start, c.dim) = res;
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const Eigen::MatrixXd res = psd[k].r_inv.transpose() * segment_mat(u, c) * psd[k].r_inv;
    out.segment(c.start, c.rows()) = svec(res);
  }
  return out;
}

Eigen::VectorXd Scaling::apply_wt_inv(const ConeLayout& layout, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = apply_w_inv(layout, u);
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const Eigen::MatrixXd res = psd[k].r_inv * segment_mat(u, c) * psd[k].r_inv.transpose();
    out.segment(c.start, c.rows()) = svec(res);
  }
  return out;
}

Eigen::VectorXd Scaling::apply_wtw(const ConeLayout& layout, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(u.size());
  const int nn = layout.nonneg;
  out.head(nn) = nonneg_w.array().square().matrix().cwiseProduct(u.head(nn));
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const auto& c = layout.soc[k];
    const auto& sw = soc[k];
    Eigen::VectorXd ju = u.segment(c.start, c.dim);
    ju.tail(c.dim - 1) *= -1.0;
    out.segment(c.start, c.dim) =
        sw.eta * sw.eta * (2.0 * sw.wbar.dot(u.segment(c.start, c.dim)) * sw.wbar - ju);
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const Eigen::MatrixXd rrt = psd[k].r * psd[k].r.transpose();
    const Eigen::MatrixXd res = rrt * segment_mat(u, c) * rrt;
    out.segment(c.start, c.rows()) = svec(res);
  }
  return out;
}

Eigen::VectorXd Scaling::apply_wtw_inv(const ConeLayout& layout,
                                       const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(u.size());
  const int nn = layout.nonneg;
  out.head(nn) = u.head(nn).cwiseQuotient(nonneg_w.array().square().matrix());
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const auto& c = layout.soc[k];
    const auto& sw = soc[k];
    Eigen::VectorXd jw = sw.wbar;
    jw.tail(c.dim - 1) *= -1.0;
    Eigen::VectorXd ju = u.segment(c.start, c.dim);
    ju.tail(c.dim - 1) *= -1.0;
    out.segment(c.start, c.dim) =
        (2.0 * jw.dot(u.segment(c.start, c.dim)) * jw - ju) / (sw.eta * sw.eta);
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const Eigen::MatrixXd res = psd[k].v * segment_mat(u, c) * psd[k].v;
    out.segment(c.start, c.rows()) = svec(res);
  }
  return out;
}

Eigen::VectorXd Scaling::lambda_div(const ConeLayout& layout, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(u.size());
  const int nn = layout.nonneg;
  out.head(nn) = u.head(nn).cwiseQuotient(lambda.head(nn));
  for (const auto& c : layout.soc) {
    const auto l = lambda.segment(c.start, c.dim);
    const auto v = u.segment(c.start, c.dim);
    const double l0 = l(0);
    const auto l1 = l.tail(c.dim - 1);
    const auto v1 = v.tail(c.dim - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * v(0) - l1.dot(v1)) / det;
    out(c.start) = x0;
    out.segment(c.start + 1, c.dim - 1) = (v1 - x0 * l1) / l0;
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const auto& lam = psd[k].lambda;
    for (int j = 0; j < c.order; ++j) {
      for (int i = 0; i <= j; ++i) {
        const int idx = c.start + svec_index(i, j);
        out(idx) = 2.0 * u(idx) / (lam(i) + lam(j));
      }
    }
  }
  return out;
}

Eigen::VectorXd Scaling::lambda_sq(const ConeLayout& layout) const {
  return jordan_product(layout, lambda, lambda);
}

double Scaling::max_step(const ConeLayout& layout, const Eigen::VectorXd& u) const {
  double alpha = kInfStep;
  for (int i = 0; i < layout.nonneg; ++i) {
    if (u(i) < 0.0) alpha = std::min(alpha, -lambda(i) / u(i));
  }
  for (const auto& c : layout.soc) {
    const auto l = lambda.segment(c.start, c.dim);
    const auto d = u.segment(c.start, c.dim);
    const double a = d(0) * d(0) - d.tail(c.dim - 1).squaredNorm();
    const double b = l(0) * d(0) - l.tail(c.dim - 1).dot(d.tail(c.dim - 1));
    const double cc = l(0) * l(0) - l.tail(c.dim - 1).squaredNorm();
    alpha = std::min(alpha, soc_boundary(a, b, cc));
  }
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    const auto& c = layout.psd[k];
    const Eigen::VectorXd isq = psd[k].lambda.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd m = isq.asDiagonal() * segment_mat(u, c) * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double emin = es.eigenvalues()(0);
    if (emin < 0.0) alpha = std::min(alpha, -1.0 / emin);
  }
  return alpha;
}

Eigen::VectorXd identity_element(const ConeLayout& layout) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(layout.rows);
  e.head(layout.nonneg).setOnes();
  for (const auto& c : layout.soc) e(c.start) = 1.0;
  for (const auto& c : layout.psd) {
    for (int i = 0; i < c.order; ++i) e(c.start + svec_index(i, i)) = 1.0;
  }
  return e;
}

Eigen::VectorXd jordan_product(const ConeLayout& layout, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v) {
  Eigen::VectorXd out(u.size());
  const int nn = layout.nonneg;
  out.head(nn) = u.head(nn).cwiseProduct(v.head(nn));
  for (const auto& c : layout.soc) {
    const auto a = u.segment(c.start, c.dim);
    const auto b = v.segment(c.start, c.dim);
    out(c.start) = a.dot(b);
    out.segment(c.start + 1, c.dim - 1) =
        a(0) * b.tail(c.dim - 1) + b(0) * a.tail(c.dim - 1);
  }
  for (const auto& c : layout.psd) {
    const Eigen::MatrixXd a = segment_mat(u, c);
    const Eigen::MatrixXd b = segment_mat(v, c);
    const Eigen::MatrixXd ab = a * b;
    const Eigen::MatrixXd sym = 0.5 * (ab + ab.transpose());
    out.segment(c.start, c.rows()) = svec(sym);
  }
  return out;
}

double min_eigenvalue(const ConeLayout& layout, const Eigen::VectorXd& u) {
  double m = std::numeric_limits<double>::infinity();
  if (layout.nonneg > 0) m = std::min(m, u.head(layout.nonneg).minCoeff());
  for (const auto& c : layout.soc) {
    const auto a = u.segment(c.start, c.dim);
    m = std::min(m, a(0) - a.tail(c.dim - 1).norm());
  }
  for (const auto& c : layout.psd) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(segment_mat(u, c), Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues()(0));
  }
  return m;
}

}  // namespace sls::conic::detail
