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

#include "sls/clairvoyant.hpp"

#include <sstream>

namespace sls {

ClairvoyantResult clairvoyant_closed_form(const LtvSystem& sys, const CostWeights& weights) {
  const PlantMaps maps = build_plant_maps(sys);
  const MatrixXd& f = maps.f;
  const MatrixXd& g = maps.g;
  const MatrixXd& q = weights.q();
  const MatrixXd& r = weights.r();
  if (q.rows() != g.rows() || r.rows() != f.cols()) {
    throw DimensionError("clairvoyant_closed_form: weights do not match the system");
  }
  const int nT = static_cast<int>(g.rows());

  MatrixXd p = r + f.transpose() * q * f;
  p = 0.5 * (p + p.transpose());
  Eigen::LLT<MatrixXd> llt(p);
  if (llt.info() != Eigen::Success) throw NotPsdError("clairvoyant_closed_form: R + F'QF is not positive definite");

  ClairvoyantResult out;
  out.response.phi_u = -llt.solve(f.transpose() * q * g);
  out.response.phi_x = f * out.response.phi_u + g;
  out.response.causal = false;

  Eigen::LLT<MatrixXd> rllt(r);
  const MatrixXd m = MatrixXd::Identity(nT, nT) + f * rllt.solve(f.transpose()) * q;
  const MatrixXd c = g.transpose() * q * m.partialPivLu().solve(g);
  out.cost_operator = 0.5 * (c + c.transpose());
  return out;
}

ClosedLoopResponse clairvoyant_via_optimization(const LtvSystem& sys, const CostWeights& weights,
                                                const MatrixXd& sigma_w,
                                                const NumericSettings& settings) {
  const int n = sys.n();
  const int m = sys.m();
  const int T = sys.horizon();
  const int nT = n * T;
  const int mT = m * T;
  if (sigma_w.rows() != nT || sigma_w.cols() != nT) {
    throw DimensionError("clairvoyant_via_optimization: sigma_w must be nT x nT");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sigma_w + sigma_w.transpose()),
                                             Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < settings.pd_tol) {
    throw NotPsdError("clairvoyant_via_optimization: sigma_w is not positive definite");
  }
  const MatrixXd root = psd_sqrt(sigma_w, settings);

  // E = [I - Z A, -Z B], objective weight blkdiag(Q, R)
  const BlockOperators ops = build_block_operators(sys);
  const int k = nT + mT;
  MatrixXd kkt = MatrixXd::Zero(k + nT, k + nT);
  kkt.topLeftCorner(k, k) = 2.0 * weights.joint();
  MatrixXd e(nT, k);
  e << MatrixXd::Identity(nT, nT) - ops.z * ops.a, -ops.z * ops.b;
  kkt.bottomLeftCorner(nT, k) = e;
  kkt.topRightCorner(k, nT) = e.transpose();
  MatrixXd rhs = MatrixXd::Zero(k + nT, nT);
  rhs.bottomRows(nT) = root;

  const Eigen::PartialPivLU<MatrixXd> lu(kkt);
  MatrixXd sol = lu.solve(rhs);
  const double res = (kkt * sol - rhs).norm() / (1.0 + rhs.norm());
  if (!(res <= 1e-9)) {
    std::ostringstream os;
    os << "clairvoyant_via_optimization: KKT solve residual " << res;
    throw Error(os.str());
  }
  // Phi = Psi sigma_w^{-1/2}
  const MatrixXd psi = sol.topRows(k);
  const MatrixXd phi = root.llt().solve(psi.transpose()).transpose();
  ClosedLoopResponse out;
  out.phi_x = phi.topRows(nT);
  out.phi_u = phi.bottomRows(mT);
  out.causal = false;
  return out;
}

}  // namespace sls
