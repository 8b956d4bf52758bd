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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sls/clairvoyant.hpp"
#include "sls/lmi.hpp"
#include "test_support.hpp"

using namespace sls;
using namespace sls::testing;

namespace {

AffineMatrix random_affine(std::mt19937_64& rng, int rows, int cols, int nvar) {
  const MatrixXd dense = random_matrix(rng, rows * cols, nvar);
  return AffineMatrix(random_matrix(rng, rows, cols), dense.sparseView());
}

MatrixXd block_value(const conic::ConeBlock& b, const VectorXd& x) {
  return conic::smat(b.map * x + b.offset, b.dim);
}

double min_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

TEST_CASE("affine matrix algebra") {
  std::mt19937_64 rng(3);
  const AffineMatrix a = random_affine(rng, 4, 3, 5);
  const VectorXd x = random_vector(rng, 5);
  const MatrixXd p = random_matrix(rng, 2, 4);
  const MatrixXd s = random_matrix(rng, 3, 6);
  CHECK((a.left(p).evaluate(x) - p * a.evaluate(x)).norm() < 1e-12);
  CHECK((a.right(s).evaluate(x) - a.evaluate(x) * s).norm() < 1e-12);
  const MatrixXd m = a.evaluate(x);
  const VectorXd vec = a.vec_map() * x + a.vec_offset();
  CHECK((vec - Eigen::Map<const VectorXd>(m.data(), m.size())).norm() < 1e-12);
  const AffineMatrix wide = a.with_nvar(8);
  VectorXd x8 = VectorXd::Zero(8);
  x8.head(5) = x;
  x8.tail(3).setConstant(7.0);
  CHECK((wide.evaluate(x8) - m).norm() < 1e-12);
  CHECK_THROWS_AS(a.left(MatrixXd::Zero(2, 3)), DimensionError);
  CHECK_THROWS_AS(a.right(MatrixXd::Zero(4, 2)), DimensionError);
}

TEST_CASE("weight square root") {
  std::mt19937_64 rng(4);
  const CostWeights w(random_pd(rng, 6), random_pd(rng, 4));
  const MatrixXd s = weight_sqrt(w);
  CHECK((s * s - w.joint()).norm() < 1e-10);
  CHECK((s - s.transpose()).norm() < 1e-12);
}

TEST_CASE("spectral norm lmi") {
  std::mt19937_64 rng(5);
  const int nvar = 4;
  const AffineMatrix m = random_affine(rng, 3, 2, nvar - 1).with_nvar(nvar);
  const conic::ConeBlock b = assemble_spectral_norm_lmi(m, 3);
  CHECK(b.kind == conic::ConeKind::psd);
  CHECK(b.dim == 5);
  VectorXd x = random_vector(rng, nvar);
  const MatrixXd mv = m.evaluate(x);
  const double sigma = Eigen::JacobiSVD<MatrixXd>(mv).singularValues()(0);
  x(3) = 0.7;
  MatrixXd expected(5, 5);
  expected << 0.7 * MatrixXd::Identity(3, 3), mv, mv.transpose(), 0.7 * MatrixXd::Identity(2, 2);
  CHECK((block_value(b, x) - expected).norm() < 1e-12);
  x(3) = sigma * (1 + 1e-9);
  CHECK(min_eig(block_value(b, x)) >= 0.0);
  x(3) = sigma * (1 - 1e-6);
  CHECK(min_eig(block_value(b, x)) < 0.0);
  CHECK_THROWS_AS(assemble_spectral_norm_lmi(m, nvar), DimensionError);
}

TEST_CASE("schur lmi is tight at the regret level") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const LtvSystem sys = random_small_system(rng);
    const CostWeights w(random_pd(rng, sys.n() * sys.horizon(), 0.3),
                        random_pd(rng, sys.m() * sys.horizon(), 0.3));
    const ClairvoyantResult cv = clairvoyant_closed_form(sys, w);
    const ClosedLoopResponse r = response_from_phi_u(sys, random_causal_phi_u(rng, sys, 0.4), true);
    const MatrixXd phi = r.stacked();
    const int k = static_cast<int>(phi.rows());
    const int nw = static_cast<int>(phi.cols());
    // constant response plus one free scalar
    const AffineMatrix a(phi, AffineMatrix::Coef(k * nw, 1));
    const conic::ConeBlock b = assemble_lmi_schur(a, w, cv.cost_operator, 0);
    CHECK(b.dim == k + nw);
    MatrixXd d = phi.transpose() * w.joint() * phi - cv.cost_operator;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (d + d.transpose()), Eigen::EigenvaluesOnly);
    const double lam = es.eigenvalues().maxCoeff();
    const double scale = 1.0 + std::abs(lam);
    CHECK(min_eig(block_value(b, VectorXd::Constant(1, lam + 1e-7 * scale))) >= -1e-12);
    CHECK(min_eig(block_value(b, VectorXd::Constant(1, lam - 1e-5 * scale))) < 0.0);
  }
}

TEST_CASE("schur lmi rejects bad input") {
  const LtvSystem sys = scalar_instance();
  const CostWeights w = CostWeights::identity(sys);
  const AffineMatrix a(MatrixXd::Zero(4, 2), AffineMatrix::Coef(8, 1));
  CHECK_THROWS_AS(assemble_lmi_schur(a, w, -MatrixXd::Identity(2, 2), 0), NotPsdError);
  CHECK_THROWS_AS(assemble_lmi_schur(a, w, MatrixXd::Identity(3, 3), 0), DimensionError);
  CHECK_THROWS_AS(assemble_lmi_schur(a, w, MatrixXd::Identity(2, 2), 1), DimensionError);
  // an asymmetric benchmark enters symmetrized
  MatrixXd c(2, 2);
  c << 1.0, 0.4, 0.0, 1.0;
  MatrixXd cs(2, 2);
  cs << 1.0, 0.2, 0.2, 1.0;
  const MatrixXd v1 = block_value(assemble_lmi_schur(a, w, c, 0), VectorXd::Zero(1));
  const MatrixXd v2 = block_value(assemble_lmi_schur(a, w, cs, 0), VectorXd::Zero(1));
  CHECK((v1 - v2).norm() < 1e-15);
}
