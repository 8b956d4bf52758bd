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
#include "test_support.hpp"

using namespace sls;
using namespace sls::testing;

TEST_CASE("closed form on the scalar instance") {
  const LtvSystem sys = scalar_instance();
  const ClairvoyantResult r = clairvoyant_closed_form(sys, CostWeights::identity(sys));
  MatrixXd phi_u(2, 2), cost(2, 2);
  phi_u << -0.25, -0.5, 0, 0;
  cost << 1.125, 0.25, 0.25, 0.5;
  CHECK((r.response.phi_u - phi_u).norm() < 1e-15);
  CHECK((r.cost_operator - cost).norm() < 1e-15);
  CHECK_FALSE(r.response.causal);
  CHECK(achievability_residual(r.response, sys) <= 1e-12);
  const VectorXd w = VectorXd::Unit(2, 0);
  CHECK(w.dot(r.cost_operator * w) == doctest::Approx(1.125).epsilon(1e-15));
}

TEST_CASE("closed form matches brute-force input optimization") {
  // For each basis disturbance, minimize the quadratic cost over u directly.
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const LtvSystem sys = random_small_system(rng);
    const int nt = sys.n() * sys.horizon();
    const int mt = sys.m() * sys.horizon();
    const CostWeights weights(random_pd(rng, nt, 0.1), random_pd(rng, mt, 0.5));
    const PlantMaps maps = build_plant_maps(sys);
    const ClairvoyantResult r = clairvoyant_closed_form(sys, weights);
    const MatrixXd hess = maps.f.transpose() * weights.q() * maps.f + weights.r();
    for (int k = 0; k < nt; ++k) {
      const VectorXd w = VectorXd::Unit(nt, k);
      const VectorXd u = hess.llt().solve(-maps.f.transpose() * weights.q() * maps.g * w);
      CHECK((r.response.phi_u.col(k) - u).norm() <= 1e-9 * (1.0 + u.norm()));
      const double best = evaluate_cost({SignalKind::disturbance, w}, {SignalKind::input, u},
                                        weights, maps);
      CHECK(r.cost_operator(k, k) == doctest::Approx(best).epsilon(1e-9));
    }
  }
}

TEST_CASE("no actuation") {
  std::mt19937_64 rng(4);
  const LtvSystem sys = LtvSystem::time_invariant(random_matrix(rng, 2, 2, 0.5), MatrixXd::Zero(2, 1), 4);
  const CostWeights weights = CostWeights::identity(sys);
  const ClairvoyantResult r = clairvoyant_closed_form(sys, weights);
  const PlantMaps maps = build_plant_maps(sys);
  CHECK(r.response.phi_u.norm() == 0.0);
  CHECK((r.cost_operator - maps.g.transpose() * maps.g).norm() < 1e-12);
}

TEST_CASE("optimization route agrees with the closed form") {
  SUBCASE("scalar instance") {
    const LtvSystem sys = scalar_instance();
    const CostWeights weights = CostWeights::identity(sys);
    const ClairvoyantResult cf = clairvoyant_closed_form(sys, weights);
    const ClosedLoopResponse a = clairvoyant_via_optimization(sys, weights, MatrixXd::Identity(2, 2));
    const ClosedLoopResponse b =
        clairvoyant_via_optimization(sys, weights, 4.0 * MatrixXd::Identity(2, 2));
    CHECK((a.stacked() - cf.response.stacked()).norm() < 1e-10);
    CHECK((b.stacked() - cf.response.stacked()).norm() < 1e-10);
  }
  SUBCASE("benchmark system") {
    const LtvSystem sys = benchmark_system(0.7);
    const CostWeights weights = CostWeights::identity(sys);
    const ClairvoyantResult cf = clairvoyant_closed_form(sys, weights);
    const ClosedLoopResponse opt = clairvoyant_via_optimization(sys, weights, MatrixXd::Identity(90, 90));
    CHECK((opt.stacked() - cf.response.stacked()).norm() < 1e-6);
  }
  SUBCASE("random systems and covariances") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const LtvSystem sys = random_small_system(rng);
      const int nt = sys.n() * sys.horizon();
      const int mt = sys.m() * sys.horizon();
      const CostWeights weights(random_pd(rng, nt, 0.1), random_pd(rng, mt, 0.5));
      const ClairvoyantResult cf = clairvoyant_closed_form(sys, weights);
      const ClosedLoopResponse opt = clairvoyant_via_optimization(sys, weights, random_pd(rng, nt));
      CHECK((opt.stacked() - cf.response.stacked()).norm() < 1e-6);
    }
  }
  SUBCASE("covariance must be positive definite") {
    const LtvSystem sys = scalar_instance();
    CHECK_THROWS_AS(clairvoyant_via_optimization(sys, CostWeights::identity(sys), MatrixXd::Zero(2, 2)),
                    NotPsdError);
  }
}

TEST_CASE("cost operator consistency") {
  std::mt19937_64 rng(12);
  for (const LtvSystem& sys : {benchmark_system(0.7), benchmark_system(1.05), random_system(rng, 3, 2, 6)}) {
    const CostWeights weights = CostWeights::identity(sys);
    const ClairvoyantResult r = clairvoyant_closed_form(sys, weights);
    const PlantMaps maps = build_plant_maps(sys);
    const MatrixXd& c = r.cost_operator;
    CHECK((c - c.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
    CHECK(es.eigenvalues()(0) >= -1e-9);
    const MatrixXd phi = r.response.stacked();
    const MatrixXd via_phi = phi.transpose() * weights.joint() * phi;
    CHECK((via_phi - c).norm() <= 1e-7 * c.norm());
    for (int k = 0; k < 100; ++k) {
      const VectorXd w = random_vector(rng, static_cast<int>(c.rows()));
      const double cost = evaluate_cost({SignalKind::disturbance, w},
                                        {SignalKind::input, r.response.phi_u * w}, weights, maps);
      CHECK(w.dot(c * w) == doctest::Approx(cost).epsilon(1e-7));
    }
  }
}

TEST_CASE("clairvoyant dominance over causal responses") {
  std::mt19937_64 rng(15);
  const LtvSystem sys = benchmark_system(0.7);
  const CostWeights weights = CostWeights::identity(sys);
  const PlantMaps maps = build_plant_maps(sys);
  const ClairvoyantResult r = clairvoyant_closed_form(sys, weights);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd phi_u = random_causal_phi_u(rng, sys, 0.1);
    for (int k = 0; k < 100; ++k) {
      const VectorXd w = random_vector(rng, 90);
      const double nc = evaluate_cost({SignalKind::disturbance, w},
                                      {SignalKind::input, r.response.phi_u * w}, weights, maps);
      const double causal = evaluate_cost({SignalKind::disturbance, w},
                                          {SignalKind::input, phi_u * w}, weights, maps);
      CHECK(nc <= causal + 1e-8);
    }
  }
}

TEST_CASE("clairvoyant controller is noncausal on the benchmark system") {
  const LtvSystem sys = benchmark_system(0.7);
  const ClairvoyantResult r = clairvoyant_closed_form(sys, CostWeights::identity(sys));
  double above = 0.0;
  for (int i = 0; i < 30; ++i)
    for (int j = i + 1; j < 30; ++j)
      above = std::max(above, r.response.phi_u.block(2 * i, 3 * j, 2, 3).cwiseAbs().maxCoeff());
  CHECK(above > 1e-6);
}
