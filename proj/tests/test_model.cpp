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

#include <cmath>
#include <random>

#include "sls/model.hpp"
#include "test_support.hpp"

using namespace sls;
using namespace sls::testing;

TEST_CASE("system validation") {
  CHECK_THROWS_AS(LtvSystem(1, 1, 0, {}, {}), InvalidSystemError);
  CHECK_THROWS_AS(LtvSystem(0, 1, 1, {}, {}), InvalidSystemError);
  CHECK_THROWS_AS(LtvSystem(1, 1, 3, {MatrixXd::Ones(1, 1)}, {MatrixXd::Ones(1, 1)}),
                  InvalidSystemError);
  CHECK_THROWS_AS(LtvSystem(2, 1, 2, {MatrixXd::Ones(1, 1)}, {MatrixXd::Ones(2, 1)}),
                  InvalidSystemError);
  CHECK_THROWS_AS(LtvSystem(2, 1, 2, {MatrixXd::Ones(2, 2)}, {MatrixXd::Ones(2, 2)}),
                  InvalidSystemError);
  const LtvSystem ok = benchmark_system(0.7);
  CHECK(ok.n() == 3);
  CHECK(ok.m() == 2);
  CHECK(ok.horizon() == 30);
  CHECK(ok.a().size() == 29);
}

TEST_CASE("block operators") {
  SUBCASE("horizon one") {
    const LtvSystem sys = LtvSystem::time_invariant(MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), 1);
    const BlockOperators ops = build_block_operators(sys);
    CHECK(ops.z.size() == 1);
    CHECK(ops.z(0, 0) == 0.0);
    CHECK(ops.a(0, 0) == 0.0);
    CHECK(ops.b(0, 0) == 0.0);
  }
  SUBCASE("scalar instance") {
    const BlockOperators ops = build_block_operators(scalar_instance());
    MatrixXd z(2, 2), a(2, 2), b(2, 2);
    z << 0, 0, 1, 0;
    a << 0.5, 0, 0, 0;
    b << 1, 0, 0, 0;
    CHECK(ops.z == z);
    CHECK(ops.a == a);
    CHECK(ops.b == b);
  }
  SUBCASE("benchmark system") {
    const LtvSystem sys = benchmark_system(0.7);
    const BlockOperators ops = build_block_operators(sys);
    for (int t = 0; t < 29; ++t) {
      CHECK((ops.a.block(3 * t, 3 * t, 3, 3) - sys.a()[0]).norm() == 0.0);
      CHECK((ops.z.block(3 * (t + 1), 3 * t, 3, 3) - MatrixXd::Identity(3, 3)).norm() == 0.0);
    }
    CHECK(ops.a.block(87, 87, 3, 3).norm() == 0.0);
    CHECK(ops.b.block(87, 58, 3, 2).norm() == 0.0);
    CHECK(std::abs(ops.a(0, 0) - 0.49) < 1e-15);
  }
}

TEST_CASE("plant maps") {
  SUBCASE("scalar instance") {
    const PlantMaps maps = build_plant_maps(scalar_instance());
    MatrixXd f(2, 2), g(2, 2);
    f << 0, 0, 1, 0;
    g << 1, 0, 0.5, 1;
    CHECK((maps.f - f).norm() == 0.0);
    CHECK((maps.g - g).norm() == 0.0);
  }
  SUBCASE("no dynamics memory") {
    std::mt19937_64 rng(3);
    const LtvSystem sys = LtvSystem::time_invariant(MatrixXd::Zero(2, 2), random_matrix(rng, 2, 1), 4);
    CHECK(build_plant_maps(sys).g == MatrixXd::Identity(8, 8));
  }
  SUBCASE("impulse responses of the benchmark system") {
    const LtvSystem sys = benchmark_system(0.7);
    const PlantMaps maps = build_plant_maps(sys);
    for (int k = 0; k < 90; k += 7) {
      const VectorXd w = VectorXd::Unit(90, k);
      CHECK((maps.g.col(k) - simulate_states(sys, w, VectorXd::Zero(60))).norm() < 1e-12);
    }
    for (int k = 0; k < 60; k += 5) {
      const VectorXd u = VectorXd::Unit(60, k);
      CHECK((maps.f.col(k) - simulate_states(sys, VectorXd::Zero(90), u)).norm() < 1e-12);
    }
    // (t, k) block of G equals A^(t-k)
    MatrixXd p = MatrixXd::Identity(3, 3);
    for (int d = 0; d < 30; ++d) {
      CHECK((maps.g.block(3 * d, 0, 3, 3) - p).norm() < 1e-12);
      p = sys.a()[0] * p;
    }
  }
  SUBCASE("operator identities on random systems") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const LtvSystem sys = random_small_system(rng);
      const BlockOperators ops = build_block_operators(sys);
      const PlantMaps maps = build_plant_maps(sys);
      const int nt = sys.n() * sys.horizon();
      const MatrixXd lhs = (MatrixXd::Identity(nt, nt) - ops.z * ops.a) * maps.g;
      CHECK((lhs - MatrixXd::Identity(nt, nt)).norm() < 1e-12 * (1.0 + maps.g.norm()));
      CHECK((maps.f - maps.g * ops.z * ops.b).norm() < 1e-12 * (1.0 + maps.f.norm()));
      CHECK(is_block_lower(maps.g, sys.n(), sys.n()));
      CHECK(is_block_lower(maps.f, sys.n(), sys.m()));
    }
  }
}

TEST_CASE("cost weights validation") {
  CHECK_THROWS_AS(CostWeights(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2)), NotPsdError);
  MatrixXd asym = MatrixXd::Identity(2, 2);
  asym(0, 1) = 0.1;
  CHECK_THROWS_AS(CostWeights(asym, MatrixXd::Identity(2, 2)), NotPsdError);
  CHECK_THROWS_AS(CostWeights(-MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)), NotPsdError);
  CHECK_THROWS_AS(CostWeights(MatrixXd::Identity(2, 3), MatrixXd::Identity(2, 2)), DimensionError);
  CHECK_NOTHROW(CostWeights(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2)));
}

TEST_CASE("stacked signal lengths") {
  const LtvSystem sys = benchmark_system(0.7);
  const StackedSignal w{SignalKind::disturbance, VectorXd::Zero(90)};
  const StackedSignal u{SignalKind::input, VectorXd::Zero(60)};
  const StackedSignal x{SignalKind::state, VectorXd::Zero(60)};
  CHECK_NOTHROW(w.validate(sys));
  CHECK_NOTHROW(u.validate(sys));
  CHECK_THROWS_AS(x.validate(sys), DimensionError);
}

TEST_CASE("achievability residual") {
  const LtvSystem sys = benchmark_system(0.7);
  CHECK(achievability_residual(zero_controller_response(sys), sys) < 1e-12);
  ClosedLoopResponse bad;
  bad.phi_x = MatrixXd::Identity(90, 90);
  bad.phi_u = MatrixXd::Zero(60, 90);
  CHECK(achievability_residual(bad, sys) > 0.1);
  CHECK_THROWS_AS(check_response(bad, sys), ContractViolation);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const LtvSystem s = random_small_system(rng);
    const ClosedLoopResponse r = response_from_phi_u(s, random_causal_phi_u(rng, s, 1.0), true);
    CHECK(achievability_residual(r, s) < 1e-10 * (1.0 + r.phi_x.norm()));
    CHECK_NOTHROW(check_response(r, s));
  }
}

TEST_CASE("evaluate cost") {
  const LtvSystem sys = scalar_instance();
  const PlantMaps maps = build_plant_maps(sys);
  const CostWeights w = CostWeights::identity(sys);
  auto cost = [&](double w0, double w1, double u0, double u1) {
    return evaluate_cost({SignalKind::disturbance, (VectorXd(2) << w0, w1).finished()},
                         {SignalKind::input, (VectorXd(2) << u0, u1).finished()}, w, maps);
  };
  CHECK(cost(0, 0, 0, 0) == 0.0);
  CHECK(cost(1, 0, -0.25, 0) == doctest::Approx(1.125).epsilon(1e-15));
  CHECK(cost(1, 0, 0, 0) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("psd square root") {
  CHECK((psd_sqrt(MatrixXd::Identity(3, 3)) - MatrixXd::Identity(3, 3)).norm() < 1e-14);
  MatrixXd d = MatrixXd::Zero(2, 2);
  d.diagonal() << 4, 9;
  MatrixXd e = MatrixXd::Zero(2, 2);
  e.diagonal() << 2, 3;
  CHECK((psd_sqrt(d) - e).norm() < 1e-14);
  MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  const MatrixXd s = psd_sqrt(m);
  CHECK((s * s - m).norm() < 1e-10);
  CHECK((s - s.transpose()).norm() == 0.0);
  MatrixXd slightly = MatrixXd::Zero(2, 2);
  slightly(0, 0) = 1.0;
  slightly(1, 1) = -5e-10;
  const MatrixXd c = psd_sqrt(slightly);
  CHECK(std::abs(c(1, 1)) < 1e-14);
  slightly(1, 1) = -1e-6;
  CHECK_THROWS_AS(psd_sqrt(slightly), NotPsdError);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd g = random_matrix(rng, 6, 3);
    const MatrixXd p = g * g.transpose();
    const MatrixXd r = psd_sqrt(p);
    CHECK((r * r - p).norm() <= 1e-8 * (1.0 + p.norm()));
  }
}

TEST_CASE("woodbury identity") {
  std::mt19937_64 rng(21);
  auto check = [](const LtvSystem& sys, const MatrixXd& q, const MatrixXd& r) {
    const PlantMaps maps = build_plant_maps(sys);
    const MatrixXd& f = maps.f;
    const int nt = static_cast<int>(q.rows());
    const MatrixXd p = r + f.transpose() * q * f;
    const MatrixXd lhs =
        q * f * p.ldlt().solve(f.transpose() * q) +
        q * (MatrixXd::Identity(nt, nt) + f * r.ldlt().solve(f.transpose()) * q)
                .partialPivLu()
                .inverse();
    CHECK((lhs - q).norm() <= 1e-7 * q.norm());
  };
  for (int trial = 0; trial < 10; ++trial) {
    const LtvSystem sys = random_small_system(rng);
    const int nt = sys.n() * sys.horizon();
    const int mt = sys.m() * sys.horizon();
    check(sys, random_pd(rng, nt), random_pd(rng, mt));
  }
  const LtvSystem bench_sys = benchmark_system(0.7);
  check(bench_sys, MatrixXd::Identity(90, 90), MatrixXd::Identity(60, 60));
  check(bench_sys, random_pd(rng, 90), random_pd(rng, 60));
}

TEST_CASE("controller recovery") {
  SUBCASE("zero response") {
    const LtvSystem sys = benchmark_system(0.7);
    const ControllerRecovery rec = recover_controller(zero_controller_response(sys), sys);
    CHECK(rec.controller.k().norm() == 0.0);
    CHECK_FALSE(rec.ill_conditioned);
  }
  SUBCASE("state feedback on the scalar instance") {
    const LtvSystem sys = scalar_instance();
    MatrixXd phi_u = MatrixXd::Zero(2, 2);
    phi_u(0, 0) = -0.3;
    phi_u(1, 0) = 0.2;
    phi_u(1, 1) = -0.4;
    const ClosedLoopResponse r = response_from_phi_u(sys, phi_u, true);
    const ControllerRecovery rec = recover_controller(r, sys);
    CHECK(rec.controller.k()(0, 1) == 0.0);
    CHECK(std::abs(rec.controller.k()(0, 0) + 0.3) < 1e-15);
    // K = Phi_u Phi_x^{-1}
    CHECK((rec.controller.k() * r.phi_x - phi_u).norm() < 1e-14);
  }
  SUBCASE("round trip on random systems") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
      const LtvSystem sys = random_small_system(rng);
      const ClosedLoopResponse r = response_from_phi_u(sys, random_causal_phi_u(rng, sys, 0.5), true);
      const ControllerRecovery rec = recover_controller(r, sys);
      CHECK(is_block_lower(rec.controller.k(), sys.m(), sys.n()));
      const ClosedLoopResponse back = response_from_controller(rec.controller, sys);
      CHECK((back.phi_u - r.phi_u).norm() <= 1e-7 * (1.0 + r.phi_u.norm()));
      CHECK((back.phi_x - r.phi_x).norm() <= 1e-7 * (1.0 + r.phi_x.norm()));
    }
  }
  SUBCASE("noncausal input is rejected") {
    const LtvSystem sys = scalar_instance();
    MatrixXd phi_u = MatrixXd::Zero(2, 2);
    phi_u(0, 1) = 1.0;
    CHECK_THROWS_AS(recover_controller(response_from_phi_u(sys, phi_u, false), sys),
                    ContractViolation);
    CHECK_THROWS_AS(CausalController(phi_u, 1, 1), ContractViolation);
  }
}

TEST_CASE("closed-loop rollout matches the response") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const LtvSystem sys = random_small_system(rng);
    const ClosedLoopResponse r = response_from_phi_u(sys, random_causal_phi_u(rng, sys, 0.5), true);
    for (int k = 0; k < 100; ++k) {
      const VectorXd w = random_vector(rng, sys.n() * sys.horizon());
      const VectorXd u = r.phi_u * w;
      const VectorXd x = simulate_states(sys, w, u);
      const VectorXd expect = r.phi_x * w;
      CHECK((x - expect).norm() <= 1e-8 * (1.0 + expect.norm()));
    }
  }
}

TEST_CASE("polytope sets") {
  const PolytopeSet box = PolytopeSet::box(-VectorXd::Ones(3), 2.0 * VectorXd::Ones(3));
  REQUIRE(box.box_bounds().has_value());
  const VectorXd c = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
  CHECK(box.support(c) == doctest::Approx(2.0 + 2.0 + 1.0));
  CHECK(box.contains(VectorXd::Zero(3), 0.0));
  CHECK_FALSE(box.contains(3.0 * VectorXd::Ones(3), 0.0));

  // {v : v_i >= -1, v_1 + v_2 + v_3 <= 1}
  MatrixXd h(4, 3);
  h << -MatrixXd::Identity(3, 3), Eigen::RowVector3d::Ones();
  VectorXd hv(4);
  hv << 1, 1, 1, 1;
  const PolytopeSet simplex(h, hv);
  CHECK_FALSE(simplex.box_bounds().has_value());
  CHECK(simplex.support(VectorXd::Unit(3, 0)) == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(simplex.support(-VectorXd::Unit(3, 1)) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK_NOTHROW(validate_disturbance_set(simplex));

  MatrixXd half(1, 2);
  half << 1, 0;
  const PolytopeSet unbounded(half, VectorXd::Ones(1));
  CHECK(std::isinf(unbounded.support(VectorXd::Unit(2, 1))));
  CHECK_THROWS_AS(validate_disturbance_set(unbounded), InvalidSetError);
  CHECK_THROWS_AS(validate_disturbance_set(PolytopeSet::box(VectorXd::Zero(2), VectorXd::Ones(2))),
                  InvalidSetError);
  CHECK_NOTHROW(validate_disturbance_set(PolytopeSet::box(-VectorXd::Ones(2), VectorXd::Ones(2))));
  CHECK(box.scaled(2.0).support(c) == doctest::Approx(10.0));
}
