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

#include "sls/synthesis.hpp"
#include "test_support.hpp"

using namespace sls;
using namespace sls::testing;

namespace {

// Phi for the scalar instance as an explicit function of the causal entries.
MatrixXd scalar_phi(double p0, double p1, double p2) {
  MatrixXd phi(4, 2);
  phi << 1.0, 0.0, 0.5 + p0, 1.0, p0, 0.0, p1, p2;
  return phi;
}

SafetySpec box_spec(const LtvSystem& sys, double x_bound, double u_bound, double w_bound) {
  const int nT = sys.n() * sys.horizon();
  const int mT = sys.m() * sys.horizon();
  VectorXd hi(nT + mT);
  hi << VectorXd::Constant(nT, x_bound), VectorXd::Constant(mT, u_bound);
  return SafetySpec{PolytopeSet::box(-hi, hi),
                    PolytopeSet::box(VectorXd::Constant(nT, -w_bound),
                                     VectorXd::Constant(nT, w_bound))};
}

double frobenius_cost(const ClosedLoopResponse& r, const CostWeights& w, const MatrixXd& sigma) {
  const MatrixXd phi = r.stacked();
  return (w.joint() * phi * sigma * phi.transpose()).trace();
}

double spectral_cost(const ClosedLoopResponse& r, const CostWeights& w) {
  const MatrixXd phi = r.stacked();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(phi.transpose() * w.joint() * phi,
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Independent robust row check: max over W of each row of H Phi.
double worst_row_excess(const ClosedLoopResponse& r, const SafetySpec& spec) {
  const MatrixXd hphi = spec.constraint.h_mat() * r.stacked();
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < hphi.rows(); ++i) {
    worst = std::max(worst, spec.disturbance_set.support(hphi.row(i).transpose()) -
                                spec.constraint.h_vec()(i));
  }
  return worst;
}

}  // namespace

TEST_CASE("h2 on the scalar instance") {
  const LtvSystem sys = scalar_instance();
  const CostWeights w = CostWeights::identity(sys);
  const MatrixXd sigma = MatrixXd::Identity(2, 2);
  const double oracle = minimize_over_causal_family([](double a, double b, double c) {
    return scalar_phi(a, b, c).squaredNorm();
  });
  CHECK(oracle == doctest::Approx(2.125).epsilon(1e-12));

  SUBCASE("least squares route") {
    const SynthesisResult r = synth_h2(sys, w, sigma, std::nullopt);
    REQUIRE(r.optimal());
    CHECK(r.kind == "h2");
    CHECK(r.objective_value == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(r.response.phi_u(0, 0) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(std::abs(r.response.phi_u(1, 0)) < 1e-12);
    CHECK(std::abs(r.response.phi_u(1, 1)) < 1e-12);
    CHECK(r.response.phi_u(0, 1) == 0.0);
    CHECK(r.response.causal);
    CHECK_FALSE(r.certificate.has_value());
  }
  SUBCASE("cone route with inactive safety") {
    const SynthesisResult r = synth_h2(sys, w, sigma, box_spec(sys, 1e3, 1e3, 1.0));
    REQUIRE(r.optimal());
    CHECK(r.objective_value == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(r.response.phi_u(0, 0) == doctest::Approx(-0.25).epsilon(1e-5));
    REQUIRE(r.certificate.has_value());
  }
}

TEST_CASE("h2 objective agrees with the response") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const LtvSystem sys = random_system(rng, 2, 2, 4);
    const int nT = 8;
    const CostWeights w(random_pd(rng, nT, 0.2), random_pd(rng, nT, 0.5));
    const MatrixXd sigma = random_pd(rng, nT, 0.3);
    const SynthesisResult a = synth_h2(sys, w, sigma, std::nullopt);
    REQUIRE(a.optimal());
    CHECK(a.objective_value == doctest::Approx(frobenius_cost(a.response, w, sigma)).epsilon(1e-9));
    const SynthesisResult b = synth_h2(sys, w, sigma, box_spec(sys, 1e4, 1e4, 1.0));
    REQUIRE(b.optimal());
    CHECK(b.objective_value == doctest::Approx(frobenius_cost(b.response, w, sigma)).epsilon(1e-6));
    CHECK(b.objective_value == doctest::Approx(a.objective_value).epsilon(1e-6));
  }
}

TEST_CASE("h2 without actuation") {
  std::mt19937_64 rng(5);
  const LtvSystem sys = LtvSystem::time_invariant(random_matrix(rng, 3, 3, 0.5),
                                                  MatrixXd::Zero(3, 2), 5);
  const CostWeights w(random_pd(rng, 15, 0.2), random_pd(rng, 10, 0.5));
  const MatrixXd sigma = random_pd(rng, 15, 0.3);
  const SynthesisResult r = synth_h2(sys, w, sigma, std::nullopt);
  REQUIRE(r.optimal());
  const PlantMaps maps = build_plant_maps(sys);
  CHECK(r.response.phi_u.cwiseAbs().maxCoeff() < 1e-12);
  const double expected = (maps.g.transpose() * w.q() * maps.g * sigma).trace();
  CHECK(r.objective_value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("hinf of the identity response") {
  const LtvSystem sys = LtvSystem::time_invariant(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), 3);
  const SynthesisResult r = synth_hinf(sys, CostWeights::identity(sys), std::nullopt);
  REQUIRE(r.optimal());
  CHECK(r.objective_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK((r.response.phi_x - MatrixXd::Identity(6, 6)).norm() < 1e-12);
}

TEST_CASE("hinf on the scalar instance") {
  const LtvSystem sys = scalar_instance();
  const CostWeights w = CostWeights::identity(sys);
  const SynthesisResult r = synth_hinf(sys, w, std::nullopt);
  REQUIRE(r.optimal());
  CHECK(r.objective_value == doctest::Approx(spectral_cost(r.response, w)).epsilon(1e-6));
  const double oracle = minimize_over_causal_family([](double a, double b, double c) {
    const MatrixXd phi = scalar_phi(a, b, c);
    return lambda_max_2x2(phi.transpose() * phi);
  });
  CHECK(r.objective_value == doctest::Approx(oracle).epsilon(1e-5));
  CHECK(r.objective_value <= oracle + 1e-7);
}

TEST_CASE("hinf objective agrees with the response") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 4; ++trial) {
    const LtvSystem sys = random_system(rng, 2, 1, 4);
    const CostWeights w(random_pd(rng, 8, 0.2), random_pd(rng, 4, 0.5));
    const SynthesisResult r = synth_hinf(sys, w, std::nullopt);
    REQUIRE(r.optimal());
    CHECK(r.objective_value == doctest::Approx(spectral_cost(r.response, w)).epsilon(1e-6));
    CHECK(r.response.causal);
    CHECK(is_block_lower(r.response.phi_u, 1, 2));
  }
}

TEST_CASE("dualized box support is the l1 norm") {
  const PolytopeSet box = PolytopeSet::box(-VectorXd::Ones(3), VectorXd::Ones(3));
  MatrixXd c(1, 3);
  c << 1.0, -2.0, 0.5;
  auto solve_with = [&](const MatrixXd& row, double bound) {
    conic::ConicProgram prog(0);
    const AffineMatrix hphi(row, AffineMatrix::Coef(3, 0));
    const SafetyDualization d =
        dualize_safety(prog, hphi, VectorXd::Constant(1, bound), box);
    prog.objective = VectorXd::Zero(prog.nvar);
    const conic::ConicSolution sol = conic::solve(prog, 1e-9);
    return std::make_pair(sol, d);
  };
  CHECK(box.support(c.row(0).transpose()) == doctest::Approx(3.5));
  {
    const auto [sol, d] = solve_with(c, 3.5);
    CHECK(sol.report.status == conic::SolveStatus::optimal);
    const DualCertificate z = d.certificate(sol.x);
    CHECK(z.z.minCoeff() >= 0.0);
    CHECK((z.z.transpose() * box.h_mat() - c).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((z.z.transpose() * box.h_vec())(0) <= 3.5 + 1e-6);
  }
  {
    const auto [sol, d] = solve_with(c, 3.4);
    CHECK(sol.report.status == conic::SolveStatus::infeasible);
  }
  {
    const auto [sol, d] = solve_with(MatrixXd::Zero(1, 3), 0.0);
    CHECK(sol.report.status == conic::SolveStatus::optimal);
    CHECK(d.certificate(sol.x).z.cwiseAbs().maxCoeff() < 1e-6);
  }
  {
    conic::ConicProgram prog(0);
    const AffineMatrix hphi(MatrixXd::Zero(2, 3), AffineMatrix::Coef(6, 0));
    CHECK_THROWS_AS(dualize_safety(prog, hphi, VectorXd::Zero(3), box), DimensionError);
  }
}

TEST_CASE("one-step regret vanishes") {
  std::mt19937_64 rng(8);
  const LtvSystem sys(2, 2, 1, {}, {});
  const CostWeights w = CostWeights::identity(sys);
  const Benchmark bench = Benchmark::clairvoyant(clairvoyant_closed_form(sys, w));
  const SynthesisResult r = synth_regret(sys, w, std::nullopt, bench);
  REQUIRE(r.optimal());
  CHECK(r.objective_value <= 1e-6);
  CHECK(regret_value(r.response, bench.cost, w) <= 1e-6);
}

TEST_CASE("regret on the scalar instance matches brute force") {
  const LtvSystem sys = scalar_instance();
  const CostWeights w = CostWeights::identity(sys);
  const Benchmark bench = Benchmark::clairvoyant(clairvoyant_closed_form(sys, w));
  const MatrixXd c = bench.cost;
  const double oracle = minimize_over_causal_family([&](double a, double b, double d) {
    const MatrixXd phi = scalar_phi(a, b, d);
    return lambda_max_2x2(phi.transpose() * phi - c);
  });
  const SynthesisResult r = synth_regret(sys, w, std::nullopt, bench);
  REQUIRE(r.optimal());
  CHECK(r.benchmark_id == "clairvoyant");
  CHECK(r.objective_value == doctest::Approx(oracle).epsilon(1e-4));
  const MatrixXd phi = r.response.stacked();
  CHECK(unit_circle_max(phi.transpose() * phi - c) ==
        doctest::Approx(r.objective_value).epsilon(1e-4));
  CHECK(regret_value(r.response, c, w) == doctest::Approx(r.objective_value).epsilon(1e-5));
}

TEST_CASE("regret value") {
  const LtvSystem sys = scalar_instance();
  const CostWeights w = CostWeights::identity(sys);
  const ClairvoyantResult cv = clairvoyant_closed_form(sys, w);
  CHECK(std::abs(regret_value(cv.response, cv.cost_operator, w)) < 1e-9);

  const ClosedLoopResponse zero = zero_controller_response(sys);
  const PlantMaps maps = build_plant_maps(sys);
  const MatrixXd delta = maps.g.transpose() * maps.g - cv.cost_operator;
  CHECK(regret_value(zero, cv.cost_operator, w) ==
        doctest::Approx(unit_circle_max(delta)).epsilon(1e-4));

  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const LtvSystem s = random_small_system(rng);
    const CostWeights cw = CostWeights::identity(s);
    const ClairvoyantResult c = clairvoyant_closed_form(s, cw);
    const ClosedLoopResponse r = response_from_phi_u(s, random_causal_phi_u(rng, s, 0.5), true);
    const MatrixXd phi = r.stacked();
    MatrixXd d = phi.transpose() * cw.joint() * phi - c.cost_operator;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (d + d.transpose()));
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
  CHECK_THROWS_AS(regret_value(zero, MatrixXd::Identity(3, 3), w), DimensionError);
}

TEST_CASE("safe clairvoyant with inactive constraints") {
  std::mt19937_64 rng(31);
  const LtvSystem sys = random_system(rng, 2, 1, 4);
  const CostWeights w = CostWeights::identity(sys);
  const SafetySpec spec = box_spec(sys, 1e3, 1e3, 1.0);
  const ClairvoyantResult cv = clairvoyant_closed_form(sys, w);
  const SynthesisResult r =
      synth_safe_clairvoyant(sys, w, spec, BenchmarkMode::h2, MatrixXd::Identity(8, 8));
  REQUIRE(r.optimal());
  CHECK_FALSE(r.response.causal);
  CHECK((r.response.stacked() - cv.response.stacked()).norm() < 1e-6);
  CHECK(r.objective_value == doctest::Approx(cv.cost_operator.trace()).epsilon(1e-6));
  const Benchmark b = safe_benchmark(r, w);
  CHECK(b.id == "safe_clairvoyant_h2");
  CHECK((b.cost - cv.cost_operator).norm() < 1e-5);
}

TEST_CASE("safe controllers on a short horizon") {
  const LtvSystem sys = benchmark_system(0.7, 6);
  const CostWeights w = CostWeights::identity(sys);
  const SafetySpec spec = box_spec(sys, 3.0, 2.0, 1.0);
  const Benchmark bench = Benchmark::clairvoyant(clairvoyant_closed_form(sys, w));
  const SynthesisResult h2 = synth_h2(sys, w, MatrixXd::Identity(18, 18), spec);
  const SynthesisResult hinf = synth_hinf(sys, w, spec);
  const SynthesisResult sr = synth_regret(sys, w, spec, bench);
  REQUIRE(h2.optimal());
  REQUIRE(hinf.optimal());
  REQUIRE(sr.optimal());

  const double lam = sr.objective_value;
  CHECK(lam > 0.0);
  CHECK(regret_value(sr.response, bench.cost, w) == doctest::Approx(lam).epsilon(1e-5));
  CHECK(lam <= regret_value(h2.response, bench.cost, w) + 1e-6);
  CHECK(lam <= regret_value(hinf.response, bench.cost, w) + 1e-6);
  CHECK(h2.objective_value ==
        doctest::Approx(frobenius_cost(h2.response, w, MatrixXd::Identity(18, 18))).epsilon(1e-6));
  CHECK(hinf.objective_value == doctest::Approx(spectral_cost(hinf.response, w)).epsilon(1e-6));

  for (const SynthesisResult* r : {&h2, &hinf, &sr}) {
    CAPTURE(r->kind);
    REQUIRE(r->certificate.has_value());
    const CertificateCheck cc = check_certificate(*r->certificate, r->response, spec);
    CHECK(cc.bound_violation <= 1e-8);
    CHECK(cc.equality_error <= 1e-7);
    CHECK(cc.min_entry >= 0.0);
    CHECK(worst_row_excess(r->response, spec) <= 1e-6);
    CHECK(achievability_residual(r->response, sys) <= 1e-6);
    CHECK(is_block_lower(r->response.phi_u, sys.m(), sys.n()));
  }

  const SynthesisResult free_hinf = synth_hinf(sys, w, std::nullopt);
  REQUIRE(free_hinf.optimal());
  CHECK(hinf.objective_value >= free_hinf.objective_value - 1e-6);

  SUBCASE("enlarging W never lowers the regret") {
    // 1.2 stays feasible; 1.5 is infeasible on this instance, i.e. lambda = +inf
    for (double f : {1.2, 1.5}) {
      CAPTURE(f);
      const SafetySpec wide{spec.constraint, spec.disturbance_set.scaled(f)};
      const SynthesisResult r = synth_regret(sys, w, wide, bench);
      if (f == 1.2) REQUIRE(r.optimal());
      if (r.optimal()) {
        CHECK(r.objective_value >= lam - 1e-6 * (1.0 + lam));
      } else {
        CHECK(r.report.status == conic::SolveStatus::infeasible);
      }
    }
  }
  SUBCASE("shrinking the safety box ends in infeasibility") {
    conic::SolveStatus last = conic::SolveStatus::optimal;
    for (double f : {0.8, 0.5, 0.2}) {
      const SafetySpec tight{spec.constraint.scaled(f), spec.disturbance_set};
      last = synth_regret(sys, w, tight, bench).report.status;
      if (last != conic::SolveStatus::optimal) break;
    }
    CHECK(last == conic::SolveStatus::infeasible);
  }
}

TEST_CASE("infeasible specification is reported") {
  const LtvSystem sys = benchmark_system(0.7, 4);
  const SafetySpec spec = box_spec(sys, 0.5, 2.0, 1.0);
  const SynthesisResult r = synth_h2(sys, CostWeights::identity(sys), MatrixXd::Identity(12, 12), spec);
  CHECK(r.report.status == conic::SolveStatus::infeasible);
  CHECK_FALSE(r.certificate.has_value());
}
