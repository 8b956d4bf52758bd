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
#include <filesystem>
#include <fstream>
#include <random>

#include "sls/bench.hpp"
#include "test_support.hpp"

using namespace sls;
using namespace sls::testing;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(SLS_SOURCE_DIR) / "configs";

std::string small_config(const std::string& controllers, double x_bound = 3.0,
                         const std::string& extra = "") {
  return R"cfg({
    "horizon": 6,
    "system": {"A": [[0.7, 0.2, 0.0], [0.3, 0.7, -0.1], [0.0, -0.2, 0.8]],
               "B": [[1.0, 0.2], [2.0, 0.3], [1.5, 0.5]], "rho": 0.7},
    "disturbance_set": {"lo": -1, "hi": 1},
    "safety": {"x": {"lo": )cfg" + std::to_string(-x_bound) + R"cfg(, "hi": )cfg" +
         std::to_string(x_bound) + R"cfg(}, "u": {"lo": -2, "hi": 2}},
    "controllers": )cfg" + controllers + R"cfg(,
    "profiles": ["gaussian", "uniform(0,1)", "sin", "worst"],
    "realizations": 50,
    "base_seed": 9,
    "verification_rollouts": 200)cfg" + extra + "\n}";
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sls_test_" + name);
}

void expect_config_error(const std::string& text, const std::string& field) {
  CAPTURE(field);
  try {
    parse_config(text);
    FAIL("accepted an invalid config");
  } catch (const ConfigError& e) {
    CAPTURE(std::string(e.what()));
    CHECK(std::string(e.what()).find(field) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("shipped configs") {
  const BenchmarkConfig a = load_config(kConfigs / "rho07.cfg");
  CHECK(a.system.horizon() == 30);
  CHECK(a.system.n() == 3);
  CHECK(a.system.m() == 2);
  MatrixXd a0(3, 3);
  a0 << 0.7, 0.2, 0.0, 0.3, 0.7, -0.1, 0.0, -0.2, 0.8;
  CHECK((a.system.a()[0] - 0.7 * a0).norm() < 1e-12);
  CHECK(a.system.a()[0].eigenvalues().cwiseAbs().maxCoeff() == doctest::Approx(0.7));
  REQUIRE(a.safety.has_value());
  CHECK(a.safety->constraint.support(VectorXd::Unit(150, 0)) == doctest::Approx(3.0));
  CHECK(a.safety->constraint.support(-VectorXd::Unit(150, 89)) == doctest::Approx(3.0));
  CHECK(a.safety->constraint.support(VectorXd::Unit(150, 90)) == doctest::Approx(2.0));
  CHECK(a.disturbance_set.support(VectorXd::Ones(90)) == doctest::Approx(90.0));
  CHECK(a.controllers.size() == 3);
  REQUIRE(a.sim_x0.has_value());
  CHECK(a.sim_x0->isZero(0.0));
  CHECK(a.realizations == 1000);

  const BenchmarkConfig b = load_config(kConfigs / "rho105.cfg");
  CHECK(b.system.a()[0].eigenvalues().cwiseAbs().maxCoeff() == doctest::Approx(1.05));
  CHECK(b.safety->constraint.support(VectorXd::Unit(150, 0)) == doctest::Approx(10.0));
  CHECK(b.safety->constraint.support(VectorXd::Unit(150, 149)) == doctest::Approx(10.0));
}

TEST_CASE("config diagnostics") {
  const std::string ok = small_config(R"(["SH2"])");
  CHECK_NOTHROW(parse_config(ok));
  std::string t0 = ok;
  t0.replace(t0.find("\"horizon\": 6"), 12, "\"horizon\": 0");
  expect_config_error(t0, "horizon");
  expect_config_error(R"({"horizon": 3})", "system");
  expect_config_error(small_config(R"(["SH3"])"), "controllers[0]");
  expect_config_error(small_config(R"(["SH2"])", 3.0, R"(, "colour": 1)"), "colour");
  expect_config_error(small_config(R"(["SH2"])", 3.0, R"(, "realizations": 0)"), "realizations");
  std::string bad_b = ok;
  bad_b.replace(bad_b.find("[1.5, 0.5]"), 10, "[1.5, 0.5, 0.1]");
  expect_config_error(bad_b, "B");
  std::string open_w = ok;
  const std::string box = R"({"lo": -1, "hi": 1})";
  std::string upper_only = R"({"H": [)";
  for (int i = 0; i < 18; ++i) {
    upper_only += i ? ", [" : "[";
    for (int j = 0; j < 18; ++j) upper_only += (j ? ", " : "") + std::string(i == j ? "1" : "0");
    upper_only += "]";
  }
  upper_only += R"(], "h": 1})";
  open_w.replace(open_w.find(box), box.size(), upper_only);
  expect_config_error(open_w, "unbounded");
  std::string narrow_w = ok;
  narrow_w.replace(narrow_w.find(box), box.size(), R"({"H": [[1, 0, 0]], "h": [1]})");
  expect_config_error(narrow_w, "disturbance_set.H");
  expect_config_error("{ not json", "parse error");
  CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("controller files") {
  const BenchmarkConfig cfg = parse_config(small_config(R"(["SR_nc"])"));
  const SynthesisResult sr = synthesize_controller(cfg, ControllerKind::sr_nc);
  REQUIRE(sr.optimal());
  const auto path = temp_path("sr.json");
  serialize_controller(sr, cfg.system, cfg.weights, path, cfg.disturbance_set);

  const StoredController s = deserialize_controller(path, cfg.system, cfg.weights);
  CHECK(s.result.response.phi_x == sr.response.phi_x);
  CHECK(s.result.response.phi_u == sr.response.phi_u);
  CHECK(s.result.response.causal);
  CHECK(s.result.objective_value == sr.objective_value);
  CHECK(s.result.kind == "regret");
  CHECK(s.result.benchmark_id == "clairvoyant");
  CHECK(s.result.report.status == conic::SolveStatus::optimal);
  REQUIRE(s.result.certificate.has_value());
  CHECK(s.result.certificate->z == sr.certificate->z);
  CHECK(s.format_version == kControllerFormatVersion);
  CHECK(s.system_digest == system_digest(cfg.system));
  REQUIRE(s.disturbance_set.has_value());

  std::mt19937_64 rng(51);
  for (int k = 0; k < 10; ++k) {
    const StackedSignal w{SignalKind::disturbance, random_vector(rng, 18)};
    const Trajectory a = rollout(cfg.system, sr.response, w, cfg.weights);
    const Trajectory b = rollout(s.system, s.result.response, w, s.weights);
    CHECK(a.x == b.x);
    CHECK(a.u == b.u);
    CHECK(a.cost == b.cost);
  }

  std::vector<MatrixXd> a = cfg.system.a();
  a[2](0, 0) += 1e-9;
  const LtvSystem other(3, 2, 6, a, cfg.system.b());
  CHECK(system_digest(other) != system_digest(cfg.system));
  CHECK_THROWS_AS(deserialize_controller(path, other, cfg.weights), DigestMismatchError);
  const CostWeights heavier(2.0 * cfg.weights.q(), cfg.weights.r());
  CHECK_THROWS_AS(deserialize_controller(path, cfg.system, heavier), DigestMismatchError);

  const auto broken = temp_path("broken.json");
  std::ofstream(broken) << "{\"format\": \"sls-controller\", \"version\": 1}";
  CHECK_THROWS_AS(deserialize_controller(broken), ConfigError);
  std::filesystem::remove(broken);
  std::filesystem::remove(path);
}

TEST_CASE("safety verification") {
  const BenchmarkConfig cfg = parse_config(small_config(R"(["SH2", "SHinf", "SR_nc"])"));
  const SafetySpec& spec = *cfg.safety;
  for (ControllerKind k : cfg.controllers) {
    CAPTURE(to_string(k));
    const SynthesisResult r = synthesize_controller(cfg, k);
    REQUIRE(r.optimal());
    const SafetyReport rep = verify_safety(cfg.system, r.response, spec, cfg.weights, 500, 1);
    CHECK(rep.pass());
    CHECK(rep.rollouts == 500);
    CHECK(rep.rollout_violations == 0);
    CHECK(rep.max_rollout_value_gap <= 1e-9);
  }

  const SynthesisResult sr = synthesize_controller(cfg, ControllerKind::sr_nc);
  const SafetySpec shrunk{spec.constraint.scaled(0.01), spec.disturbance_set};
  const SafetyReport bad = verify_safety(cfg.system, sr.response, shrunk, cfg.weights, 100, 1);
  CHECK_FALSE(bad.pass());
  CHECK_FALSE(bad.lp_pass);
  CHECK(bad.rollout_violations > 0);
  REQUIRE_FALSE(bad.violated().empty());
  CHECK(bad.violated().front().label == "x_0[0] <= 0.03");

  const SynthesisResult free_h2 =
      synth_h2(cfg.system, cfg.weights, cfg.sigma_w, std::nullopt, synthesis_options(cfg));
  REQUIRE(free_h2.optimal());
  const SafetyReport lp_vs_mc =
      verify_safety(cfg.system, free_h2.response, spec, cfg.weights, 1000, 3);
  CHECK(lp_vs_mc.max_rollout_value_gap <= 1e-9);
}

TEST_CASE("benchmark table") {
  const BenchmarkConfig cfg = parse_config(small_config(R"(["SH2", "SHinf", "SR_nc"])"));
  const BenchmarkResult res = run_benchmark(cfg);
  REQUIRE(res.controllers.size() == 3);
  REQUIRE(res.rows.size() == 4);
  for (const auto& row : res.rows) {
    CAPTURE(row.label);
    int zeros = 0;
    for (double r : row.relative) {
      CHECK(r >= 0.0);
      zeros += r == 0.0;
    }
    CHECK(zeros == 1);
    CHECK(row.relative[row.best] == 0.0);
  }
  for (const auto& c : res.controllers) {
    REQUIRE(c.safety.has_value());
    CHECK(c.safety->pass());
  }
  CHECK(res.controllers[2].regret <= res.controllers[0].regret + 1e-6);
  CHECK(res.controllers[2].regret <= res.controllers[1].regret + 1e-6);

  std::vector<ControllerSummary> again = res.controllers;
  const BenchmarkResult rerun = run_benchmark(cfg, again);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(rerun.rows[i].mean[c] == res.rows[i].mean[c]);
      CHECK(rerun.rows[i].stddev[c] == res.rows[i].stddev[c]);
    }
  }
  const BenchmarkResult fresh = run_benchmark(cfg);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    CHECK(fresh.rows[i].mean == res.rows[i].mean);
  }

  std::ostringstream table, csv;
  print_table(table, res);
  write_table_csv(csv, res);
  CHECK(table.str().find("SR_nc") != std::string::npos);
  const std::string csv_text = csv.str();
  CHECK(std::count(csv_text.begin(), csv_text.end(), '\n') == 1 + 4 * 3);
  CHECK(result_json(res).find("\"rows\"") != std::string::npos);
}

TEST_CASE("single controller and infeasible rows") {
  const BenchmarkResult one = run_benchmark(parse_config(small_config(R"(["SH2"])")));
  for (const auto& row : one.rows) CHECK(row.relative[0] == 0.0);

  const BenchmarkResult none = run_benchmark(parse_config(small_config(R"(["SH2", "SR_nc"])", 0.5)));
  for (const auto& c : none.controllers) {
    CHECK(c.result.report.status == conic::SolveStatus::infeasible);
    CHECK_FALSE(c.diagnostic.empty());
  }
  for (const auto& row : none.rows) {
    CHECK(row.best == -1);
    CHECK(std::isnan(row.mean[0]));
  }
}
