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

// Command line front end: synthesize, simulate, bench and verify.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "sls/bench.hpp"

namespace {

enum ExitCode { kOk = 0, kInfeasible = 1, kConfigError = 2, kSolverFailure = 3 };

int status_code(const sls::SynthesisResult& r) {
  using sls::conic::SolveStatus;
  switch (r.report.status) {
    case SolveStatus::optimal: return kOk;
    case SolveStatus::infeasible: return kInfeasible;
    default: return kSolverFailure;
  }
}

int cmd_synthesize(const std::string& cfg_path, const std::string& kind_name,
                   const std::string& out) {
  const sls::BenchmarkConfig cfg = sls::load_config(cfg_path);
  const sls::ControllerKind kind = sls::parse_controller_kind(kind_name);
  const sls::SynthesisResult r = sls::synthesize_controller(cfg, kind);
  std::cout << sls::to_string(kind) << ": " << sls::report_digest(r.report) << "\n";
  const int code = status_code(r);
  if (code != kOk) {
    std::cerr << "synthesis did not reach an optimal solution; nothing written\n";
    return code;
  }
  std::cout.precision(10);
  std::cout << "objective " << r.objective_value << "\n";
  sls::serialize_controller(r, cfg.system, cfg.weights, out, cfg.disturbance_set);
  std::cout << "wrote " << out << "\n";
  return kOk;
}

int cmd_simulate(const std::string& file, const std::string& profile_text,
                 std::optional<std::uint64_t> seed, bool free_x0, const std::string& out) {
  const sls::StoredController c = sls::deserialize_controller(file);
  sls::DisturbanceProfile p = sls::parse_profile(profile_text);
  if (p.stochastic()) p.seed = seed.value_or(0);
  if (!free_x0) p.x0 = Eigen::VectorXd::Zero(c.system.n());
  sls::StackedSignal w;
  if (p.kind == sls::ProfileKind::worst) {
    if (!c.disturbance_set) throw sls::ConfigError("the worst profile needs W in the controller file");
    w = sls::gen_disturbance(p, c.system, c.result.response, c.weights, *c.disturbance_set);
  } else if (p.kind == sls::ProfileKind::worst_energy) {
    w = sls::worst_energy_disturbance(c.result.response, c.weights, p.x0);
  } else {
    w = sls::gen_disturbance(p, c.system);
  }
  const sls::Trajectory traj = sls::rollout(c.system, c.result.response, w, c.weights);
  std::ofstream os(out);
  if (!os) throw sls::ConfigError("cannot write " + out);
  sls::write_trajectory_csv(os, c.system, traj, c.weights);
  std::cout.precision(10);
  std::cout << sls::to_string(p) << " cost " << traj.cost << "\nwrote " << out << "\n";
  return kOk;
}

int cmd_bench(const std::string& cfg_path, const std::string& out_dir, bool quiet) {
  const sls::BenchmarkConfig cfg = sls::load_config(cfg_path);
  const sls::BenchmarkResult res = sls::run_benchmark(cfg, !quiet);
  sls::print_table(std::cout, res);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  std::ofstream(dir / "table.csv") << [&] {
    std::ostringstream os;
    sls::write_table_csv(os, res);
    return os.str();
  }();
  std::ofstream(dir / "result.json") << sls::result_json(res) << "\n";
  int code = kOk;
  for (const auto& c : res.controllers) {
    if (c.usable()) {
      sls::serialize_controller(c.result, cfg.system, cfg.weights, dir / (c.name + ".json"),
                                cfg.disturbance_set);
    } else {
      code = std::max(code, status_code(c.result));
    }
  }
  std::cout << "wrote " << (dir / "table.csv").string() << ", " << (dir / "result.json").string()
            << "\n";
  return code;
}

int cmd_verify(const std::string& file, const std::string& cfg_path) {
  const sls::BenchmarkConfig cfg = sls::load_config(cfg_path);
  if (!cfg.safety) throw sls::ConfigError("config field 'safety': required by verify");
  const sls::StoredController c = sls::deserialize_controller(file, cfg.system, cfg.weights);
  const sls::SafetyReport rep =
      sls::verify_safety(cfg.system, c.result.response, *cfg.safety, cfg.weights,
                         cfg.verification_rollouts, cfg.base_seed,
                         sls::default_settings().safety_tol);
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& r : rep.rows) min_slack = std::min(min_slack, r.slack);
  std::printf("controller %s (%s)\n", file.c_str(), c.result.kind.c_str());
  std::printf("robust LP check: %s, %zu rows, min slack %.6g\n", rep.lp_pass ? "pass" : "FAIL",
              rep.rows.size(), min_slack);
  std::printf("rollouts: %d, violations %d, min slack %.6g\n", rep.rollouts,
              rep.rollout_violations, rep.min_rollout_slack);
  for (const auto& r : rep.violated()) {
    std::printf("  violated %s: worst %.6g bound %.6g\n", r.label.c_str(), r.worst, r.bound);
  }
  std::printf("%s\n", rep.pass() ? "SAFE" : "UNSAFE");
  return rep.pass() ? kOk : kInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe regret-optimal controller synthesis"};
  app.require_subcommand(1);

  std::string cfg, kind, out, file, profile = "gaussian";
  std::optional<std::uint64_t> seed;
  bool free_x0 = false, quiet = false;

  auto* syn = app.add_subcommand("synthesize", "Synthesize a controller from a config");
  syn->add_option("cfg", cfg, "Config file")->required();
  syn->add_option("--controller", kind, "SH2, SHinf, SR_nc or SR_safe_benchmark")->required();
  syn->add_option("--out", out, "Controller file to write")->required();

  auto* sim = app.add_subcommand("simulate", "Roll out a stored controller");
  sim->add_option("controller", file, "Controller file")->required();
  sim->add_option("--profile", profile, "Disturbance profile, e.g. uniform(0,1)");
  sim->add_option("--seed", seed, "Seed for stochastic profiles");
  sim->add_flag("--free-x0", free_x0, "Let x0 follow the profile instead of pinning it to 0");
  sim->add_option("--out", out, "Trajectory CSV to write")->required();

  auto* ben = app.add_subcommand("bench", "Run the configured benchmark");
  ben->add_option("cfg", cfg, "Config file")->required();
  ben->add_option("--out", out, "Output directory")->required();
  ben->add_flag("--quiet", quiet, "No progress output");

  auto* ver = app.add_subcommand("verify", "Check a stored controller against a config");
  ver->add_option("controller", file, "Controller file")->required();
  ver->add_option("cfg", cfg, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*syn) return cmd_synthesize(cfg, kind, out);
    if (*sim) return cmd_simulate(file, profile, seed, free_x0, out);
    if (*ben) return cmd_bench(cfg, out, quiet);
    if (*ver) return cmd_verify(file, cfg);
  } catch (const sls::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const sls::DigestMismatchError& e) {
    std::cerr << "digest mismatch: " << e.what() << "\n";
    return kConfigError;
  } catch (const sls::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
