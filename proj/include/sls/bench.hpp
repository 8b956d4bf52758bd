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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sls/sim.hpp"
#include "sls/synthesis.hpp"

namespace sls {

enum class ControllerKind { sh2, shinf, sr_nc, sr_safe };

std::string to_string(ControllerKind kind);
// Accepts SH2, SHinf, SR_nc and SR_safe_benchmark (case insensitive).
ControllerKind parse_controller_kind(const std::string& name);

struct NamedProfile {
  std::string label;
  DisturbanceProfile profile;
};

struct BenchmarkConfig {
  std::string name;
  LtvSystem system;
  CostWeights weights;
  MatrixXd sigma_w;
  PolytopeSet disturbance_set;
  std::optional<SafetySpec> safety;
  BenchmarkMode safe_benchmark_mode = BenchmarkMode::h2;
  std::optional<VectorXd> sim_x0;  // pinned initial state for simulation
  std::vector<ControllerKind> controllers;
  std::vector<NamedProfile> profiles;
  int realizations = 1000;
  std::uint64_t base_seed = 0;
  double solver_tol = 1e-8;
  int verification_rollouts = 1000;

  void validate() const;
};

// Throws ConfigError naming the offending field.
BenchmarkConfig load_config(const std::filesystem::path& path);
BenchmarkConfig parse_config(const std::string& text, const std::string& source = "<string>");

SynthesisOptions synthesis_options(const BenchmarkConfig& cfg);

// Unconstrained clairvoyant benchmark for the configured system.
Benchmark default_benchmark(const BenchmarkConfig& cfg);

// Requires a safety spec for every kind except sh2 and shinf.
SynthesisResult synthesize_controller(const BenchmarkConfig& cfg, ControllerKind kind);

struct SafetyRowCheck {
  int row = 0;
  std::string label;
  double worst = 0.0;  // max over W of the row functional
  double bound = 0.0;
  double slack = 0.0;  // bound - worst
  bool pass = true;
};

struct SafetyReport {
  std::vector<SafetyRowCheck> rows;
  bool lp_pass = true;
  int rollouts = 0;
  int rollout_violations = 0;  // rollouts with some row slack below -tol
  double min_rollout_slack = 0.0;
  double max_rollout_value_gap = 0.0;  // max over rows of (sampled max - LP max)

  bool pass() const { return lp_pass && rollout_violations == 0; }
  std::vector<SafetyRowCheck> violated() const;
};

// Exact row-wise robust check plus uniform Monte-Carlo rollouts drawn from W.
SafetyReport verify_safety(const LtvSystem& sys, const ClosedLoopResponse& resp,
                           const SafetySpec& spec, const CostWeights& weights, int rollouts,
                           std::uint64_t base_seed, double tol = 1e-6);

// Uniform sample from a box W, or by rejection from the bounding box otherwise.
VectorXd sample_uniform(const PolytopeSet& w_set, StableRng& rng);

std::string safety_row_label(const LtvSystem& sys, const SafetySpec& spec, int row);

struct ControllerSummary {
  std::string name;
  SynthesisResult result;
  double regret = 0.0;  // against the unconstrained clairvoyant benchmark
  std::optional<SafetyReport> safety;
  std::string diagnostic;

  bool usable() const { return result.optimal(); }
};

struct ProfileRow {
  std::string label;
  std::vector<double> mean;      // per controller, NaN when unusable
  std::vector<double> stddev;
  std::vector<double> relative;  // percent above the row's best controller
  int best = -1;
};

struct BenchmarkResult {
  std::vector<ControllerSummary> controllers;
  std::vector<ProfileRow> rows;
};

// One synthesis per configured controller, common random numbers across
// controllers, deterministic given the base seed.
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, bool verbose = false);

// Same, with controllers synthesized beforehand (ordered as cfg.controllers).
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg,
                              std::vector<ControllerSummary> controllers);

void print_table(std::ostream& out, const BenchmarkResult& result);
void write_table_csv(std::ostream& out, const BenchmarkResult& result);
std::string result_json(const BenchmarkResult& result);

std::string report_digest(const conic::SolverReport& report);

// Hex SHA-256 over the dimensions and matrix bytes.
std::string system_digest(const LtvSystem& sys);
std::string weights_digest(const CostWeights& weights);

// The file embeds the system, the weights and optionally W, so that it can
// be simulated without the originating config.
struct StoredController {
  SynthesisResult result;
  LtvSystem system;
  CostWeights weights;
  std::optional<PolytopeSet> disturbance_set;
  std::string system_digest;
  std::string weights_digest;
  std::string created;
  int format_version = 0;
};

inline constexpr int kControllerFormatVersion = 1;

void serialize_controller(const SynthesisResult& result, const LtvSystem& sys,
                          const CostWeights& weights, const std::filesystem::path& path,
                          const std::optional<PolytopeSet>& disturbance_set = std::nullopt);
StoredController deserialize_controller(const std::filesystem::path& path);
// Throws DigestMismatchError unless the file was written for sys and weights.
StoredController deserialize_controller(const std::filesystem::path& path, const LtvSystem& sys,
                                        const CostWeights& weights);

}  // namespace sls
