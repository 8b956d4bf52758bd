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

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sls/bench.hpp"

namespace sls {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ConfigError("config field '" + field + "': " + msg);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path + key, "missing");
  return j.at(key);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(field, "must be finite");
  return v;
}

MatrixXd matrix(const json& j, const std::string& field) {
  if (j.is_number()) return MatrixXd::Constant(1, 1, number(j, field));
  if (!j.is_array() || j.empty()) fail(field, "expected a nested numeric array");
  const bool nested = j.front().is_array();
  const int rows = nested ? static_cast<int>(j.size()) : 1;
  const int cols = nested ? static_cast<int>(j.front().size()) : static_cast<int>(j.size());
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = nested ? j.at(r) : j;
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      fail(field, "rows must all have " + std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) {
      m(r, c) = number(row.at(c), field + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

VectorXd vector(const json& j, const std::string& field) {
  if (j.is_number()) return VectorXd::Constant(1, number(j, field));
  if (!j.is_array()) fail(field, "expected a number or a numeric array");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(i) = number(j.at(i), field + "[" + std::to_string(i) + "]");
  }
  return v;
}

// A scalar, one value per component (replicated over time) or the full stack.
VectorXd per_step(const json& j, int k, int horizon, const std::string& field) {
  const VectorXd v = vector(j, field);
  if (v.size() == 1) return VectorXd::Constant(k * horizon, v(0));
  if (v.size() == k) return v.replicate(horizon, 1);
  if (v.size() == k * horizon) return v;
  fail(field, "expected 1, " + std::to_string(k) + " or " + std::to_string(k * horizon) +
                  " entries, got " + std::to_string(v.size()));
}

// A scalar multiple of identity, a per-step block or the full stacked matrix.
MatrixXd weight(const json& j, int k, int horizon, const std::string& field) {
  const MatrixXd w = matrix(j, field);
  const int full = k * horizon;
  if (w.rows() == 1 && w.cols() == 1) return w(0, 0) * MatrixXd::Identity(full, full);
  if (w.rows() != w.cols()) fail(field, "must be square");
  if (w.rows() == full) return w;
  if (w.rows() != k) {
    fail(field, "expected order " + std::to_string(k) + " or " + std::to_string(full));
  }
  MatrixXd out = MatrixXd::Zero(full, full);
  for (int t = 0; t < horizon; ++t) out.block(t * k, t * k, k, k) = w;
  return out;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(path + key, "unknown key");
  }
}

LtvSystem parse_system(const json& j, int horizon) {
  if (!j.is_object()) fail("system", "expected an object");
  reject_unknown(j, {"A", "B", "rho", "A_t", "B_t"}, "system.");
  if (j.contains("A_t") || j.contains("B_t")) {
    const json& at = need(j, "A_t", "system.");
    const json& bt = need(j, "B_t", "system.");
    if (!at.is_array() || !bt.is_array()) fail("system.A_t", "expected a list of matrices");
    if (static_cast<int>(at.size()) != horizon - 1 || static_cast<int>(bt.size()) != horizon - 1) {
      fail("system.A_t", "expected horizon-1 = " + std::to_string(horizon - 1) + " matrices");
    }
    std::vector<MatrixXd> a, b;
    for (std::size_t t = 0; t < at.size(); ++t) {
      a.push_back(matrix(at[t], "system.A_t[" + std::to_string(t) + "]"));
      b.push_back(matrix(bt[t], "system.B_t[" + std::to_string(t) + "]"));
    }
    if (a.empty()) fail("system.A_t", "cannot infer dimensions for horizon 1; use A and B");
    try {
      return LtvSystem(static_cast<int>(a[0].rows()), static_cast<int>(b[0].cols()), horizon, a,
                       b);
    } catch (const Error& e) {
      fail("system", e.what());
    }
  }
  MatrixXd a = matrix(need(j, "A", "system."), "system.A");
  const MatrixXd b = matrix(need(j, "B", "system."), "system.B");
  if (a.rows() != a.cols()) fail("system.A", "must be square");
  if (b.rows() != a.rows()) fail("system.B", "must have as many rows as A");
  if (j.contains("rho")) {
    const double rho = number(j.at("rho"), "system.rho");
    if (rho < 0.0) fail("system.rho", "must be nonnegative");
    const double radius = a.eigenvalues().cwiseAbs().maxCoeff();
    if (!(radius > 0.0)) fail("system.rho", "A is nilpotent; its spectral radius cannot be set");
    a *= rho / radius;
  }
  try {
    return LtvSystem::time_invariant(a, b, horizon);
  } catch (const Error& e) {
    fail("system", e.what());
  }
}

PolytopeSet parse_set(const json& j, int dim, int k, int horizon, const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object with lo/hi or H/h");
  if (j.contains("H") || j.contains("h")) {
    reject_unknown(j, {"H", "h"}, field + ".");
    const MatrixXd h_mat = matrix(need(j, "H", field + "."), field + ".H");
    VectorXd h_vec = vector(need(j, "h", field + "."), field + ".h");
    if (h_vec.size() == 1) h_vec = VectorXd::Constant(h_mat.rows(), h_vec(0));
    if (h_mat.cols() != dim) fail(field + ".H", "must have " + std::to_string(dim) + " columns");
    if (h_mat.rows() != h_vec.size()) fail(field + ".h", "length must equal the rows of H");
    return PolytopeSet(h_mat, h_vec);
  }
  reject_unknown(j, {"lo", "hi"}, field + ".");
  const VectorXd lo = per_step(need(j, "lo", field + "."), k, horizon, field + ".lo");
  const VectorXd hi = per_step(need(j, "hi", field + "."), k, horizon, field + ".hi");
  if (!(lo.array() <= hi.array()).all()) fail(field, "requires lo <= hi");
  return PolytopeSet::box(lo, hi);
}

// Rows for the present parts among x and u, each as upper then lower bounds.
SafetySpec parse_safety(const json& j, const LtvSystem& sys, const PolytopeSet& w_set) {
  if (!j.is_object()) fail("safety", "expected an object");
  const int n = sys.n();
  const int m = sys.m();
  const int T = sys.horizon();
  const int dim = (n + m) * T;
  if (j.contains("H") || j.contains("h")) {
    return SafetySpec{parse_set(j, dim, n + m, T, "safety"), w_set};
  }
  reject_unknown(j, {"x", "u"}, "safety.");
  if (!j.contains("x") && !j.contains("u")) fail("safety", "needs x, u or H/h");
  std::vector<std::pair<int, double>> rows;  // (signed column + 1, bound)
  auto add = [&](const char* key, int k, int offset) {
    if (!j.contains(key)) return;
    const std::string f = std::string("safety.") + key;
    const json& b = j.at(key);
    if (!b.is_object()) fail(f, "expected an object with lo and hi");
    reject_unknown(b, {"lo", "hi"}, f + ".");
    const VectorXd lo = per_step(need(b, "lo", f + "."), k, T, f + ".lo");
    const VectorXd hi = per_step(need(b, "hi", f + "."), k, T, f + ".hi");
    if (!(lo.array() <= hi.array()).all()) fail(f, "requires lo <= hi");
    for (int i = 0; i < k * T; ++i) rows.emplace_back(offset + i + 1, hi(i));
    for (int i = 0; i < k * T; ++i) rows.emplace_back(-(offset + i + 1), -lo(i));
  };
  add("x", n, 0);
  add("u", m, n * T);
  MatrixXd h_mat = MatrixXd::Zero(static_cast<int>(rows.size()), dim);
  VectorXd h_vec(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int c = std::abs(rows[r].first) - 1;
    h_mat(r, c) = rows[r].first > 0 ? 1.0 : -1.0;
    h_vec(r) = rows[r].second;
  }
  return SafetySpec{PolytopeSet(h_mat, h_vec), w_set};
}

}  // namespace

void BenchmarkConfig::validate() const {
  const int nT = system.n() * system.horizon();
  if (weights.q().rows() != nT || weights.r().rows() != system.m() * system.horizon()) {
    throw ConfigError("config field 'weights': dimensions do not match the system");
  }
  if (sigma_w.rows() != nT || sigma_w.cols() != nT) {
    throw ConfigError("config field 'sigma_w': must be of order nT");
  }
  if (disturbance_set.dim() != nT) {
    throw ConfigError("config field 'disturbance_set': dimension must be nT");
  }
  try {
    validate_disturbance_set(disturbance_set);
    if (safety) safety->validate(system);
  } catch (const Error& e) {
    throw ConfigError(std::string("config field 'disturbance_set'/'safety': ") + e.what());
  }
  if (sim_x0 && sim_x0->size() != system.n()) {
    throw ConfigError("config field 'simulation.x0': must have n entries");
  }
  if (realizations < 1) throw ConfigError("config field 'realizations': must be at least 1");
  if (verification_rollouts < 0) {
    throw ConfigError("config field 'verification_rollouts': must be nonnegative");
  }
  if (!(solver_tol > 0.0 && solver_tol < 1.0)) {
    throw ConfigError("config field 'solver_tolerance': must lie in (0, 1)");
  }
  if (controllers.empty()) throw ConfigError("config field 'controllers': empty");
  for (ControllerKind k : controllers) {
    if (k == ControllerKind::sr_safe && !safety) {
      throw ConfigError("config field 'controllers': SR_safe_benchmark requires 'safety'");
    }
  }
}

BenchmarkConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": parse error: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(source + ": top level must be an object");
  reject_unknown(j,
                 {"name", "horizon", "system", "weights", "sigma_w", "disturbance_set", "safety",
                  "safe_benchmark", "simulation", "controllers", "profiles", "realizations",
                  "base_seed", "solver_tolerance", "verification_rollouts"},
                 "");

  const json& hz = need(j, "horizon", "");
  if (!hz.is_number_integer()) fail("horizon", "expected an integer");
  const int horizon = hz.get<int>();
  if (horizon < 1) fail("horizon", "must be at least 1");

  LtvSystem sys = parse_system(need(j, "system", ""), horizon);
  const int n = sys.n();
  const int m = sys.m();

  MatrixXd q = MatrixXd::Identity(n * horizon, n * horizon);
  MatrixXd r = MatrixXd::Identity(m * horizon, m * horizon);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    reject_unknown(w, {"Q", "R"}, "weights.");
    if (w.contains("Q")) q = weight(w.at("Q"), n, horizon, "weights.Q");
    if (w.contains("R")) r = weight(w.at("R"), m, horizon, "weights.R");
  }
  std::optional<CostWeights> weights;
  try {
    weights.emplace(q, r);
  } catch (const Error& e) {
    fail("weights", e.what());
  }

  MatrixXd sigma = MatrixXd::Identity(n * horizon, n * horizon);
  if (j.contains("sigma_w") && !(j.at("sigma_w").is_string() && j.at("sigma_w") == "identity")) {
    sigma = weight(j.at("sigma_w"), n, horizon, "sigma_w");
  }

  PolytopeSet w_set = parse_set(need(j, "disturbance_set", ""), n * horizon, n, horizon,
                                "disturbance_set");
  std::optional<SafetySpec> safety;
  if (j.contains("safety") && !j.at("safety").is_null()) {
    safety = parse_safety(j.at("safety"), sys, w_set);
  }

  BenchmarkMode mode = BenchmarkMode::h2;
  if (j.contains("safe_benchmark")) {
    const json& s = j.at("safe_benchmark");
    if (s == "h2") {
      mode = BenchmarkMode::h2;
    } else if (s == "hinf") {
      mode = BenchmarkMode::hinf;
    } else {
      fail("safe_benchmark", "expected \"h2\" or \"hinf\"");
    }
  }

  std::optional<VectorXd> x0 = VectorXd::Zero(n);
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    reject_unknown(s, {"x0"}, "simulation.");
    if (s.contains("x0")) {
      const json& v = s.at("x0");
      if (v.is_string() && v == "profile") {
        x0.reset();
      } else {
        x0 = vector(v, "simulation.x0");
      }
    }
  }

  std::vector<ControllerKind> controllers;
  const json& cs = need(j, "controllers", "");
  if (!cs.is_array()) fail("controllers", "expected a list of controller names");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (!cs[i].is_string()) fail("controllers[" + std::to_string(i) + "]", "expected a string");
    try {
      controllers.push_back(parse_controller_kind(cs[i].get<std::string>()));
    } catch (const ConfigError& e) {
      fail("controllers[" + std::to_string(i) + "]", e.what());
    }
  }

  std::vector<NamedProfile> profiles;
  if (j.contains("profiles")) {
    const json& ps = j.at("profiles");
    if (!ps.is_array()) fail("profiles", "expected a list");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string f = "profiles[" + std::to_string(i) + "]";
      std::string label, spec;
      if (ps[i].is_string()) {
        label = spec = ps[i].get<std::string>();
      } else if (ps[i].is_object()) {
        reject_unknown(ps[i], {"label", "profile"}, f + ".");
        const json& pj = need(ps[i], "profile", f + ".");
        if (!pj.is_string()) fail(f + ".profile", "expected a string");
        spec = pj.get<std::string>();
        label = ps[i].value("label", spec);
      } else {
        fail(f, "expected a string or an object");
      }
      try {
        profiles.push_back({label, parse_profile(spec)});
      } catch (const ConfigError& e) {
        fail(f, e.what());
      }
    }
  }

  auto integer = [&](const char* key, long long def) -> long long {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_number_integer()) fail(key, "expected an integer");
    return j.at(key).get<long long>();
  };
  const long long reals = integer("realizations", 1000);
  const long long seed = integer("base_seed", 0);
  const long long rollouts = integer("verification_rollouts", 1000);
  if (seed < 0) fail("base_seed", "must be nonnegative");
  if (reals > 100000000 || rollouts > 100000000) fail("realizations", "too large");
  const double tol = j.contains("solver_tolerance")
                         ? number(j.at("solver_tolerance"), "solver_tolerance")
                         : 1e-8;

  BenchmarkConfig cfg{
      .name = j.value("name", std::string("benchmark")),
      .system = std::move(sys),
      .weights = std::move(*weights),
      .sigma_w = std::move(sigma),
      .disturbance_set = std::move(w_set),
      .safety = std::move(safety),
      .safe_benchmark_mode = mode,
      .sim_x0 = std::move(x0),
      .controllers = std::move(controllers),
      .profiles = std::move(profiles),
      .realizations = static_cast<int>(reals),
      .base_seed = static_cast<std::uint64_t>(seed),
      .solver_tol = tol,
      .verification_rollouts = static_cast<int>(rollouts),
  };
  cfg.validate();
  return cfg;
}

BenchmarkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace sls
