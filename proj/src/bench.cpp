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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sls/bench.hpp"

namespace sls {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::sh2: return "SH2";
    case ControllerKind::shinf: return "SHinf";
    case ControllerKind::sr_nc: return "SR_nc";
    case ControllerKind::sr_safe: return "SR_safe_benchmark";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(const std::string& name) {
  const std::string s = lower(name);
  if (s == "sh2" || s == "h2") return ControllerKind::sh2;
  if (s == "shinf" || s == "hinf") return ControllerKind::shinf;
  if (s == "sr_nc" || s == "sr" || s == "regret") return ControllerKind::sr_nc;
  if (s == "sr_safe_benchmark" || s == "sr_safe") return ControllerKind::sr_safe;
  throw ConfigError("unknown controller kind '" + name +
                    "' (expected SH2, SHinf, SR_nc or SR_safe_benchmark)");
}

SynthesisOptions synthesis_options(const BenchmarkConfig& cfg) {
  SynthesisOptions o;
  o.solver.tol = cfg.solver_tol;
  o.settings.solver_tol = cfg.solver_tol;
  return o;
}

Benchmark default_benchmark(const BenchmarkConfig& cfg) {
  return Benchmark::clairvoyant(clairvoyant_closed_form(cfg.system, cfg.weights));
}

SynthesisResult synthesize_controller(const BenchmarkConfig& cfg, ControllerKind kind) {
  const SynthesisOptions opts = synthesis_options(cfg);
  switch (kind) {
    case ControllerKind::sh2:
      return synth_h2(cfg.system, cfg.weights, cfg.sigma_w, cfg.safety, opts);
    case ControllerKind::shinf:
      return synth_hinf(cfg.system, cfg.weights, cfg.safety, opts);
    case ControllerKind::sr_nc:
      return synth_regret(cfg.system, cfg.weights, cfg.safety, default_benchmark(cfg), opts);
    case ControllerKind::sr_safe: {
      if (!cfg.safety) throw ConfigError("SR_safe_benchmark requires a safety spec");
      SynthesisResult bench = synth_safe_clairvoyant(cfg.system, cfg.weights, *cfg.safety,
                                                     cfg.safe_benchmark_mode, cfg.sigma_w, opts);
      if (!bench.optimal()) {
        bench.kind = "regret";
        bench.objective_value = kNaN;
        return bench;
      }
      return synth_regret(cfg.system, cfg.weights, cfg.safety, safe_benchmark(bench, cfg.weights),
                          opts);
    }
  }
  throw ContractViolation("synthesize_controller: unknown kind");
}

std::vector<SafetyRowCheck> SafetyReport::violated() const {
  std::vector<SafetyRowCheck> out;
  for (const auto& r : rows) {
    if (!r.pass) out.push_back(r);
  }
  return out;
}

VectorXd sample_uniform(const PolytopeSet& w_set, StableRng& rng) {
  const int d = w_set.dim();
  VectorXd lo(d), hi(d);
  if (w_set.box_bounds()) {
    lo = w_set.box_bounds()->first;
    hi = w_set.box_bounds()->second;
  } else {
    for (int i = 0; i < d; ++i) {
      hi(i) = w_set.support(VectorXd::Unit(d, i));
      lo(i) = -w_set.support(-VectorXd::Unit(d, i));
    }
    if (!lo.allFinite() || !hi.allFinite()) throw InvalidSetError("sample_uniform: W is unbounded");
  }
  for (int attempt = 0; attempt < 100000; ++attempt) {
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = lo(i) + (hi(i) - lo(i)) * rng.uniform();
    if (w_set.box_bounds() || w_set.contains(v, 0.0)) return v;
  }
  throw InvalidSetError("sample_uniform: rejection sampling did not hit W");
}

std::string safety_row_label(const LtvSystem& sys, const SafetySpec& spec, int row) {
  const auto h = spec.constraint.h_mat().row(row);
  int nz = -1;
  for (int j = 0; j < h.size(); ++j) {
    if (h(j) != 0.0) {
      if (nz >= 0) return "row " + std::to_string(row);
      nz = j;
    }
  }
  if (nz < 0) return "row " + std::to_string(row);
  const int nT = sys.n() * sys.horizon();
  const bool is_x = nz < nT;
  const int k = is_x ? sys.n() : sys.m();
  const int idx = is_x ? nz : nz - nT;
  std::ostringstream os;
  os << (is_x ? "x" : "u") << "_" << idx / k << "[" << idx % k << "] "
     << (h(nz) > 0 ? "<= " : ">= ") << spec.constraint.h_vec()(row) / h(nz);
  return os.str();
}

SafetyReport verify_safety(const LtvSystem& sys, const ClosedLoopResponse& resp,
                           const SafetySpec& spec, const CostWeights& weights, int rollouts,
                           std::uint64_t base_seed, double tol) {
  spec.validate(sys);
  const MatrixXd& h = spec.constraint.h_mat();
  const VectorXd& hv = spec.constraint.h_vec();
  const MatrixXd hphi = h * resp.stacked();

  SafetyReport rep;
  rep.rows.resize(h.rows());
  for (int i = 0; i < h.rows(); ++i) {
    SafetyRowCheck& r = rep.rows[i];
    r.row = i;
    r.label = safety_row_label(sys, spec, i);
    r.worst = spec.disturbance_set.support(hphi.row(i).transpose());
    r.bound = hv(i);
    r.slack = r.bound - r.worst;
    r.pass = r.slack >= -tol;
    rep.lp_pass = rep.lp_pass && r.pass;
  }

  rep.rollouts = rollouts;
  rep.min_rollout_slack = std::numeric_limits<double>::infinity();
  rep.max_rollout_value_gap = -std::numeric_limits<double>::infinity();
  VectorXd sampled_max = VectorXd::Constant(h.rows(), -std::numeric_limits<double>::infinity());
  const int n = sys.n();
  const int m = sys.m();
  const int T = sys.horizon();
  for (int k = 0; k < rollouts; ++k) {
    StableRng rng(base_seed + static_cast<std::uint64_t>(k));
    const StackedSignal w{SignalKind::disturbance, sample_uniform(spec.disturbance_set, rng)};
    VectorXd xu((n + m) * T);
    if (resp.causal) {
      const Trajectory traj = rollout(sys, resp, w, weights);
      xu << traj.x, traj.u;
    } else {
      xu = resp.stacked() * w.data;
    }
    const VectorXd val = h * xu;
    sampled_max = sampled_max.cwiseMax(val);
    const double slack = (hv - val).minCoeff();
    rep.min_rollout_slack = std::min(rep.min_rollout_slack, slack);
    if (slack < -tol) ++rep.rollout_violations;
  }
  if (rollouts > 0) {
    for (int i = 0; i < h.rows(); ++i) {
      rep.max_rollout_value_gap =
          std::max(rep.max_rollout_value_gap, sampled_max(i) - rep.rows[i].worst);
    }
  } else {
    rep.min_rollout_slack = kNaN;
    rep.max_rollout_value_gap = kNaN;
  }
  return rep;
}

std::string report_digest(const conic::SolverReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s it=%d pres=%.2e dres=%.2e gap=%.2e time=%.1fs",
                conic::to_string(r.status).c_str(), r.iterations, r.primal_residual,
                r.dual_residual, r.duality_gap, r.wall_time);
  return buf;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, bool verbose) {
  cfg.validate();
  const Benchmark bench = default_benchmark(cfg);
  std::vector<ControllerSummary> controllers;
  for (ControllerKind kind : cfg.controllers) {
    ControllerSummary s;
    s.name = to_string(kind);
    s.result = synthesize_controller(cfg, kind);
    if (verbose) {
      std::fprintf(stderr, "%s: %s objective %.10g\n", s.name.c_str(),
                   report_digest(s.result.report).c_str(), s.result.objective_value);
    }
    if (!s.usable()) {
      s.diagnostic = "synthesis " + conic::to_string(s.result.report.status) + "; row entries skipped";
    } else {
      s.regret = regret_value(s.result.response, bench.cost, cfg.weights);
      if (cfg.safety) {
        s.safety = verify_safety(cfg.system, s.result.response, *cfg.safety, cfg.weights,
                                 cfg.verification_rollouts, cfg.base_seed,
                                 default_settings().safety_tol);
      }
    }
    controllers.push_back(std::move(s));
  }
  return run_benchmark(cfg, std::move(controllers));
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg,
                              std::vector<ControllerSummary> controllers) {
  if (controllers.size() != cfg.controllers.size()) {
    throw ContractViolation("run_benchmark: one summary per configured controller required");
  }
  BenchmarkResult res;
  res.controllers = std::move(controllers);
  const int nc = static_cast<int>(res.controllers.size());
  for (const NamedProfile& np : cfg.profiles) {
    ProfileRow row;
    row.label = np.label;
    row.mean.assign(nc, kNaN);
    row.stddev.assign(nc, kNaN);
    row.relative.assign(nc, kNaN);
    const bool stochastic = np.profile.stochastic();
    const int count = stochastic ? cfg.realizations : 1;
    for (int c = 0; c < nc; ++c) {
      const ControllerSummary& s = res.controllers[c];
      if (!s.usable()) continue;
      std::vector<double> costs(count);
      for (int k = 0; k < count; ++k) {
        DisturbanceProfile p = np.profile;
        if (stochastic) p.seed = cfg.base_seed + static_cast<std::uint64_t>(k);
        if (cfg.sim_x0) p.x0 = cfg.sim_x0;
        const StackedSignal w =
            gen_disturbance(p, cfg.system, s.result.response, cfg.weights, cfg.disturbance_set);
        costs[k] = rollout(cfg.system, s.result.response, w, cfg.weights).cost;
      }
      row.mean[c] = mean_of(costs);
      row.stddev[c] = stddev_of(costs, row.mean[c]);
    }
    for (int c = 0; c < nc; ++c) {
      if (std::isnan(row.mean[c])) continue;
      if (row.best < 0 || row.mean[c] < row.mean[row.best]) row.best = c;
    }
    for (int c = 0; c < nc && row.best >= 0; ++c) {
      if (std::isnan(row.mean[c])) continue;
      const double best = row.mean[row.best];
      if (c == row.best) {
        row.relative[c] = 0.0;
      } else if (best > 0.0) {
        row.relative[c] = 100.0 * (row.mean[c] / best - 1.0);
      } else {
        row.relative[c] = row.mean[c] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

void print_table(std::ostream& out, const BenchmarkResult& result) {
  const int nc = static_cast<int>(result.controllers.size());
  std::size_t w0 = 8;
  for (const auto& r : result.rows) w0 = std::max(w0, r.label.size() + 2);
  out << std::left << std::setw(static_cast<int>(w0)) << "w";
  for (const auto& c : result.controllers) out << std::right << std::setw(22) << c.name;
  out << "\n";
  for (const auto& r : result.rows) {
    out << std::left << std::setw(static_cast<int>(w0)) << r.label;
    for (int c = 0; c < nc; ++c) {
      std::ostringstream cell;
      if (std::isnan(r.mean[c])) {
        cell << "n/a";
      } else if (c == r.best) {
        cell << "best (" << std::setprecision(5) << r.mean[c] << ")";
      } else {
        cell << "+" << std::fixed << std::setprecision(2) << r.relative[c] << "%";
      }
      out << std::right << std::setw(22) << cell.str();
    }
    out << "\n";
  }
  out << "\n";
  for (const auto& c : result.controllers) {
    out << c.name << ": " << report_digest(c.result.report) << " objective "
        << std::setprecision(10) << c.result.objective_value;
    if (c.usable()) out << " regret " << c.regret;
    if (c.safety) {
      out << " safety " << (c.safety->pass() ? "pass" : "FAIL") << " (LP "
          << (c.safety->lp_pass ? "pass" : "fail") << ", " << c.safety->rollout_violations << "/"
          << c.safety->rollouts << " rollout violations)";
    }
    if (!c.diagnostic.empty()) out << " [" << c.diagnostic << "]";
    out << "\n";
  }
}

void write_table_csv(std::ostream& out, const BenchmarkResult& result) {
  out << "profile,controller,mean_cost,std_cost,relative_increase_percent,best\n";
  const auto prec = out.precision(17);
  for (const auto& r : result.rows) {
    for (std::size_t c = 0; c < result.controllers.size(); ++c) {
      out << r.label << ',' << result.controllers[c].name << ',' << r.mean[c] << ','
          << r.stddev[c] << ',' << r.relative[c] << ',' << (static_cast<int>(c) == r.best ? 1 : 0)
          << '\n';
    }
  }
  out.precision(prec);
}

std::string result_json(const BenchmarkResult& result) {
  using nlohmann::json;
  json j;
  j["controllers"] = json::array();
  for (const auto& c : result.controllers) {
    json cj;
    cj["name"] = c.name;
    cj["kind"] = c.result.kind;
    cj["status"] = conic::to_string(c.result.report.status);
    cj["objective"] = finite_or_null(c.result.objective_value);
    cj["regret"] = c.usable() ? finite_or_null(c.regret) : json(nullptr);
    cj["report"] = report_digest(c.result.report);
    cj["benchmark_id"] = c.result.benchmark_id;
    if (!c.diagnostic.empty()) cj["diagnostic"] = c.diagnostic;
    if (c.safety) {
      json sj;
      sj["pass"] = c.safety->pass();
      sj["lp_pass"] = c.safety->lp_pass;
      double min_slack = std::numeric_limits<double>::infinity();
      for (const auto& r : c.safety->rows) min_slack = std::min(min_slack, r.slack);
      sj["min_lp_slack"] = finite_or_null(min_slack);
      sj["rollouts"] = c.safety->rollouts;
      sj["rollout_violations"] = c.safety->rollout_violations;
      sj["min_rollout_slack"] = finite_or_null(c.safety->min_rollout_slack);
      json bad = json::array();
      for (const auto& r : c.safety->violated()) bad.push_back(r.label);
      sj["violated_rows"] = bad;
      cj["safety"] = sj;
    }
    j["controllers"].push_back(cj);
  }
  j["rows"] = json::array();
  for (const auto& r : result.rows) {
    json rj;
    rj["profile"] = r.label;
    rj["best"] = r.best >= 0 ? json(result.controllers[r.best].name) : json(nullptr);
    for (std::size_t c = 0; c < result.controllers.size(); ++c) {
      rj["mean"][result.controllers[c].name] = finite_or_null(r.mean[c]);
      rj["std"][result.controllers[c].name] = finite_or_null(r.stddev[c]);
      rj["relative_percent"][result.controllers[c].name] = finite_or_null(r.relative[c]);
    }
    j["rows"].push_back(rj);
  }
  return j.dump(2);
}

}  // namespace sls
