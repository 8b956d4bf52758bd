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

#include "sls/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <regex>
#include <sstream>
#include <vector>

namespace sls {
namespace {

double stage_cost(const VectorXd& x, const VectorXd& u, const CostWeights& weights, int t, int n,
                  int m) {
  const auto xt = x.segment(t * n, n);
  const auto ut = u.segment(t * m, m);
  return xt.dot(weights.q().block(t * n, t * n, n, n) * xt) +
         ut.dot(weights.r().block(t * m, t * m, m, m) * ut);
}

double profile_value(ProfileKind kind, int t, int horizon) {
  switch (kind) {
    case ProfileKind::sin:
      return std::sin(2.0 * std::numbers::pi * t / horizon);
    case ProfileKind::sawtooth:
      return -1.0 + 2.0 * (t % 8) / 7.0;
    case ProfileKind::step:
      return 2 * t < horizon ? 0.0 : 1.0;
    case ProfileKind::stairs: {
      static constexpr double kLevels[] = {1.0, 0.5, 0.0, -0.5, -1.0};
      return kLevels[(t / 3) % 5];
    }
    default:
      throw ContractViolation("profile_value: not a deterministic shape");
  }
}

double parse_number(const std::string& s, const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("profile '" + text + "': '" + s + "' is not a number");
  }
  if (pos != s.size() || !std::isfinite(v)) {
    throw ConfigError("profile '" + text + "': '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

Trajectory rollout(const LtvSystem& sys, const ClosedLoopResponse& resp, const StackedSignal& w,
                   const CostWeights& weights) {
  w.validate(sys);
  const int n = sys.n();
  const int m = sys.m();
  const int T = sys.horizon();
  if (resp.phi_u.rows() != m * T || resp.phi_u.cols() != n * T) {
    throw DimensionError("rollout: phi_u has the wrong shape");
  }
  if (!resp.causal || !is_block_lower(resp.phi_u, m, n)) {
    throw ContractViolation("rollout: the response is not causal");
  }
  if (weights.q().rows() != n * T || weights.r().rows() != m * T) {
    throw DimensionError("rollout: weights do not match the system");
  }

  Trajectory traj;
  traj.w = w.data;
  traj.x = VectorXd::Zero(n * T);
  traj.u = VectorXd::Zero(m * T);
  VectorXd w_hat = VectorXd::Zero(n * T);
  traj.x.head(n) = w.data.head(n);
  for (int t = 0; t < T; ++t) {
    // Reconstruct the latest disturbance from the observed state.
    if (t == 0) {
      w_hat.head(n) = traj.x.head(n);
    } else {
      w_hat.segment(t * n, n) = traj.x.segment(t * n, n) -
                                sys.a()[t - 1] * traj.x.segment((t - 1) * n, n) -
                                sys.b()[t - 1] * traj.u.segment((t - 1) * m, m);
    }
    const int known = (t + 1) * n;
    traj.u.segment(t * m, m) = resp.phi_u.block(t * m, 0, m, known) * w_hat.head(known);
    if (t + 1 < T) {
      traj.x.segment((t + 1) * n, n) = sys.a()[t] * traj.x.segment(t * n, n) +
                                       sys.b()[t] * traj.u.segment(t * m, m) +
                                       w.data.segment((t + 1) * n, n);
    }
  }
  traj.cost = traj.x.dot(weights.q() * traj.x) + traj.u.dot(weights.r() * traj.u);
  return traj;
}

double dynamics_residual(const LtvSystem& sys, const Trajectory& traj) {
  const int n = sys.n();
  const int m = sys.m();
  double r = (traj.x.head(n) - traj.w.head(n)).cwiseAbs().maxCoeff();
  for (int t = 0; t + 1 < sys.horizon(); ++t) {
    const VectorXd e = traj.x.segment((t + 1) * n, n) - sys.a()[t] * traj.x.segment(t * n, n) -
                       sys.b()[t] * traj.u.segment(t * m, m) - traj.w.segment((t + 1) * n, n);
    r = std::max(r, e.cwiseAbs().maxCoeff());
  }
  return r;
}

void write_trajectory_csv(std::ostream& out, const LtvSystem& sys, const Trajectory& traj,
                          const CostWeights& weights) {
  const int n = sys.n();
  const int m = sys.m();
  out << "t";
  for (int i = 0; i < n; ++i) out << ",x" << i;
  for (int i = 0; i < m; ++i) out << ",u" << i;
  for (int i = 0; i < n; ++i) out << ",w" << i;
  out << ",stage_cost\n";
  const auto prec = out.precision(17);
  for (int t = 0; t < sys.horizon(); ++t) {
    out << t;
    for (int i = 0; i < n; ++i) out << ',' << traj.x(t * n + i);
    for (int i = 0; i < m; ++i) out << ',' << traj.u(t * m + i);
    for (int i = 0; i < n; ++i) out << ',' << traj.w(t * n + i);
    // the weights may couple time steps; only the diagonal blocks are reported
    out << ',' << stage_cost(traj.x, traj.u, weights, t, n, m) << '\n';
  }
  out.precision(prec);
}

void DisturbanceProfile::validate(const LtvSystem& sys) const {
  if (kind == ProfileKind::uniform && !(a <= b)) {
    throw ConfigError("profile uniform(a,b): requires a <= b");
  }
  if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("profile: non-finite parameter");
  if (stochastic() && !seed) throw ConfigError("profile " + to_string(*this) + ": seed required");
  if (x0 && x0->size() != sys.n()) {
    throw DimensionError("profile: pinned x0 must have n entries");
  }
}

DisturbanceProfile parse_profile(const std::string& text) {
  static const std::regex call(R"(\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*)");
  DisturbanceProfile p;
  std::smatch mt;
  if (!std::regex_match(text, mt, call)) {
    // bare numbers name a constant profile
    p.kind = ProfileKind::constant;
    p.a = parse_number(text, text);
    return p;
  }
  const std::string name = mt[1];
  std::vector<double> args;
  if (mt[2].matched) {
    std::stringstream ss(mt[2].str());
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      args.push_back(parse_number(item, text));
    }
  }
  auto expect = [&](std::size_t k) {
    if (args.size() != k) {
      throw ConfigError("profile '" + text + "': expected " + std::to_string(k) + " arguments");
    }
  };
  if (name == "gaussian") {
    expect(0);
    p.kind = ProfileKind::gaussian;
  } else if (name == "uniform") {
    expect(2);
    p.kind = ProfileKind::uniform;
    p.a = args[0];
    p.b = args[1];
  } else if (name == "constant") {
    expect(1);
    p.kind = ProfileKind::constant;
    p.a = args[0];
  } else if (name == "sin" || name == "sawtooth" || name == "step" || name == "stairs" ||
             name == "worst" || name == "worst_energy") {
    expect(0);
    p.kind = name == "sin"        ? ProfileKind::sin
             : name == "sawtooth" ? ProfileKind::sawtooth
             : name == "step"     ? ProfileKind::step
             : name == "stairs"   ? ProfileKind::stairs
             : name == "worst"    ? ProfileKind::worst
                                  : ProfileKind::worst_energy;
  } else {
    throw ConfigError("unknown disturbance profile '" + name + "'");
  }
  if (p.kind == ProfileKind::uniform && !(p.a <= p.b)) {
    throw ConfigError("profile '" + text + "': requires a <= b");
  }
  return p;
}

std::string to_string(const DisturbanceProfile& p) {
  std::ostringstream os;
  switch (p.kind) {
    case ProfileKind::gaussian: return "gaussian";
    case ProfileKind::uniform: os << "uniform(" << p.a << "," << p.b << ")"; return os.str();
    case ProfileKind::constant: os << "constant(" << p.a << ")"; return os.str();
    case ProfileKind::sin: return "sin";
    case ProfileKind::sawtooth: return "sawtooth";
    case ProfileKind::step: return "step";
    case ProfileKind::stairs: return "stairs";
    case ProfileKind::worst: return "worst";
    case ProfileKind::worst_energy: return "worst_energy";
  }
  return "unknown";
}

double StableRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double StableRng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  return r * std::cos(th);
}

StackedSignal gen_disturbance(const DisturbanceProfile& profile, const LtvSystem& sys) {
  if (profile.kind == ProfileKind::worst || profile.kind == ProfileKind::worst_energy) {
    throw ContractViolation("gen_disturbance: worst-case profiles need a controller");
  }
  profile.validate(sys);
  const int n = sys.n();
  const int T = sys.horizon();
  StackedSignal w{SignalKind::disturbance, VectorXd::Zero(n * T)};
  if (profile.stochastic()) {
    StableRng rng(*profile.seed);
    for (int i = 0; i < n * T; ++i) {
      w.data(i) = profile.kind == ProfileKind::gaussian
                      ? rng.normal()
                      : profile.a + (profile.b - profile.a) * rng.uniform();
    }
  } else if (profile.kind == ProfileKind::constant) {
    w.data.setConstant(profile.a);
  } else {
    for (int t = 0; t < T; ++t) {
      w.data.segment(t * n, n).setConstant(profile_value(profile.kind, t, T));
    }
  }
  if (profile.x0) w.data.head(n) = *profile.x0;
  return w;
}

StackedSignal gen_disturbance(const DisturbanceProfile& profile, const LtvSystem& sys,
                              const ClosedLoopResponse& resp, const CostWeights& weights,
                              const PolytopeSet& w_set) {
  if (profile.kind == ProfileKind::worst) {
    profile.validate(sys);
    return worst_disturbance(resp, weights, w_set, profile.x0);
  }
  if (profile.kind == ProfileKind::worst_energy) {
    profile.validate(sys);
    return worst_energy_disturbance(resp, weights, profile.x0);
  }
  return gen_disturbance(profile, sys);
}

namespace {

// Unit top eigenvector over the free coordinates, zero on the pinned block.
VectorXd worst_direction(const ClosedLoopResponse& resp, const CostWeights& weights, int dim,
                         int fixed) {
  const MatrixXd phi = resp.stacked();
  if (phi.cols() != dim) throw DimensionError("worst_disturbance: W has the wrong dimension");
  if (weights.joint().rows() != phi.rows()) {
    throw DimensionError("worst_disturbance: weights do not match the response");
  }
  if (fixed > dim) throw DimensionError("worst_disturbance: pinned block too long");
  VectorXd dir = VectorXd::Zero(dim);
  const MatrixXd sub = phi.rightCols(dim - fixed);
  MatrixXd op = sub.transpose() * weights.joint() * sub;
  op = 0.5 * (op + op.transpose());
  if (op.size() == 0 || op.cwiseAbs().maxCoeff() == 0.0) return dir;

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(op);
  const VectorXd& ev = es.eigenvalues();
  const double top = ev(ev.size() - 1);
  int pick = static_cast<int>(ev.size()) - 1;
  const double tie = 1e-12 * std::max(1.0, std::abs(top));
  for (int j = 0; j < ev.size(); ++j) {
    if (ev(j) >= top - tie) {
      pick = j;
      break;
    }
  }
  VectorXd v = es.eigenvectors().col(pick);
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-14) {
      if (v(i) < 0) v = -v;
      break;
    }
  }
  dir.tail(dim - fixed) = v;
  return dir;
}

}  // namespace

StackedSignal worst_disturbance(const ClosedLoopResponse& resp, const CostWeights& weights,
                                const PolytopeSet& w_set, const std::optional<VectorXd>& x0) {
  const int dim = w_set.dim();
  const int fixed = x0 ? static_cast<int>(x0->size()) : 0;
  const VectorXd dir = worst_direction(resp, weights, dim, fixed);
  VectorXd base = VectorXd::Zero(dim);
  if (x0) base.head(fixed) = *x0;
  StackedSignal out{SignalKind::disturbance, base};
  if (dir.isZero(0.0)) return out;

  const VectorXd hv = w_set.h_mat() * dir;
  const VectorXd room = w_set.h_vec() - w_set.h_mat() * base;
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < hv.size(); ++i) {
    if (hv(i) > 1e-14) alpha = std::min(alpha, room(i) / hv(i));
  }
  if (!std::isfinite(alpha)) throw InvalidSetError("worst_disturbance: W is unbounded");
  if (alpha < 0.0) throw InvalidSetError("worst_disturbance: pinned x0 lies outside W");
  out.data = base + alpha * dir;
  return out;
}

StackedSignal worst_energy_disturbance(const ClosedLoopResponse& resp, const CostWeights& weights,
                                       const std::optional<VectorXd>& x0) {
  const int dim = static_cast<int>(resp.phi_x.cols());
  const int fixed = x0 ? static_cast<int>(x0->size()) : 0;
  StackedSignal out{SignalKind::disturbance, worst_direction(resp, weights, dim, fixed)};
  if (x0) out.data.head(fixed) = *x0;
  return out;
}

}  // namespace sls
