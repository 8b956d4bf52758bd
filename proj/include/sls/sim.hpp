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
#include <iosfwd>
#include <optional>
#include <random>
#include <string>

#include "sls/model.hpp"

namespace sls {

struct Trajectory {
  VectorXd x;  // nT
  VectorXd u;  // mT
  VectorXd w;  // nT, first block is x0
  double cost = 0.0;
};

// Simulates the closed loop online. Each input is computed from the
// disturbances reconstructed out of the observed states, so the result only
// matches phi * w when the response is achievable.
Trajectory rollout(const LtvSystem& sys, const ClosedLoopResponse& resp, const StackedSignal& w,
                   const CostWeights& weights);

// max_t |x_{t+1} - A_t x_t - B_t u_t - w_{t+1}| and |x_0 - w_0|
double dynamics_residual(const LtvSystem& sys, const Trajectory& traj);

// Time t, x, u, w components and the stage cost x_t'Q_t x_t + u_t'R_t u_t.
void write_trajectory_csv(std::ostream& out, const LtvSystem& sys, const Trajectory& traj,
                          const CostWeights& weights);

enum class ProfileKind {
  gaussian,
  uniform,
  constant,
  sin,
  sawtooth,
  step,
  stairs,
  worst,
  worst_energy
};

struct DisturbanceProfile {
  ProfileKind kind = ProfileKind::gaussian;
  double a = 0.0;  // uniform lower bound, constant value
  double b = 1.0;  // uniform upper bound
  std::optional<std::uint64_t> seed;
  std::optional<VectorXd> x0;  // pinned initial state

  bool stochastic() const { return kind == ProfileKind::gaussian || kind == ProfileKind::uniform; }
  void validate(const LtvSystem& sys) const;
};

// Accepts gaussian, uniform(a,b), constant(c), sin, sawtooth, step, stairs,
// worst and worst_energy. A bare number c is read as constant(c).
DisturbanceProfile parse_profile(const std::string& text);
std::string to_string(const DisturbanceProfile& profile);

// 64-bit Mersenne Twister with explicit uniform and normal transforms, so the
// stream is identical on every platform and standard library.
class StableRng {
 public:
  explicit StableRng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// Deterministic and stochastic profiles; the worst-case kinds are rejected
// here because they need the controller.
StackedSignal gen_disturbance(const DisturbanceProfile& profile, const LtvSystem& sys);

StackedSignal gen_disturbance(const DisturbanceProfile& profile, const LtvSystem& sys,
                              const ClosedLoopResponse& resp, const CostWeights& weights,
                              const PolytopeSet& w_set);

// Top eigenvector of phi' blkdiag(Q,R) phi, first nonzero entry positive,
// stretched to the boundary of w_set. With a pinned x0 only the remaining
// coordinates are optimized and the pinned block is kept fixed.
StackedSignal worst_disturbance(const ClosedLoopResponse& resp, const CostWeights& weights,
                                const PolytopeSet& w_set,
                                const std::optional<VectorXd>& x0 = std::nullopt);

// Same direction normalized to unit Euclidean norm on the free coordinates.
StackedSignal worst_energy_disturbance(const ClosedLoopResponse& resp, const CostWeights& weights,
                                       const std::optional<VectorXd>& x0 = std::nullopt);

}  // namespace sls
