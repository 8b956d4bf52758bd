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

#include "sls/model.hpp"

namespace sls {

struct ClairvoyantResult {
  ClosedLoopResponse response;  // noncausal
  MatrixXd cost_operator;       // w' C w is the clairvoyant cost of w
};

ClairvoyantResult clairvoyant_closed_form(const LtvSystem& sys, const CostWeights& weights);

// Minimizes ||blkdiag(Q,R)^{1/2} Phi sigma_w^{1/2}||_F^2 subject only to
// achievability, as an equality constrained least squares problem.
ClosedLoopResponse clairvoyant_via_optimization(const LtvSystem& sys, const CostWeights& weights,
                                                const MatrixXd& sigma_w,
                                                const NumericSettings& settings = default_settings());

}  // namespace sls
