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

#include <optional>
#include <string>

#include "sls/clairvoyant.hpp"
#include "sls/conic.hpp"
#include "sls/lmi.hpp"
#include "sls/model.hpp"

namespace sls {

struct SafetySpec {
  PolytopeSet constraint;       // over stacked (x, u), dimension (n+m)T
  PolytopeSet disturbance_set;  // over stacked w including x0, dimension nT

  void validate(const LtvSystem& sys) const;
};

struct DualCertificate {
  MatrixXd z;  // rows of H_w x rows of H, entrywise >= 0
};

struct CertificateCheck {
  double bound_violation = 0.0;  // max(Z' h_w - h), may be negative
  double equality_error = 0.0;   // max |H Phi - Z' H_w|
  double min_entry = 0.0;
};

CertificateCheck check_certificate(const DualCertificate& cert, const ClosedLoopResponse& resp,
                                   const SafetySpec& spec);

// Unconstrained or safe clairvoyant cost operator used as the regret baseline.
struct Benchmark {
  std::string id;
  MatrixXd cost;

  static Benchmark clairvoyant(const ClairvoyantResult& r);
};

struct SynthesisOptions {
  conic::SolverOptions solver;
  NumericSettings settings;
};

struct SynthesisResult {
  std::string kind;
  ClosedLoopResponse response;
  double objective_value = 0.0;
  std::optional<DualCertificate> certificate;
  conic::SolverReport report;
  std::string benchmark_id;

  bool optimal() const { return report.status == conic::SolveStatus::optimal; }
};

Benchmark safe_benchmark(const SynthesisResult& r, const CostWeights& weights);

// Decision variables for Phi_u; index(a, b) is -1 for structural zeros.
struct ResponseVariables {
  int first = 0;
  int count = 0;
  Eigen::MatrixXi index;
  bool causal = true;
};

ResponseVariables add_response_variables(conic::ConicProgram& prog, const LtvSystem& sys,
                                         bool causal);

// [Phi_x; Phi_u] with Phi_x = G + F Phi_u.
AffineMatrix response_affine(const ResponseVariables& vars, const PlantMaps& maps, int nvar);

ClosedLoopResponse materialize_response(const ResponseVariables& vars, const PlantMaps& maps,
                                        const VectorXd& x);

struct SafetyDualization {
  int z_first = 0;
  int rows_w = 0;
  int rows_h = 0;

  DualCertificate certificate(const VectorXd& x) const;
};

// Adds Z >= 0, Z' h_w <= h - margin (1 + |h|) and H Phi = Z' H_w for the rows
// of h_phi.
SafetyDualization dualize_safety(conic::ConicProgram& prog, const AffineMatrix& h_phi,
                                 const VectorXd& h, const PolytopeSet& disturbance_set,
                                 double margin = 0.0);

SynthesisResult synth_h2(const LtvSystem& sys, const CostWeights& weights, const MatrixXd& sigma_w,
                         const std::optional<SafetySpec>& spec,
                         const SynthesisOptions& options = {});

SynthesisResult synth_hinf(const LtvSystem& sys, const CostWeights& weights,
                           const std::optional<SafetySpec>& spec,
                           const SynthesisOptions& options = {});

enum class BenchmarkMode { h2, hinf };

SynthesisResult synth_safe_clairvoyant(const LtvSystem& sys, const CostWeights& weights,
                                       const SafetySpec& spec, BenchmarkMode mode,
                                       const MatrixXd& sigma_w,
                                       const SynthesisOptions& options = {});

SynthesisResult synth_regret(const LtvSystem& sys, const CostWeights& weights,
                             const std::optional<SafetySpec>& spec, const Benchmark& benchmark,
                             const SynthesisOptions& options = {});

// lambda_max([Phi_x; Phi_u]' blkdiag(Q,R) [Phi_x; Phi_u] - benchmark_cost)
double regret_value(const ClosedLoopResponse& resp, const MatrixXd& benchmark_cost,
                    const CostWeights& weights);

}  // namespace sls
