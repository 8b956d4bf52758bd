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

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sls/bench.hpp"

namespace py = pybind11;
using namespace sls;

namespace {

ClosedLoopResponse make_response(MatrixXd phi_x, MatrixXd phi_u, bool causal) {
  ClosedLoopResponse r;
  r.phi_x = std::move(phi_x);
  r.phi_u = std::move(phi_u);
  r.causal = causal;
  return r;
}

StackedSignal as_disturbance(const VectorXd& w) { return {SignalKind::disturbance, w}; }

DisturbanceProfile profile_arg(const std::string& text, std::optional<std::uint64_t> seed,
                               std::optional<VectorXd> x0) {
  DisturbanceProfile p = parse_profile(text);
  if (seed) p.seed = seed;
  if (x0) p.x0 = std::move(x0);
  return p;
}

}  // namespace

PYBIND11_MODULE(_sls, m) {
  m.doc() = "Finite-horizon system level synthesis for LTV systems";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidSystemError>(m, "InvalidSystemError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<NotPsdError>(m, "NotPsdError", base.ptr());
  py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvalidSetError>(m, "InvalidSetError", base.ptr());
  py::register_exception<DigestMismatchError>(m, "DigestMismatchError", base.ptr());

  py::class_<LtvSystem>(m, "LtvSystem")
      .def(py::init<int, int, int, std::vector<MatrixXd>, std::vector<MatrixXd>>(), py::arg("n"),
           py::arg("m"), py::arg("horizon"), py::arg("A"), py::arg("B"))
      .def_static("time_invariant", &LtvSystem::time_invariant, py::arg("A"), py::arg("B"),
                  py::arg("horizon"))
      .def_property_readonly("n", &LtvSystem::n)
      .def_property_readonly("m", &LtvSystem::m)
      .def_property_readonly("horizon", &LtvSystem::horizon)
      .def_property_readonly("A", &LtvSystem::a)
      .def_property_readonly("B", &LtvSystem::b);

  py::class_<CostWeights>(m, "CostWeights")
      .def(py::init([](MatrixXd q, MatrixXd r) { return CostWeights(std::move(q), std::move(r)); }),
           py::arg("Q"), py::arg("R"))
      .def_static("identity", &CostWeights::identity, py::arg("system"))
      .def_property_readonly("Q", &CostWeights::q)
      .def_property_readonly("R", &CostWeights::r);

  py::class_<ClosedLoopResponse>(m, "ClosedLoopResponse")
      .def(py::init(&make_response), py::arg("phi_x"), py::arg("phi_u"), py::arg("causal") = true)
      .def_readonly("phi_x", &ClosedLoopResponse::phi_x)
      .def_readonly("phi_u", &ClosedLoopResponse::phi_u)
      .def_readonly("causal", &ClosedLoopResponse::causal)
      .def("stacked", &ClosedLoopResponse::stacked);

  py::class_<PolytopeSet>(m, "PolytopeSet")
      .def(py::init<MatrixXd, VectorXd>(), py::arg("H"), py::arg("h"))
      .def_static("box", &PolytopeSet::box, py::arg("lo"), py::arg("hi"))
      .def_property_readonly("H", &PolytopeSet::h_mat)
      .def_property_readonly("h", &PolytopeSet::h_vec)
      .def("contains", &PolytopeSet::contains, py::arg("v"), py::arg("tol") = 1e-9)
      .def("support", &PolytopeSet::support, py::arg("c"));

  py::class_<SafetySpec>(m, "SafetySpec")
      .def(py::init([](PolytopeSet c, PolytopeSet w) { return SafetySpec{std::move(c), std::move(w)}; }),
           py::arg("constraint"), py::arg("disturbance_set"))
      .def_readonly("constraint", &SafetySpec::constraint)
      .def_readonly("disturbance_set", &SafetySpec::disturbance_set);

  py::class_<conic::SolverReport>(m, "SolverReport")
      .def_property_readonly("status",
                             [](const conic::SolverReport& r) { return conic::to_string(r.status); })
      .def_readonly("objective_value", &conic::SolverReport::objective_value)
      .def_readonly("primal_residual", &conic::SolverReport::primal_residual)
      .def_readonly("dual_residual", &conic::SolverReport::dual_residual)
      .def_readonly("duality_gap", &conic::SolverReport::duality_gap)
      .def_readonly("iterations", &conic::SolverReport::iterations)
      .def_readonly("wall_time", &conic::SolverReport::wall_time)
      .def("__repr__", [](const conic::SolverReport& r) { return report_digest(r); });

  py::class_<SynthesisResult>(m, "SynthesisResult")
      .def_readonly("kind", &SynthesisResult::kind)
      .def_readonly("response", &SynthesisResult::response)
      .def_readonly("objective_value", &SynthesisResult::objective_value)
      .def_readonly("report", &SynthesisResult::report)
      .def_readonly("benchmark_id", &SynthesisResult::benchmark_id)
      .def_property_readonly("certificate",
                             [](const SynthesisResult& r) -> std::optional<MatrixXd> {
                               if (!r.certificate) return std::nullopt;
                               return r.certificate->z;
                             })
      .def_property_readonly("optimal", &SynthesisResult::optimal);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("x", &Trajectory::x)
      .def_readonly("u", &Trajectory::u)
      .def_readonly("w", &Trajectory::w)
      .def_readonly("cost", &Trajectory::cost);

  py::class_<SafetyRowCheck>(m, "SafetyRowCheck")
      .def_readonly("row", &SafetyRowCheck::row)
      .def_readonly("label", &SafetyRowCheck::label)
      .def_readonly("worst", &SafetyRowCheck::worst)
      .def_readonly("bound", &SafetyRowCheck::bound)
      .def_readonly("slack", &SafetyRowCheck::slack)
      .def_readonly("passed", &SafetyRowCheck::pass);

  py::class_<SafetyReport>(m, "SafetyReport")
      .def_readonly("rows", &SafetyReport::rows)
      .def_readonly("lp_pass", &SafetyReport::lp_pass)
      .def_readonly("rollouts", &SafetyReport::rollouts)
      .def_readonly("rollout_violations", &SafetyReport::rollout_violations)
      .def_readonly("min_rollout_slack", &SafetyReport::min_rollout_slack)
      .def_property_readonly("passed", &SafetyReport::pass);

  py::class_<BenchmarkConfig>(m, "BenchmarkConfig")
      .def_readonly("name", &BenchmarkConfig::name)
      .def_readonly("system", &BenchmarkConfig::system)
      .def_readonly("weights", &BenchmarkConfig::weights)
      .def_readonly("sigma_w", &BenchmarkConfig::sigma_w)
      .def_readonly("disturbance_set", &BenchmarkConfig::disturbance_set)
      .def_readonly("safety", &BenchmarkConfig::safety)
      .def_readonly("sim_x0", &BenchmarkConfig::sim_x0)
      .def_readonly("realizations", &BenchmarkConfig::realizations)
      .def_readonly("base_seed", &BenchmarkConfig::base_seed)
      .def_property_readonly("controllers", [](const BenchmarkConfig& c) {
        std::vector<std::string> out;
        for (ControllerKind k : c.controllers) out.push_back(to_string(k));
        return out;
      });

  py::class_<StoredController>(m, "StoredController")
      .def_readonly("result", &StoredController::result)
      .def_readonly("system", &StoredController::system)
      .def_readonly("weights", &StoredController::weights)
      .def_readonly("disturbance_set", &StoredController::disturbance_set)
      .def_readonly("created", &StoredController::created);

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("text"), py::arg("source") = "<string>");

  m.def(
      "clairvoyant",
      [](const LtvSystem& sys, const CostWeights& w) {
        ClairvoyantResult r = clairvoyant_closed_form(sys, w);
        return py::make_tuple(r.response, r.cost_operator);
      },
      py::arg("system"), py::arg("weights"),
      "Noncausal optimal response and the cost operator C with cost w'Cw.");
  m.def("achievability_residual", &achievability_residual, py::arg("response"),
        py::arg("system"));

  m.def(
      "synth_h2",
      [](const LtvSystem& sys, const CostWeights& w, const MatrixXd& sigma,
         const std::optional<SafetySpec>& spec) { return synth_h2(sys, w, sigma, spec); },
      py::arg("system"), py::arg("weights"), py::arg("sigma_w"), py::arg("safety") = std::nullopt);
  m.def(
      "synth_hinf",
      [](const LtvSystem& sys, const CostWeights& w, const std::optional<SafetySpec>& spec) {
        return synth_hinf(sys, w, spec);
      },
      py::arg("system"), py::arg("weights"), py::arg("safety") = std::nullopt);
  m.def(
      "synth_regret",
      [](const LtvSystem& sys, const CostWeights& w, const std::optional<SafetySpec>& spec,
         std::optional<MatrixXd> benchmark_cost) {
        Benchmark b = benchmark_cost ? Benchmark{"custom", *benchmark_cost}
                                     : Benchmark::clairvoyant(clairvoyant_closed_form(sys, w));
        return synth_regret(sys, w, spec, b);
      },
      py::arg("system"), py::arg("weights"), py::arg("safety") = std::nullopt,
      py::arg("benchmark_cost") = std::nullopt);
  m.def(
      "synth_safe_clairvoyant",
      [](const LtvSystem& sys, const CostWeights& w, const SafetySpec& spec,
         const std::string& mode, const MatrixXd& sigma) {
        BenchmarkMode bm;
        if (mode == "h2") {
          bm = BenchmarkMode::h2;
        } else if (mode == "hinf") {
          bm = BenchmarkMode::hinf;
        } else {
          throw ConfigError("mode must be 'h2' or 'hinf'");
        }
        return synth_safe_clairvoyant(sys, w, spec, bm, sigma);
      },
      py::arg("system"), py::arg("weights"), py::arg("safety"), py::arg("mode"),
      py::arg("sigma_w"));
  m.def(
      "synthesize",
      [](const BenchmarkConfig& cfg, const std::string& kind) {
        return synthesize_controller(cfg, parse_controller_kind(kind));
      },
      py::arg("config"), py::arg("kind"));
  m.def("regret_value", &regret_value, py::arg("response"), py::arg("benchmark_cost"),
        py::arg("weights"));

  m.def(
      "rollout",
      [](const LtvSystem& sys, const ClosedLoopResponse& r, const VectorXd& w,
         const CostWeights& weights) { return rollout(sys, r, as_disturbance(w), weights); },
      py::arg("system"), py::arg("response"), py::arg("w"), py::arg("weights"));
  m.def(
      "disturbance",
      [](const std::string& profile, const LtvSystem& sys, std::optional<std::uint64_t> seed,
         std::optional<VectorXd> x0) { return gen_disturbance(profile_arg(profile, seed, x0), sys).data; },
      py::arg("profile"), py::arg("system"), py::arg("seed") = std::nullopt,
      py::arg("x0") = std::nullopt);
  m.def(
      "worst_disturbance",
      [](const ClosedLoopResponse& r, const CostWeights& w, const PolytopeSet& set,
         std::optional<VectorXd> x0) { return worst_disturbance(r, w, set, x0).data; },
      py::arg("response"), py::arg("weights"), py::arg("disturbance_set"),
      py::arg("x0") = std::nullopt);

  m.def("verify_safety", &verify_safety, py::arg("system"), py::arg("response"),
        py::arg("safety"), py::arg("weights"), py::arg("rollouts") = 1000,
        py::arg("seed") = 0, py::arg("tol") = 1e-6);

  m.def("save_controller", &serialize_controller, py::arg("result"), py::arg("system"),
        py::arg("weights"), py::arg("path"), py::arg("disturbance_set") = std::nullopt);
  m.def("load_controller",
        py::overload_cast<const std::filesystem::path&>(&deserialize_controller), py::arg("path"));
}
