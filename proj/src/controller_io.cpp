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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "sls/bench.hpp"

namespace sls {
namespace {

using nlohmann::json;

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error("sha256: OpenSSL initialization failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void add(const void* data, std::size_t len) { EVP_DigestUpdate(ctx_, data, len); }
  void add(std::int64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    add(b, 8);
  }
  // little-endian IEEE bytes, column-major, prefixed by the shape
  void add(const MatrixXd& m) {
    add(static_cast<std::int64_t>(m.rows()));
    add(static_cast<std::int64_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      std::uint64_t bits;
      const double d = m.data()[k];
      std::memcpy(&bits, &d, sizeof bits);
      add(static_cast<std::int64_t>(bits));
    }
  }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s += digits[md[i] >> 4];
      s += digits[md[i] & 15];
    }
    return s;
  }

 private:
  EVP_MD_CTX* ctx_;
};

json to_json(const MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from(const json& j, const std::string& field) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ConfigError("controller file: malformed matrix '" + field + "'");
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data.at(r * cols + c).get<double>();
  }
  return m;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

conic::SolveStatus status_from(const std::string& s) {
  using conic::SolveStatus;
  for (SolveStatus st : {SolveStatus::optimal, SolveStatus::infeasible, SolveStatus::unbounded,
                         SolveStatus::max_iterations, SolveStatus::numerical_error}) {
    if (conic::to_string(st) == s) return st;
  }
  throw ConfigError("controller file: unknown solver status '" + s + "'");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string system_digest(const LtvSystem& sys) {
  Sha256 h;
  h.add("sls-system", 10);
  h.add(static_cast<std::int64_t>(sys.n()));
  h.add(static_cast<std::int64_t>(sys.m()));
  h.add(static_cast<std::int64_t>(sys.horizon()));
  for (const auto& a : sys.a()) h.add(a);
  for (const auto& b : sys.b()) h.add(b);
  return h.hex();
}

std::string weights_digest(const CostWeights& weights) {
  Sha256 h;
  h.add("sls-weights", 11);
  h.add(weights.q());
  h.add(weights.r());
  return h.hex();
}

void serialize_controller(const SynthesisResult& result, const LtvSystem& sys,
                          const CostWeights& weights, const std::filesystem::path& path,
                          const std::optional<PolytopeSet>& disturbance_set) {
  json j;
  j["format"] = "sls-controller";
  j["version"] = kControllerFormatVersion;
  j["created"] = utc_now();
  j["system_digest"] = system_digest(sys);
  j["weights_digest"] = weights_digest(weights);
  j["n"] = sys.n();
  j["m"] = sys.m();
  j["horizon"] = sys.horizon();
  json a = json::array(), b = json::array();
  for (const auto& m : sys.a()) a.push_back(to_json(m));
  for (const auto& m : sys.b()) b.push_back(to_json(m));
  j["system"] = {{"A_t", a}, {"B_t", b}};
  j["weights"] = {{"Q", to_json(weights.q())}, {"R", to_json(weights.r())}};
  if (disturbance_set) {
    j["disturbance_set"] = {{"H", to_json(disturbance_set->h_mat())},
                            {"h", to_json(disturbance_set->h_vec())}};
  }
  j["kind"] = result.kind;
  j["objective_value"] = number_or_null(result.objective_value);
  j["benchmark_id"] = result.benchmark_id;
  j["causal"] = result.response.causal;
  j["phi_x"] = to_json(result.response.phi_x);
  j["phi_u"] = to_json(result.response.phi_u);
  const auto& r = result.report;
  j["report"] = {{"status", conic::to_string(r.status)},
                 {"objective_value", number_or_null(r.objective_value)},
                 {"primal_residual", number_or_null(r.primal_residual)},
                 {"dual_residual", number_or_null(r.dual_residual)},
                 {"duality_gap", number_or_null(r.duality_gap)},
                 {"iterations", r.iterations},
                 {"wall_time", number_or_null(r.wall_time)}};
  if (result.certificate) j["certificate"] = to_json(result.certificate->z);

  std::ofstream out(path);
  if (!out) throw Error("cannot write controller file " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error("failed writing controller file " + path.string());
}

StoredController deserialize_controller(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open controller file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("controller file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "sls-controller") {
      throw ConfigError("controller file " + path.string() + ": not a controller file");
    }
    const int version = j.at("version").get<int>();
    if (version != kControllerFormatVersion) {
      throw ConfigError("controller file " + path.string() + ": unsupported format version " +
                        std::to_string(version));
    }
    const int n = j.at("n").get<int>();
    const int m = j.at("m").get<int>();
    const int horizon = j.at("horizon").get<int>();
    std::vector<MatrixXd> a, b;
    for (const json& x : j.at("system").at("A_t")) a.push_back(matrix_from(x, "A_t"));
    for (const json& x : j.at("system").at("B_t")) b.push_back(matrix_from(x, "B_t"));
    StoredController s{
        .result = {},
        .system = LtvSystem(n, m, horizon, std::move(a), std::move(b)),
        .weights = CostWeights(matrix_from(j.at("weights").at("Q"), "Q"),
                               matrix_from(j.at("weights").at("R"), "R")),
        .disturbance_set = std::nullopt,
        .system_digest = j.at("system_digest").get<std::string>(),
        .weights_digest = j.at("weights_digest").get<std::string>(),
        .created = j.at("created").get<std::string>(),
        .format_version = version,
    };
    if (s.system_digest != system_digest(s.system) ||
        s.weights_digest != weights_digest(s.weights)) {
      throw DigestMismatchError("controller file " + path.string() +
                                ": embedded model does not match its digest");
    }
    if (j.contains("disturbance_set")) {
      const json& w = j.at("disturbance_set");
      s.disturbance_set.emplace(matrix_from(w.at("H"), "H"), matrix_from(w.at("h"), "h").col(0));
    }
    SynthesisResult& r = s.result;
    r.kind = j.at("kind").get<std::string>();
    r.objective_value = number_from(j.at("objective_value"));
    r.benchmark_id = j.at("benchmark_id").get<std::string>();
    r.response.causal = j.at("causal").get<bool>();
    r.response.phi_x = matrix_from(j.at("phi_x"), "phi_x");
    r.response.phi_u = matrix_from(j.at("phi_u"), "phi_u");
    const json& rep = j.at("report");
    r.report.status = status_from(rep.at("status").get<std::string>());
    r.report.objective_value = number_from(rep.at("objective_value"));
    r.report.primal_residual = number_from(rep.at("primal_residual"));
    r.report.dual_residual = number_from(rep.at("dual_residual"));
    r.report.duality_gap = number_from(rep.at("duality_gap"));
    r.report.iterations = rep.at("iterations").get<int>();
    r.report.wall_time = number_from(rep.at("wall_time"));
    if (j.contains("certificate")) {
      r.certificate = DualCertificate{matrix_from(j.at("certificate"), "certificate")};
    }
    const int nT = n * horizon;
    if (r.response.phi_x.rows() != nT || r.response.phi_x.cols() != nT ||
        r.response.phi_u.rows() != m * horizon || r.response.phi_u.cols() != nT) {
      throw ConfigError("controller file " + path.string() + ": response shape mismatch");
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError("controller file " + path.string() + ": " + e.what());
  } catch (const DigestMismatchError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("controller file " + path.string() + ": " + e.what());
  }
}

StoredController deserialize_controller(const std::filesystem::path& path, const LtvSystem& sys,
                                        const CostWeights& weights) {
  StoredController s = deserialize_controller(path);
  if (s.system_digest != system_digest(sys)) {
    throw DigestMismatchError("controller file " + path.string() +
                              " was synthesized for a different system");
  }
  if (s.weights_digest != weights_digest(weights)) {
    throw DigestMismatchError("controller file " + path.string() +
                              " was synthesized for different cost weights");
  }
  return s;
}

}  // namespace sls
