// SPDX-License-Identifier: Apache-2.0
//
// sparsid: sparse identification of rational transfer functions
// Copyright (C) 2026 The sparsid authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Monte-Carlo experiment driver: configuration, named presets, a trial pool,
// artifact writers (table.csv, trials.jsonl, hist_*.csv, clusters.csv,
// summary.json), report recomputation and a pre-flight diagnostic.

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sparsid/clustering.hpp"
#include "sparsid/errors.hpp"
#include "sparsid/identification.hpp"
#include "sparsid/json_io.hpp"
#include "sparsid/l1_solver.hpp"
#include "sparsid/random.hpp"
#include "sparsid/rational_basis.hpp"
#include "sparsid/sensing.hpp"

namespace sparsid {

inline constexpr const char* kVersion = "1.0.0";

enum class ErrorMetric { relative_coefficient, h2 };

/// One compared model (a table row): dictionary sizes, measurement count
/// and how the TM poles are chosen.
struct RowConfig {
  std::string label;
  std::string model = "two-ortho";
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t m = 0;
  PoleSpec poles = PoleSpec::fixed({});
  std::optional<std::size_t> sparsity;  // nominal value for the table
};

struct TruthConfig {
  enum class Kind { random_spikes, rational };
  Kind kind = Kind::random_spikes;
  std::size_t s1 = 0;
  std::size_t s2 = 0;
  std::vector<ZpkTerm> terms;  // rational only
};

struct ClusterConfig {
  std::string row;
  std::size_t k = 10;
  std::size_t restarts = 10;
  RepresentativeRule rule = RepresentativeRule::medoid;
};

struct ExperimentConfig {
  std::string name = "custom";
  std::size_t grid_size = 0;
  std::size_t trials = 0;
  double threshold = 0.0;
  ErrorMetric metric = ErrorMetric::h2;
  std::uint64_t master_seed = 0;
  double noise_radius = 0.0;
  std::optional<double> noise_norm;  // defaults to noise_radius
  AmplitudeMode amplitude_mode = AmplitudeMode::plus_one;
  SolverTolerances solver;
  double significance = kDefaultSignificance;
  std::size_t quadrature = kDefaultQuadrature;
  double delta = 0.1;           // diagnose: failure probability
  double bound_constant = 1.0;  // diagnose: C
  TruthConfig truth;
  std::vector<RowConfig> rows;
  std::optional<ClusterConfig> clusters;
};

// ---------------------------------------------------------------------------
// Config <-> JSON

namespace detail {

inline const char* to_string(ErrorMetric m) { return m == ErrorMetric::h2 ? "h2" : "relative_coefficient"; }
inline const char* to_string(AmplitudeMode m) { return m == AmplitudeMode::plus_one ? "plus_one" : "random_sign"; }
inline const char* to_string(RepresentativeRule r) { return r == RepresentativeRule::medoid ? "medoid" : "min_error"; }

inline nlohmann::json pole_spec_json(const PoleSpec& p) {
  nlohmann::json j;
  switch (p.kind) {
    case PoleSpec::Kind::uniform:
      j = {{"kind", "uniform"}, {"low", p.low}, {"high", p.high}};
      break;
    case PoleSpec::Kind::fixed:
      j = {{"kind", "fixed"}, {"values", p.leading}};
      break;
    case PoleSpec::Kind::random_prefix:
      j = {{"kind", "random_prefix"}, {"count", p.random_count}, {"low", p.low}, {"high", p.high}};
      break;
  }
  return j;
}

// Collects every problem in a config instead of stopping at the first.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(where("") + "expected an object");
  }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  template <typename T>
  std::optional<T> get(const std::string& key, bool required = false) {
    seen_.insert(key);
    if (!has(key)) {
      if (required) errors_.push_back(where(key) + "missing required field");
      return std::nullopt;
    }
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors_.push_back(where(key) + "has the wrong type (" + std::string(j_.at(key).type_name()) + ")");
      return std::nullopt;
    }
  }

  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &j_.at(key) : nullptr;
  }

  void finish() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) errors_.push_back(where(it.key()) + "unknown field");
    }
  }

  std::string where(const std::string& key) const {
    std::string p = path_;
    if (!key.empty()) p += (p.empty() ? "" : ".") + key;
    return (p.empty() ? std::string("config") : p) + ": ";
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline PoleSpec parse_pole_spec(const nlohmann::json& j, const std::string& path, std::vector<std::string>& errors) {
  FieldReader f(j, path, errors);
  const auto kind = f.get<std::string>("kind", true).value_or("fixed");
  PoleSpec p;
  if (kind == "uniform") {
    p = PoleSpec::uniform(f.get<double>("low").value_or(0.0), f.get<double>("high").value_or(1.0));
  } else if (kind == "fixed") {
    p = PoleSpec::fixed(f.get<std::vector<double>>("values").value_or(std::vector<double>{}));
  } else if (kind == "repeated") {
    const double v = f.get<double>("value", true).value_or(0.0);
    p = PoleSpec::repeated(v, f.get<std::size_t>("multiplicity", true).value_or(0));
  } else if (kind == "random_prefix") {
    const auto count = f.get<std::size_t>("count", true).value_or(0);
    p = PoleSpec::random_prefix(count, f.get<double>("low").value_or(0.0), f.get<double>("high").value_or(1.0));
  } else {
    errors.push_back(f.where("kind") + "unknown pole kind '" + kind + "'");
  }
  if (p.kind != PoleSpec::Kind::fixed && !(p.low >= -1.0 && p.high <= 1.0 && p.low < p.high)) {
    errors.push_back(f.where("") + "pole interval must satisfy -1 <= low < high <= 1");
  }
  for (double v : p.leading) {
    if (!(std::abs(v) < 1.0)) errors.push_back(f.where("values") + "pole " + json_number(v) + " is not inside the unit disk");
  }
  f.finish();
  return p;
}

inline ZpkTerm parse_term(const nlohmann::json& j, const std::string& path, std::vector<std::string>& errors) {
  FieldReader f(j, path, errors);
  ZpkTerm t;
  t.gain = f.get<double>("gain").value_or(1.0);
  t.zeros = f.get<std::vector<double>>("zeros").value_or(std::vector<double>{});
  t.poles = f.get<std::vector<double>>("poles", true).value_or(std::vector<double>{});
  if (t.zeros.size() > t.poles.size()) errors.push_back(f.where("zeros") + "more zeros than poles (improper term)");
  for (double p : t.poles) {
    if (!(std::abs(p) < 1.0)) errors.push_back(f.where("poles") + "pole " + json_number(p) + " is not inside the unit disk");
  }
  f.finish();
  return t;
}

inline RowConfig parse_row(FieldReader& f, std::vector<std::string>& errors, const std::string& path) {
  RowConfig r;
  r.model = f.get<std::string>("model").value_or("two-ortho");
  r.label = f.get<std::string>("label").value_or(r.model);
  r.n1 = f.get<std::size_t>("n1", true).value_or(0);
  r.n2 = f.get<std::size_t>("n2", true).value_or(0);
  r.m = f.get<std::size_t>("m", true).value_or(0);
  r.sparsity = f.get<std::size_t>("sparsity");
  if (const auto* p = f.child("poles")) {
    r.poles = parse_pole_spec(*p, path.empty() ? "poles" : path + ".poles", errors);
  }
  return r;
}

}  // namespace detail

/// Checks every invariant and throws ConfigError listing all violations.
inline void validate(const ExperimentConfig& c) {
  std::vector<std::string> e;
  if (c.grid_size < 2) e.push_back("N: must be at least 2");
  if (c.trials == 0) e.push_back("trials: must be positive");
  if (!(c.threshold > 0.0)) e.push_back("threshold: must be positive");
  if (!(c.noise_radius >= 0.0)) e.push_back("noise_radius: must be nonnegative");
  if (c.noise_norm && !(*c.noise_norm >= 0.0)) e.push_back("noise_norm: must be nonnegative");
  if (!(c.significance > 0.0)) e.push_back("significance: must be positive");
  if (c.quadrature < 2) e.push_back("quadrature: must be at least 2");
  if (!(c.delta > 0.0 && c.delta < 1.0)) e.push_back("delta: must lie in (0, 1)");
  if (!(c.bound_constant > 0.0)) e.push_back("bound_constant: must be positive");
  if (!(c.solver.feasibility_tol > 0.0)) e.push_back("solver.feasibility_tol: must be positive");
  if (!(c.solver.optimality_tol > 0.0)) e.push_back("solver.optimality_tol: must be positive");
  if (c.solver.max_iterations == 0) e.push_back("solver.max_iterations: must be positive");
  if (c.rows.empty()) e.push_back("rows: at least one row is required");
  if (c.truth.kind == TruthConfig::Kind::rational && c.truth.terms.empty()) e.push_back("truth.terms: empty system");
  if (c.truth.kind == TruthConfig::Kind::rational && c.metric == ErrorMetric::relative_coefficient) {
    e.push_back("metric: relative_coefficient needs a random_spikes truth");
  }
  const std::size_t admissible = c.grid_size >= 2 ? upper_circle_indices(FrequencyGrid(c.grid_size)).size() : 0;
  std::set<std::string> labels;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const RowConfig& r = c.rows[i];
    const std::string at = "rows[" + std::to_string(i) + "] (" + r.label + "): ";
    if (!labels.insert(r.label).second) e.push_back(at + "duplicate label");
    if (r.n1 + r.n2 == 0) e.push_back(at + "n1 + n2 must be positive");
    if (r.m == 0) e.push_back(at + "m must be positive");
    if (r.m > admissible) {
      e.push_back(at + "m = " + std::to_string(r.m) + " exceeds the " + std::to_string(admissible) +
                  " admissible grid points of N = " + std::to_string(c.grid_size));
    }
    if (r.poles.kind == PoleSpec::Kind::fixed && r.n2 > 0 && r.poles.leading.size() > r.n2) {
      e.push_back(at + "more fixed poles than TM functions");
    }
    if (c.truth.kind == TruthConfig::Kind::random_spikes) {
      if (c.truth.s1 > r.n1) e.push_back(at + "s1 exceeds n1");
      if (c.truth.s2 > r.n2) e.push_back(at + "s2 exceeds n2");
    }
  }
  if (c.clusters) {
    if (!labels.count(c.clusters->row)) e.push_back("clusters.row: no row labelled '" + c.clusters->row + "'");
    if (c.clusters->k == 0 || c.clusters->k > c.trials) e.push_back("clusters.k: must lie in [1, trials]");
  }
  if (!e.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& s : e) msg += "\n  " + s;
    throw ConfigError(msg);
  }
}

/// Builds a config from JSON. Either a `rows` list or a single flat row
/// (n1, n2, m, poles at top level) is accepted; a missing `truth` means
/// random spikes with top-level s1, s2.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  detail::FieldReader f(j, "", errors);
  ExperimentConfig c;
  c.name = f.get<std::string>("name").value_or("custom");
  c.grid_size = f.get<std::size_t>("N", true).value_or(0);
  c.trials = f.get<std::size_t>("trials", true).value_or(0);
  c.threshold = f.get<double>("threshold", true).value_or(0.0);
  c.master_seed = f.get<std::uint64_t>("master_seed").value_or(0);
  c.noise_radius = f.get<double>("noise_radius").value_or(0.0);
  c.noise_norm = f.get<double>("noise_norm");
  c.significance = f.get<double>("significance").value_or(kDefaultSignificance);
  c.quadrature = f.get<std::size_t>("quadrature").value_or(kDefaultQuadrature);
  c.delta = f.get<double>("delta").value_or(0.1);
  c.bound_constant = f.get<double>("bound_constant").value_or(1.0);
  if (const auto m = f.get<std::string>("metric")) {
    if (*m == "h2") c.metric = ErrorMetric::h2;
    else if (*m == "relative_coefficient") c.metric = ErrorMetric::relative_coefficient;
    else errors.push_back("metric: unknown metric '" + *m + "'");
  }
  if (const auto a = f.get<std::string>("spike_amplitude_mode")) {
    if (*a == "plus_one") c.amplitude_mode = AmplitudeMode::plus_one;
    else if (*a == "random_sign") c.amplitude_mode = AmplitudeMode::random_sign;
    else errors.push_back("spike_amplitude_mode: unknown mode '" + *a + "'");
  }
  if (const auto* s = f.child("solver")) {
    detail::FieldReader sf(*s, "solver", errors);
    c.solver.feasibility_tol = sf.get<double>("feasibility_tol").value_or(c.solver.feasibility_tol);
    c.solver.optimality_tol = sf.get<double>("optimality_tol").value_or(c.solver.optimality_tol);
    c.solver.max_iterations = sf.get<std::size_t>("max_iterations").value_or(c.solver.max_iterations);
    sf.finish();
  }
  if (const auto* t = f.child("truth")) {
    detail::FieldReader tf(*t, "truth", errors);
    const auto kind = tf.get<std::string>("kind", true).value_or("random_spikes");
    c.truth.s1 = tf.get<std::size_t>("s1").value_or(0);
    c.truth.s2 = tf.get<std::size_t>("s2").value_or(0);
    if (kind == "random_spikes") {
      c.truth.kind = TruthConfig::Kind::random_spikes;
    } else if (kind == "rational") {
      c.truth.kind = TruthConfig::Kind::rational;
      if (const auto* terms = tf.child("terms")) {
        if (!terms->is_array()) {
          errors.push_back("truth.terms: expected an array");
        } else {
          for (std::size_t i = 0; i < terms->size(); ++i) {
            c.truth.terms.push_back(detail::parse_term((*terms)[i], "truth.terms[" + std::to_string(i) + "]", errors));
          }
        }
      } else {
        errors.push_back("truth.terms: missing required field");
      }
    } else {
      errors.push_back("truth.kind: unknown truth kind '" + kind + "'");
    }
    tf.finish();
  } else {
    c.truth.kind = TruthConfig::Kind::random_spikes;
    c.truth.s1 = f.get<std::size_t>("s1", true).value_or(0);
    c.truth.s2 = f.get<std::size_t>("s2", true).value_or(0);
  }
  if (const auto* rows = f.child("rows")) {
    if (!rows->is_array()) {
      errors.push_back("rows: expected an array");
    } else {
      for (std::size_t i = 0; i < rows->size(); ++i) {
        const std::string path = "rows[" + std::to_string(i) + "]";
        detail::FieldReader rf((*rows)[i], path, errors);
        c.rows.push_back(detail::parse_row(rf, errors, path));
        rf.finish();
      }
    }
  } else {
    c.rows.push_back(detail::parse_row(f, errors, ""));
  }
  if (const auto* cl = f.child("clusters")) {
    detail::FieldReader cf(*cl, "clusters", errors);
    ClusterConfig cc;
    cc.row = cf.get<std::string>("row", true).value_or("");
    cc.k = cf.get<std::size_t>("k").value_or(10);
    cc.restarts = cf.get<std::size_t>("restarts").value_or(10);
    if (const auto rule = cf.get<std::string>("representative")) {
      if (*rule == "medoid") cc.rule = RepresentativeRule::medoid;
      else if (*rule == "min_error") cc.rule = RepresentativeRule::min_error;
      else errors.push_back("clusters.representative: unknown rule '" + *rule + "'");
    }
    cf.finish();
    c.clusters = cc;
  }
  f.finish();
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& s : errors) msg += "\n  " + s;
    throw ConfigError(msg);
  }
  validate(c);
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["N"] = c.grid_size;
  j["trials"] = c.trials;
  j["threshold"] = c.threshold;
  j["metric"] = detail::to_string(c.metric);
  j["master_seed"] = c.master_seed;
  j["noise_radius"] = c.noise_radius;
  if (c.noise_norm) j["noise_norm"] = *c.noise_norm;
  j["spike_amplitude_mode"] = detail::to_string(c.amplitude_mode);
  j["solver"] = {{"feasibility_tol", c.solver.feasibility_tol},
                 {"optimality_tol", c.solver.optimality_tol},
                 {"max_iterations", c.solver.max_iterations}};
  j["significance"] = c.significance;
  j["quadrature"] = c.quadrature;
  j["delta"] = c.delta;
  j["bound_constant"] = c.bound_constant;
  nlohmann::json t = {{"s1", c.truth.s1}, {"s2", c.truth.s2}};
  if (c.truth.kind == TruthConfig::Kind::random_spikes) {
    t["kind"] = "random_spikes";
  } else {
    t["kind"] = "rational";
    t["terms"] = nlohmann::json::array();
    for (const auto& term : c.truth.terms) {
      t["terms"].push_back({{"gain", term.gain}, {"zeros", term.zeros}, {"poles", term.poles}});
    }
  }
  j["truth"] = t;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : c.rows) {
    nlohmann::json row = {{"label", r.label}, {"model", r.model}, {"n1", r.n1},
                          {"n2", r.n2},       {"m", r.m},         {"poles", detail::pole_spec_json(r.poles)}};
    if (r.sparsity) row["sparsity"] = *r.sparsity;
    j["rows"].push_back(row);
  }
  if (c.clusters) {
    j["clusters"] = {{"row", c.clusters->row},
                     {"k", c.clusters->k},
                     {"restarts", c.clusters->restarts},
                     {"representative", detail::to_string(c.clusters->rule)}};
  }
  return j;
}

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error at " + detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                      e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config_text(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<ZpkTerm> two_pole_system() {
  // 1/(z - 0.01) + 1/(2z - sqrt3)
  return {{1.0, {}, {0.01}}, {0.5, {}, {std::numbers::sqrt3 / 2.0}}};
}

inline std::vector<ZpkTerm> fir_system() {
  // z^-3 + z^-5 + 3 z^-8
  return {{1.0, {}, std::vector<double>(3, 0.0)},
          {1.0, {}, std::vector<double>(5, 0.0)},
          {3.0, {}, std::vector<double>(8, 0.0)}};
}

inline std::vector<ZpkTerm> multiple_pole_system() {
  // 1/(z - 0.1)^8 + (2 - sqrt3 z)^4 / (2z - sqrt3)^5
  const double r = std::numbers::sqrt3 / 2.0;
  return {{1.0, {}, std::vector<double>(8, 0.1)},
          {9.0 / 32.0, std::vector<double>(4, 2.0 / std::numbers::sqrt3), std::vector<double>(5, r)}};
}

inline constexpr std::uint64_t kDefaultPresetSeed = 20260101;

inline std::vector<std::string> preset_names() {
  return {"table1", "table2", "table3", "table4_table", "table4_text", "table5", "table6", "table7"};
}

/// Named configurations; fig1..fig4 map to the tables they accompany.
inline ExperimentConfig preset(const std::string& requested) {
  std::string name = requested;
  if (name == "fig1") name = "table5";
  if (name == "fig2") name = "table6";
  if (name == "fig3" || name == "fig4") name = "table7";
  const double sqrt3_2 = std::numbers::sqrt3 / 2.0;
  auto row = [](std::string label, std::string model, std::size_t n1, std::size_t n2, std::size_t m, PoleSpec poles,
                std::optional<std::size_t> sparsity = std::nullopt) {
    RowConfig r;
    r.label = std::move(label);
    r.model = std::move(model);
    r.n1 = n1;
    r.n2 = n2;
    r.m = m;
    r.poles = std::move(poles);
    r.sparsity = sparsity;
    return r;
  };
  auto padded = [](std::vector<double> v) { return PoleSpec::fixed(std::move(v)); };

  ExperimentConfig c;
  c.name = name;
  c.master_seed = kDefaultPresetSeed;
  c.trials = 100;
  c.grid_size = 1000;
  c.threshold = 5e-4;
  c.metric = ErrorMetric::h2;
  c.truth.kind = TruthConfig::Kind::rational;
  if (name == "table1") {
    c.grid_size = 4000;
    c.metric = ErrorMetric::relative_coefficient;
    c.truth = {TruthConfig::Kind::random_spikes, 3, 2, {}};
    c.rows = {row("two-ortho", "two-ortho", 50, 50, 30, PoleSpec::uniform(0.0, 1.0))};
  } else if (name == "table2") {
    c.truth = {TruthConfig::Kind::rational, 0, 2, two_pole_system()};
    c.rows = {row("two-ortho", "two-ortho", 100, 100, 28, padded({0.01, sqrt3_2})),
              row("TM", "TM", 0, 100, 28, padded({0.01, sqrt3_2}))};
  } else if (name == "table3") {
    c.truth = {TruthConfig::Kind::rational, 3, 0, fir_system()};
    c.rows = {row("two-ortho", "two-ortho", 100, 100, 30, PoleSpec::random_prefix(3, 0.0, 1.0)),
              row("FIR", "FIR", 100, 0, 30, padded({}))};
  } else if (name == "table4_table" || name == "table4_text") {
    c.truth = {TruthConfig::Kind::rational, 3, 2, two_pole_system()};
    const std::size_t m = name == "table4_table" ? 30 : 40;
    c.rows = {row("two-ortho", "two-ortho", 100, 100, m, padded({sqrt3_2})),
              row("FIR", "FIR", 500, 0, 180, padded({}), 30)};
  } else if (name == "table5") {
    c.truth = {TruthConfig::Kind::rational, 3, 6, two_pole_system()};
    for (double xi : {0.9, 0.85, 0.8}) {
      for (std::size_t k = 2; k <= 6; ++k) {
        char label[48];
        std::snprintf(label, sizeof label, "xi=%g mult=%zu", xi, k);
        c.rows.push_back(row(label, "two-ortho", 100, 100, 54, PoleSpec::repeated(xi, k)));
      }
    }
  } else if (name == "table6") {
    c.threshold = 1e-3;
    c.truth = {TruthConfig::Kind::rational, 3, 2, multiple_pole_system()};
    c.rows = {row("two-ortho", "two-ortho", 100, 50, 50, PoleSpec::repeated(sqrt3_2, 5)),
              row("FIR", "FIR", 500, 0, 120, padded({}), 30)};
  } else if (name == "table7") {
    c.threshold = 5e-3;
    c.truth = {TruthConfig::Kind::rational, 3, 2, multiple_pole_system()};
    c.rows = {row("FIR", "FIR", 500, 0, 120, padded({}), 30)};
    for (double xi : {0.9, 0.85, 0.8}) {
      char label[32];
      std::snprintf(label, sizeof label, "xi=%g", xi);
      c.rows.push_back(row(label, "two-ortho", 100, 100, 60, PoleSpec::repeated(xi, 7)));
    }
    c.clusters = ClusterConfig{"xi=0.85", 10, 10, RepresentativeRule::medoid};
  } else {
    std::string known;
    for (const auto& p : preset_names()) known += " " + p;
    throw ConfigError("unknown preset '" + requested + "' (known:" + known + " fig1 fig2 fig3 fig4)");
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Trials

/// Per-trial random streams derived from the trial seed.
enum class Stream : std::uint64_t { omega = 1, poles = 2, theta = 3, noise = 4 };

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) { return derive_seed(master, trial); }

inline Rng stream(std::uint64_t seed, Stream s) { return Rng(derive_seed(seed, static_cast<std::uint64_t>(s))); }

struct TrialRecord {
  std::string row;
  std::string model;
  std::size_t sparsity = 0;
  std::size_t measurements = 0;
  double threshold = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> omega;
  std::vector<double> poles;  // TM dictionary poles
  CoefficientVector theta_hat;
  std::optional<double> rel_coeff_error;
  double h2_error = 0.0;
  double error = 0.0;  // the configured metric
  std::size_t recon_order = 0;
  SolverStatus solver_status = SolverStatus::max_iter;
  std::size_t iterations = 0;
};

inline std::size_t row_sparsity(const ExperimentConfig& c, const RowConfig& r) {
  return r.sparsity.value_or(c.truth.s1 + c.truth.s2);
}

/// Runs one trial of one row. Pure function of (config, row, trial).
inline TrialRecord run_trial(const ExperimentConfig& c, std::size_t row_index, std::size_t trial,
                             const FrequencyGrid& grid) {
  const RowConfig& row = c.rows.at(row_index);
  const std::uint64_t seed = trial_seed(c.master_seed, trial);
  TrialRecord rec;
  rec.row = row.label;
  rec.model = row.model;
  rec.sparsity = row_sparsity(c, row);
  rec.measurements = row.m;
  rec.threshold = c.threshold;
  rec.trial = trial;
  rec.seed = seed;

  GroundTruth truth;
  if (c.truth.kind == TruthConfig::Kind::random_spikes) {
    Rng rng = stream(seed, Stream::theta);
    truth = generate_ground_truth(row.n1, row.n2, c.truth.s1, c.truth.s2, row.poles, c.amplitude_mode, rng);
  } else {
    Rng rng = stream(seed, Stream::poles);
    truth = ground_truth_from_system(RationalSystem(c.truth.terms), row.n1, row.n2, row.poles.realize(row.n2, rng),
                                     c.truth.s1, c.truth.s2);
  }
  Rng omega_rng = stream(seed, Stream::omega);
  const SampleSet omega = draw_sample_set(grid, row.m, omega_rng);
  Eigen::VectorXcd h = measure(truth, grid, omega);
  const double noise = c.noise_norm.value_or(c.noise_radius);
  if (noise > 0.0) {
    Rng noise_rng = stream(seed, Stream::noise);
    h = add_measurement_noise(h, noise, noise_rng);
  }
  const Identification id = identify(h, omega, grid, row.n1, row.n2, truth.poles, c.noise_radius, c.solver);

  rec.omega = omega.indices();
  rec.poles = truth.poles.values();
  rec.theta_hat = id.theta_hat;
  rec.solver_status = id.solver.status;
  rec.iterations = id.solver.iterations;
  rec.h2_error = h2_error(id.theta_hat, truth, c.quadrature);
  if (truth.theta && !truth.degenerate) rec.rel_coeff_error = relative_coefficient_error(id.theta_hat, *truth.theta);
  rec.error = c.metric == ErrorMetric::relative_coefficient ? rec.rel_coeff_error.value_or(rec.h2_error) : rec.h2_error;
  rec.recon_order = reconstruction_order(id.theta_hat, c.significance);
  return rec;
}

struct TableRow {
  std::string model;
  std::size_t sparsity = 0;
  std::size_t measurements = 0;
  RecoveryStats stats;
  std::size_t order = 0;  // at the minimum-error trial
};

struct ClusterSummary {
  std::string row;
  ClusterResult result;
  std::size_t representative_trial = 0;
  double representative_error = 0.0;
  std::size_t representative_order = 0;
  std::size_t min_error_trial = 0;  // min-error member of the plurality cluster
  double min_error = 0.0;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<TrialRecord> records;  // row-major: rows in config order, trials ascending
  std::vector<TableRow> table;
  std::optional<ClusterSummary> clusters;
  bool all_failed = false;
};

/// Table rows from records grouped by row label in first-appearance order.
inline std::vector<TableRow> tabulate(const std::vector<TrialRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) {
    if (!groups.count(r.row)) order.push_back(r.row);
    groups[r.row].push_back(&r);
  }
  std::vector<TableRow> out;
  for (const auto& label : order) {
    const auto& g = groups[label];
    std::vector<double> errors;
    for (const auto* r : g) errors.push_back(r->error);
    TableRow t;
    t.model = label;
    t.sparsity = g.front()->sparsity;
    t.measurements = g.front()->measurements;
    t.stats = recovery_stats(errors, g.front()->threshold);
    t.order = g[t.stats.argmin]->recon_order;
    out.push_back(std::move(t));
  }
  return out;
}

inline ClusterSummary summarize_clusters(const ExperimentConfig& c, const std::vector<TrialRecord>& records) {
  const ClusterConfig& cc = *c.clusters;
  std::vector<Eigen::VectorXd> vectors;
  std::vector<double> errors;
  std::vector<const TrialRecord*> members;
  for (const auto& r : records) {
    if (r.row != cc.row) continue;
    vectors.push_back(r.theta_hat.values);
    errors.push_back(r.error);
    members.push_back(&r);
  }
  Rng rng(derive_seed(c.master_seed, 0xC105E2ULL));
  KMeansOptions opt;
  opt.restarts = cc.restarts;
  ClusterSummary s;
  s.row = cc.row;
  s.result = kmeans(vectors, cc.k, rng, opt);
  const std::size_t rep = cluster_representative(s.result, cc.rule, errors);
  const std::size_t best = cluster_representative(s.result, RepresentativeRule::min_error, errors);
  s.representative_trial = members[rep]->trial;
  s.representative_error = members[rep]->error;
  s.representative_order = members[rep]->recon_order;
  s.min_error_trial = members[best]->trial;
  s.min_error = members[best]->error;
  return s;
}

/// Runs every (row, trial) pair on `jobs` worker threads. Results are
/// placed by index, so the output does not depend on scheduling.
inline RunResult run_experiment(const ExperimentConfig& c, std::size_t jobs = 0) {
  validate(c);
  const FrequencyGrid grid(c.grid_size);
  const std::size_t tasks = c.rows.size() * c.trials;
  std::vector<TrialRecord> records(tasks);
  if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
  jobs = std::min(jobs, tasks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks) return;
      try {
        records[i] = run_trial(c, i / c.trials, i % c.trials, grid);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(tasks);
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  RunResult out;
  out.config = c;
  out.records = std::move(records);
  out.table = tabulate(out.records);
  if (c.clusters) out.clusters = summarize_clusters(c, out.records);
  out.all_failed = std::none_of(out.records.begin(), out.records.end(),
                                [](const TrialRecord& r) { return r.solver_status == SolverStatus::converged; });
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string table_csv(const std::vector<TableRow>& rows) {
  std::string out = "model,sparsity,measurements,max,min,average,order,rate\n";
  for (const auto& r : rows) {
    std::string model = r.model;
    if (model.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char ch : model) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      model = q + "\"";
    }
    out += model + "," + std::to_string(r.sparsity) + "," + std::to_string(r.measurements) + "," +
           json_number(r.stats.max_error) + "," + json_number(r.stats.min_error) + "," +
           json_number(r.stats.average_error) + "," + std::to_string(r.order) + "," +
           json_number(r.stats.recover_rate) + "\n";
  }
  return out;
}

inline std::string trial_json(const TrialRecord& r) {
  std::string s = "{\"row\":" + json_string(r.row) + ",\"model\":" + json_string(r.model) +
                  ",\"sparsity\":" + std::to_string(r.sparsity) + ",\"measurements\":" +
                  std::to_string(r.measurements) + ",\"threshold\":" + json_number(r.threshold) +
                  ",\"trial\":" + std::to_string(r.trial) + ",\"seed\":" + std::to_string(r.seed) +
                  ",\"omega\":" + json_array(r.omega, [](std::size_t v) { return std::to_string(v); }) +
                  ",\"poles\":" + json_doubles(r.poles) + ",\"n1\":" + std::to_string(r.theta_hat.n1) +
                  ",\"n2\":" + std::to_string(r.theta_hat.n2) + ",\"theta_hat\":" + json_vector(r.theta_hat.values) +
                  ",\"rel_coeff_error\":" + (r.rel_coeff_error ? json_number(*r.rel_coeff_error) : "null") +
                  ",\"h2_error\":" + json_number(r.h2_error) + ",\"error\":" + json_number(r.error) +
                  ",\"recon_order\":" + std::to_string(r.recon_order) +
                  ",\"solver_status\":" + json_string(to_string(r.solver_status)) +
                  ",\"iterations\":" + std::to_string(r.iterations) + "}";
  return s;
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.row = j.at("row").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.sparsity = j.at("sparsity").get<std::size_t>();
  r.measurements = j.at("measurements").get<std::size_t>();
  r.threshold = json_to_double(j.at("threshold"));
  r.trial = j.at("trial").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.omega = j.at("omega").get<std::vector<std::size_t>>();
  for (const auto& p : j.at("poles")) r.poles.push_back(json_to_double(p));
  r.theta_hat = CoefficientVector(json_to_vector(j.at("theta_hat")), j.at("n1").get<std::size_t>(),
                                  j.at("n2").get<std::size_t>());
  if (!j.at("rel_coeff_error").is_null()) r.rel_coeff_error = json_to_double(j.at("rel_coeff_error"));
  r.h2_error = json_to_double(j.at("h2_error"));
  r.error = json_to_double(j.at("error"));
  r.recon_order = j.at("recon_order").get<std::size_t>();
  r.solver_status = solver_status_from_string(j.at("solver_status").get<std::string>());
  r.iterations = j.at("iterations").get<std::size_t>();
  return r;
}

inline std::vector<TrialRecord> read_trials(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<TrialRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError(path.string() + ": no trial records");
  return out;
}

inline constexpr double kHistogramWidth = 0.05;

/// Fixed-width bins over [0, ceil(max / w) w]; the right edge is closed.
inline std::vector<std::size_t> histogram(std::span<const double> errors, double width = kHistogramWidth) {
  double mx = 0.0;
  for (double e : errors) {
    if (std::isfinite(e)) mx = std::max(mx, e);
  }
  const auto bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mx / width)));
  std::vector<std::size_t> counts(bins, 0);
  for (double e : errors) {
    if (!std::isfinite(e)) continue;
    auto b = static_cast<std::size_t>(std::floor(e / width));
    counts[std::min(b, bins - 1)] += 1;
  }
  return counts;
}

inline std::string file_label(const std::string& label) {
  std::string s;
  for (char ch : label) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                    ch == '.' || ch == '_';
    s += ok ? ch : '_';
  }
  return s;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

struct ReportBundle {
  std::filesystem::path table_csv;
  std::filesystem::path trials_jsonl;
  std::filesystem::path summary_json;
  std::vector<std::filesystem::path> histograms;
  std::optional<std::filesystem::path> clusters_csv;
};

inline ReportBundle write_bundle(const RunResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  ReportBundle b;
  b.table_csv = dir / "table.csv";
  detail::write_text(b.table_csv, table_csv(r.table));

  b.trials_jsonl = dir / "trials.jsonl";
  std::string lines;
  for (const auto& rec : r.records) lines += trial_json(rec) + "\n";
  detail::write_text(b.trials_jsonl, lines);

  for (const auto& row : r.table) {
    const auto counts = histogram(row.stats.errors);
    std::string text = "bin_left,count\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
      text += json_number(static_cast<double>(i) * kHistogramWidth) + "," + std::to_string(counts[i]) + "\n";
    }
    b.histograms.push_back(dir / ("hist_" + file_label(row.model) + ".csv"));
    detail::write_text(b.histograms.back(), text);
  }

  std::string clusters_json = "null";
  if (r.clusters) {
    const auto& cs = *r.clusters;
    std::string text = "cluster,size\n";
    for (std::size_t i = 0; i < cs.result.sizes.size(); ++i) {
      text += std::to_string(i + 1) + "," + std::to_string(cs.result.sizes[i]) + "\n";
    }
    b.clusters_csv = dir / "clusters.csv";
    detail::write_text(*b.clusters_csv, text);
    clusters_json = "{\"row\":" + json_string(cs.row) +
                    ",\"sizes\":" + json_array(cs.result.sizes, [](std::size_t v) { return std::to_string(v); }) +
                    ",\"plurality_cluster\":" + std::to_string(cs.result.plurality() + 1) +
                    ",\"sse\":" + json_number(cs.result.sse) +
                    ",\"representative_trial\":" + std::to_string(cs.representative_trial) +
                    ",\"representative_error\":" + json_number(cs.representative_error) +
                    ",\"representative_order\":" + std::to_string(cs.representative_order) +
                    ",\"min_error_trial\":" + std::to_string(cs.min_error_trial) +
                    ",\"min_error\":" + json_number(cs.min_error) + "}";
  }

  std::string rows = "[";
  for (std::size_t i = 0; i < r.table.size(); ++i) {
    const auto& t = r.table[i];
    if (i > 0) rows += ',';
    rows += "{\"model\":" + json_string(t.model) + ",\"rate\":" + json_number(t.stats.recover_rate) +
            ",\"max\":" + json_number(t.stats.max_error) + ",\"min\":" + json_number(t.stats.min_error) +
            ",\"average\":" + json_number(t.stats.average_error) + ",\"order\":" + std::to_string(t.order) + "}";
  }
  rows += "]";
  b.summary_json = dir / "summary.json";
  detail::write_text(b.summary_json, "{\"version\":" + json_string(kVersion) + ",\"name\":" +
                                         json_string(r.config.name) + ",\"master_seed\":" +
                                         std::to_string(r.config.master_seed) + ",\"config\":" +
                                         config_to_json(r.config).dump() + ",\"rows\":" + rows +
                                         ",\"clusters\":" + clusters_json + "}\n");
  return b;
}

/// Recomputes table.csv from a trials file.
inline std::string report(const std::filesystem::path& trials) { return table_csv(tabulate(read_trials(trials))); }

// ---------------------------------------------------------------------------
// Diagnostics

/// Pre-flight report per row: coherences, uniqueness test at the nominal
/// sparsity, the measurement bound and Gram deviations at the configured N.
inline void diagnose(const ExperimentConfig& c, std::ostream& os) {
  validate(c);
  const FrequencyGrid grid(c.grid_size);
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  os << "config: " << c.name << " (N=" << c.grid_size << ", trials=" << c.trials << ", seed=" << c.master_seed
     << ")\n";
  for (const auto& row : c.rows) {
    os << "row " << row.label << ": n1=" << row.n1 << " n2=" << row.n2 << " m=" << row.m << "\n";
    Rng rng = stream(trial_seed(c.master_seed, 0), c.truth.kind == TruthConfig::Kind::random_spikes ? Stream::theta
                                                                                                     : Stream::poles);
    const PoleSequence poles = row.poles.realize(row.n2, rng);
    const std::size_t s1 = std::min(c.truth.s1, row.n1);
    const std::size_t s2 = std::min(c.truth.s2, row.n2);
    double mu_tilde = 1.0;
    std::optional<ImpulseTable> table;
    if (row.n2 > 0) {
      table = impulse_table_auto(poles, row.n2);
      if (table->truncation() + 1 < row.n1) table = impulse_table(poles, row.n2, row.n1);
      const CoherenceTilde ct = mutual_coherence_tilde(*table, std::numeric_limits<double>::infinity());
      mu_tilde = ct.value;
      os << "  mu_tilde: " << num(ct.value) << " (d=" << ct.argmax_d << ", l=" << ct.argmax_l
         << ", truncation=" << ct.truncation << ", tail=" << num(ct.max_tail_bound) << ")\n";
    } else {
      os << "  mu_tilde: n/a (no TM block)\n";
    }
    const CompositeMatrix a = build_composite(grid, row.n1, row.n2, poles);
    if (row.n1 > 0 && row.n2 > 0) {
      os << "  matrix_coherence: " << num(matrix_coherence(a)) << "\n";
    } else {
      os << "  matrix_coherence: n/a (single block)\n";
    }
    std::vector<double> alpha(s1, 1.0), beta(s2, 1.0);
    const UniquenessVerdict u = uniqueness_check(sparsity_report(alpha, 0.0), sparsity_report(beta, 0.0), mu_tilde);
    os << "  uniqueness (s1=" << s1 << ", s2=" << s2 << ", eps=0): " << (u.unique ? "true" : "false")
       << " lhs=" << num(u.lhs) << " bound=" << num(u.bound) << " margin=" << num(u.margin) << "\n";
    if (s1 + s2 > 0) {
      std::vector<std::size_t> t1, t2;
      for (std::size_t k = 1; k <= s1; ++k) t1.push_back(k);
      for (std::size_t l = 1; l <= s2; ++l) t2.push_back(l);
      const MeasurementBound mb = measurement_bound(t1, t2, c.delta, c.bound_constant, a, mu_tilde);
      if (mb.valid) {
        os << "  bound: " << mb.measurements << " (value=" << num(mb.value) << ", bracket=" << num(mb.bracket)
           << ", C=" << num(c.bound_constant) << ", delta=" << num(c.delta) << ", m=" << row.m << ")\n";
      } else {
        os << "  bound: undefined (bracket=" << num(mb.bracket) << ")\n";
      }
    } else {
      os << "  bound: undefined (empty support)\n";
    }
    const GramDiagnostics g = gram_diagnostics(a, table ? *table : ImpulseTable{});
    os << "  gram: fir=" << num(g.fir_block) << " tm=" << num(g.tm_block) << " cross=" << num(g.cross_block) << "\n";
  }
}

}  // namespace sparsid
