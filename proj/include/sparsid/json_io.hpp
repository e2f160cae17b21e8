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

// Minimal deterministic JSON emission (doubles as %.17g) plus L1Problem /
// SolverResult fixtures. Parsing goes through nlohmann::json.

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "sparsid/errors.hpp"
#include "sparsid/l1_solver.hpp"

namespace sparsid {

/// %.17g, or null for non-finite values.
inline std::string json_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (const char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(static_cast<unsigned char>(ch)));
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  return out + "\"";
}

template <typename Range, typename Fmt>
std::string json_array(const Range& r, Fmt fmt) {
  std::string out = "[";
  bool first = true;
  for (const auto& v : r) {
    if (!first) out += ',';
    first = false;
    out += fmt(v);
  }
  return out + "]";
}

inline std::string json_doubles(std::span<const double> v) { return json_array(v, json_number); }

inline std::string json_vector(const Eigen::VectorXd& v) {
  return json_doubles(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

/// Reads a number field that may have been written as null (non-finite).
inline double json_to_double(const nlohmann::json& j) {
  if (j.is_null()) return std::nan("");
  return j.get<double>();
}

inline Eigen::VectorXd json_to_vector(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = json_to_double(j[i]);
  return v;
}

// ---------------------------------------------------------------------------
// Solver fixtures: the matrix is stored as nested row arrays.

inline std::string to_json(const L1Problem& p) {
  std::string rows = "[";
  for (Eigen::Index r = 0; r < p.matrix.rows(); ++r) {
    if (r > 0) rows += ',';
    const Eigen::VectorXd row = p.matrix.row(r).transpose();
    rows += json_vector(row);
  }
  rows += "]";
  return "{\"matrix\":" + rows + ",\"rhs\":" + json_vector(p.rhs) +
         ",\"noise_radius\":" + json_number(p.noise_radius) +
         ",\"tolerances\":{\"feasibility_tol\":" + json_number(p.tolerances.feasibility_tol) +
         ",\"optimality_tol\":" + json_number(p.tolerances.optimality_tol) +
         ",\"max_iterations\":" + std::to_string(p.tolerances.max_iterations) + "}}";
}

inline L1Problem l1_problem_from_json(const nlohmann::json& j) {
  try {
    L1Problem p;
    const auto& m = j.at("matrix");
    const auto rows = static_cast<Eigen::Index>(m.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(m[0].size()) : 0;
    p.matrix.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (static_cast<Eigen::Index>(m[static_cast<std::size_t>(r)].size()) != cols) {
        throw ConfigError("matrix rows differ in length");
      }
      p.matrix.row(r) = json_to_vector(m[static_cast<std::size_t>(r)]).transpose();
    }
    p.rhs = json_to_vector(j.at("rhs"));
    p.noise_radius = j.value("noise_radius", 0.0);
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      p.tolerances.feasibility_tol = t.value("feasibility_tol", p.tolerances.feasibility_tol);
      p.tolerances.optimality_tol = t.value("optimality_tol", p.tolerances.optimality_tol);
      p.tolerances.max_iterations = t.value("max_iterations", p.tolerances.max_iterations);
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed l1 problem: ") + e.what());
  }
}

inline std::string to_json(const SolverResult& r) {
  return "{\"solution\":" + json_vector(r.solution) + ",\"l1_value\":" + json_number(r.l1_value) +
         ",\"residual_norm\":" + json_number(r.residual_norm) + ",\"iterations\":" + std::to_string(r.iterations) +
         ",\"status\":" + json_string(to_string(r.status)) + ",\"dual_bound\":" + json_number(r.dual_bound) +
         ",\"polished\":" + (r.polished ? "true" : "false") + "}";
}

inline SolverResult solver_result_from_json(const nlohmann::json& j) {
  try {
    SolverResult r;
    r.solution = json_to_vector(j.at("solution"));
    r.l1_value = json_to_double(j.at("l1_value"));
    r.residual_norm = json_to_double(j.at("residual_norm"));
    r.iterations = j.at("iterations").get<std::size_t>();
    r.status = solver_status_from_string(j.at("status").get<std::string>());
    r.dual_bound = j.contains("dual_bound") ? json_to_double(j.at("dual_bound")) : r.dual_bound;
    r.polished = j.value("polished", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed solver result: ") + e.what());
  }
}

}  // namespace sparsid
