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

// k-means over small dense vectors: k-means++ seeding, Lloyd iterations,
// several restarts keeping the lowest within-cluster sum of squares.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsid/random.hpp"

namespace sparsid {

enum class RepresentativeRule { medoid, min_error };

struct ClusterResult {
  std::vector<std::size_t> labels;       // cluster of each input vector
  std::vector<std::size_t> sizes;        // members per cluster
  std::vector<Eigen::VectorXd> centroids;
  std::vector<std::size_t> medoids;      // input index per nonempty cluster
  double sse = 0.0;                      // within-cluster sum of squares
  std::size_t iterations = 0;

  /// Largest cluster; ties go to the lower cluster index.
  std::size_t plurality() const {
    return static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  }
};

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
};

namespace detail {

inline double sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm(); }

inline std::vector<Eigen::VectorXd> kmeans_pp_seed(std::span<const Eigen::VectorXd> x, std::size_t k, Rng& rng) {
  std::vector<Eigen::VectorXd> c;
  c.push_back(x[uniform_index(rng, x.size())]);
  std::vector<double> d2(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d2[i] = sq_dist(x[i], c[0]);
  while (c.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double t = uniform01(rng) * total;
      pick = x.size() - 1;
      for (std::size_t i = 0; i < x.size(); ++i) {
        t -= d2[i];
        if (t < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, x.size());  // all points coincide with centres
    }
    c.push_back(x[pick]);
    for (std::size_t i = 0; i < x.size(); ++i) d2[i] = std::min(d2[i], sq_dist(x[i], c.back()));
  }
  return c;
}

inline ClusterResult lloyd(std::span<const Eigen::VectorXd> x, std::vector<Eigen::VectorXd> c,
                           std::size_t max_iterations) {
  const std::size_t k = c.size();
  ClusterResult r;
  r.labels.assign(x.size(), 0);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    r.iterations = it + 1;
    bool changed = it == 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = sq_dist(x[i], c[j]);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      if (best != r.labels[i]) changed = true;
      r.labels[i] = best;
    }
    std::vector<std::size_t> count(k, 0);
    std::vector<Eigen::VectorXd> next(k, Eigen::VectorXd::Zero(x[0].size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      next[r.labels[i]] += x[i];
      ++count[r.labels[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] > 0) {
        c[j] = next[j] / static_cast<double>(count[j]);
        continue;
      }
      // Empty cluster: move its centre to the point farthest from its own.
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = sq_dist(x[i], c[r.labels[i]]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      c[j] = x[far];
      changed = true;
    }
    if (!changed) break;
  }
  r.centroids = std::move(c);
  r.sizes.assign(k, 0);
  r.sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++r.sizes[r.labels[i]];
    r.sse += sq_dist(x[i], r.centroids[r.labels[i]]);
  }
  return r;
}

// Renumbers clusters by their lowest member index so equal partitions get
// equal labels.
inline void canonicalize(ClusterResult& r) {
  const std::size_t k = r.sizes.size();
  std::vector<std::size_t> map(k, k);
  std::size_t next = 0;
  for (std::size_t l : r.labels) {
    if (map[l] == k) map[l] = next++;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (map[j] == k) map[j] = next++;
  }
  std::vector<std::size_t> sizes(k);
  std::vector<Eigen::VectorXd> cents(k);
  for (std::size_t j = 0; j < k; ++j) {
    sizes[map[j]] = r.sizes[j];
    cents[map[j]] = r.centroids[j];
  }
  for (auto& l : r.labels) l = map[l];
  r.sizes = std::move(sizes);
  r.centroids = std::move(cents);
}

}  // namespace detail

/// Partitions the vectors into k clusters by Euclidean distance.
inline ClusterResult kmeans(std::span<const Eigen::VectorXd> x, std::size_t k, Rng& rng,
                            const KMeansOptions& options = {}) {
  if (k == 0) throw std::invalid_argument("k-means needs k >= 1");
  if (k > x.size()) throw std::invalid_argument("more clusters than vectors");
  for (const auto& v : x) {
    if (v.size() != x[0].size()) throw std::invalid_argument("vectors differ in dimension");
  }
  std::optional<ClusterResult> best;
  for (std::size_t rep = 0; rep < std::max<std::size_t>(options.restarts, 1); ++rep) {
    ClusterResult r = detail::lloyd(x, detail::kmeans_pp_seed(x, k, rng), options.max_iterations);
    if (!best || r.sse < best->sse) best = std::move(r);
  }
  detail::canonicalize(*best);

  // Medoid: the member with the least total distance to its cluster.
  best->medoids.assign(k, x.size());
  for (std::size_t j = 0; j < k; ++j) {
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (best->labels[i] != j) continue;
      double s = 0.0;
      for (std::size_t h = 0; h < x.size(); ++h) {
        if (best->labels[h] == j) s += std::sqrt(detail::sq_dist(x[i], x[h]));
      }
      if (s < bd) {
        bd = s;
        best->medoids[j] = i;
      }
    }
  }
  return *best;
}

/// Member of the most populated cluster chosen by `rule`. min_error needs
/// one error per input vector.
inline std::size_t cluster_representative(const ClusterResult& r, RepresentativeRule rule,
                                          std::span<const double> errors = {}) {
  const std::size_t top = r.plurality();
  if (rule == RepresentativeRule::medoid) return r.medoids[top];
  if (errors.size() != r.labels.size()) throw std::invalid_argument("min_error rule needs one error per vector");
  std::size_t pick = r.labels.size();
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    if (r.labels[i] == top && (pick == r.labels.size() || errors[i] < errors[pick])) pick = i;
  }
  return pick;
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  const std::size_t n = a.size();
  const std::size_t ka = a.empty() ? 0 : *std::max_element(a.begin(), a.end()) + 1;
  const std::size_t kb = b.empty() ? 0 : *std::max_element(b.begin(), b.end()) + 1;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ka), static_cast<Eigen::Index>(kb));
  for (std::size_t i = 0; i < n; ++i) table(static_cast<Eigen::Index>(a[i]), static_cast<Eigen::Index>(b[i])) += 1.0;
  auto c2 = [](double v) { return v * (v - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) index += c2(table(i, j));
  }
  for (Eigen::Index i = 0; i < table.rows(); ++i) sa += c2(table.row(i).sum());
  for (Eigen::Index j = 0; j < table.cols(); ++j) sb += c2(table.col(j).sum());
  const double expected = sa * sb / c2(static_cast<double>(n));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace sparsid
