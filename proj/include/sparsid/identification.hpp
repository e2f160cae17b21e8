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

// Sparse identification pipeline: ground-truth systems, frequency-domain
// measurements on sampled grid points, l1 recovery over the concatenated
// FIR + TM dictionary, and recovery metrics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsid/clustering.hpp"
#include "sparsid/l1_solver.hpp"
#include "sparsid/random.hpp"
#include "sparsid/rational_basis.hpp"
#include "sparsid/sensing.hpp"

namespace sparsid {

/// theta = [alpha; beta] with the FIR/TM split recorded.
struct CoefficientVector {
  Eigen::VectorXd values;
  std::size_t n1 = 0;
  std::size_t n2 = 0;

  CoefficientVector() = default;
  CoefficientVector(Eigen::VectorXd v, std::size_t fir, std::size_t tm) : values(std::move(v)), n1(fir), n2(tm) {
    if (static_cast<std::size_t>(values.size()) != n1 + n2) {
      throw std::invalid_argument("coefficient vector length does not match n1 + n2");
    }
  }
  static CoefficientVector zeros(std::size_t fir, std::size_t tm) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fir + tm)), fir, tm};
  }

  auto alpha() const { return values.head(static_cast<Eigen::Index>(n1)); }
  auto beta() const { return values.tail(static_cast<Eigen::Index>(n2)); }
  std::size_t size() const { return n1 + n2; }
};

// ---------------------------------------------------------------------------
// True systems

/// gain * prod (z - zeros) / prod (z - poles), real zeros and poles.
struct ZpkTerm {
  double gain = 1.0;
  std::vector<double> zeros;
  std::vector<double> poles;

  Complex evaluate(Complex z) const {
    Complex num(gain, 0.0), den(1.0, 0.0);
    for (double q : zeros) num *= z - q;
    for (double p : poles) den *= z - p;
    return num / den;
  }
};

/// Stable, proper real-rational transfer function as a sum of ZPK terms.
class RationalSystem {
 public:
  RationalSystem() = default;
  explicit RationalSystem(std::vector<ZpkTerm> terms) : terms_(std::move(terms)) {
    for (const auto& t : terms_) {
      if (t.zeros.size() > t.poles.size()) throw std::invalid_argument("improper ZPK term");
      for (double p : t.poles) {
        if (!(std::abs(p) < 1.0)) throw std::invalid_argument("unstable pole in true system");
      }
    }
  }
  Complex evaluate(Complex z) const {
    Complex h(0.0, 0.0);
    for (const auto& t : terms_) h += t.evaluate(z);
    return h;
  }
  const std::vector<ZpkTerm>& terms() const noexcept { return terms_; }

 private:
  std::vector<ZpkTerm> terms_;
};

enum class AmplitudeMode { plus_one, random_sign };

/// How the TM pole sequence of length n2 is formed.
struct PoleSpec {
  enum class Kind { uniform, fixed, random_prefix };
  Kind kind = Kind::fixed;
  std::vector<double> leading;  // fixed: leading poles, remainder zero
  std::size_t random_count = 0; // random_prefix: number of leading random poles
  double low = 0.0;
  double high = 1.0;

  /// Every pole i.i.d. uniform on (low, high).
  static PoleSpec uniform(double lo = 0.0, double hi = 1.0) {
    PoleSpec s;
    s.kind = Kind::uniform;
    s.low = lo;
    s.high = hi;
    return s;
  }
  /// The given poles first, zeros after.
  static PoleSpec fixed(std::vector<double> leading) {
    PoleSpec s;
    s.leading = std::move(leading);
    return s;
  }
  /// `multiplicity` copies of `xi`, zeros after.
  static PoleSpec repeated(double xi, std::size_t multiplicity) {
    return fixed(std::vector<double>(multiplicity, xi));
  }
  /// `count` uniform poles on (lo, hi), zeros after.
  static PoleSpec random_prefix(std::size_t count, double lo = 0.0, double hi = 1.0) {
    PoleSpec s;
    s.kind = Kind::random_prefix;
    s.random_count = count;
    s.low = lo;
    s.high = hi;
    return s;
  }

  PoleSequence realize(std::size_t n2, Rng& rng) const {
    std::vector<double> p(n2, 0.0);
    switch (kind) {
      case Kind::uniform:
        for (auto& v : p) v = uniform_open(rng, low, high);
        break;
      case Kind::fixed:
        if (leading.size() > n2 && n2 > 0) throw std::invalid_argument("more fixed poles than TM functions");
        std::copy_n(leading.begin(), std::min(leading.size(), n2), p.begin());
        break;
      case Kind::random_prefix:
        for (std::size_t i = 0; i < std::min(random_count, n2); ++i) p[i] = uniform_open(rng, low, high);
        break;
    }
    return PoleSequence(std::move(p));
  }
};

/// Evaluates sum_k c_k phi_k(z) + sum_l c_{n1+l} psi_l(z).
inline Complex evaluate_expansion(const CoefficientVector& c, const PoleSequence& poles, Complex z) {
  Complex h(0.0, 0.0);
  const auto a = c.alpha();
  Complex zinv_k(1.0, 0.0);
  const Complex zinv = 1.0 / z;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    h += a(k) * zinv_k;
    zinv_k *= zinv;
  }
  if (c.n2 > 0) {
    const auto psi = tm_eval_all(poles, c.n2, z);
    const auto b = c.beta();
    for (std::size_t l = 0; l < c.n2; ++l) h += b(static_cast<Eigen::Index>(l)) * psi[l];
  }
  return h;
}

/// The system to be identified together with the dictionary it is sampled
/// against. `theta` is present when the system is an exact expansion in
/// that dictionary (randomly generated spikes); `system` otherwise.
struct GroundTruth {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  PoleSequence poles;
  std::optional<CoefficientVector> theta;
  std::optional<RationalSystem> system;
  std::size_t s1 = 0;
  std::size_t s2 = 0;
  AmplitudeMode amplitude_mode = AmplitudeMode::plus_one;
  bool degenerate = false;  // all-zero theta
};

/// Random (s1 + s2)-spike coefficient vector. Supports are uniform without
/// replacement within each block; poles are drawn before supports.
inline GroundTruth generate_ground_truth(std::size_t n1, std::size_t n2, std::size_t s1, std::size_t s2,
                                         const PoleSpec& pole_spec, AmplitudeMode mode, Rng& rng) {
  if (s1 > n1 || s2 > n2) throw std::invalid_argument("sparsity exceeds block size");
  GroundTruth t;
  t.n1 = n1;
  t.n2 = n2;
  t.s1 = s1;
  t.s2 = s2;
  t.amplitude_mode = mode;
  t.poles = pole_spec.realize(n2, rng);
  CoefficientVector theta = CoefficientVector::zeros(n1, n2);
  auto place = [&](std::size_t offset, std::size_t block, std::size_t count) {
    for (std::size_t pos : sample_without_replacement(rng, block, count)) {
      double amp = 1.0;
      if (mode == AmplitudeMode::random_sign && (rng() >> 63U) != 0) amp = -1.0;
      theta.values(static_cast<Eigen::Index>(offset + pos)) = amp;
    }
  };
  place(0, n1, s1);
  place(n1, n2, s2);
  t.degenerate = s1 + s2 == 0;
  t.theta = std::move(theta);
  return t;
}

/// Ground truth given by a rational transfer function.
inline GroundTruth ground_truth_from_system(RationalSystem system, std::size_t n1, std::size_t n2,
                                            PoleSequence poles, std::size_t s1 = 0, std::size_t s2 = 0) {
  if (n2 > poles.size()) throw std::invalid_argument("n2 exceeds the supplied poles");
  GroundTruth t;
  t.n1 = n1;
  t.n2 = n2;
  t.poles = std::move(poles);
  t.system = std::move(system);
  t.s1 = s1;
  t.s2 = s2;
  return t;
}

inline Complex evaluate_truth(const GroundTruth& truth, Complex z) {
  if (truth.system) return truth.system->evaluate(z);
  if (truth.theta) return evaluate_expansion(*truth.theta, truth.poles, z);
  throw std::invalid_argument("ground truth has neither coefficients nor a system");
}

/// H(z_r) for r in omega.
inline Eigen::VectorXcd measure(const GroundTruth& truth, const FrequencyGrid& grid, const SampleSet& omega) {
  const auto& idx = omega.indices();
  Eigen::VectorXcd h(static_cast<Eigen::Index>(idx.size()));
  if (truth.theta && !truth.system) {
    const Eigen::MatrixXcd rows = composite_rows(grid, idx, truth.n1, truth.n2, truth.poles);
    h = rows * truth.theta->values.cast<Complex>();
    return h;
  }
  for (std::size_t i = 0; i < idx.size(); ++i) h(static_cast<Eigen::Index>(i)) = evaluate_truth(truth, grid.point(idx[i]));
  return h;
}

/// Adds complex Gaussian noise rescaled to |eta|_2 = noise_norm exactly.
inline Eigen::VectorXcd add_measurement_noise(const Eigen::VectorXcd& h, double noise_norm, Rng& rng) {
  if (!(noise_norm >= 0.0)) throw std::invalid_argument("noise norm must be nonnegative");
  if (noise_norm == 0.0 || h.size() == 0) return h;
  Eigen::VectorXcd eta(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    eta(i) = Complex(re, im);
  }
  eta *= noise_norm / eta.norm();
  return h + eta;
}

struct Identification {
  CoefficientVector theta_hat;
  SolverResult solver;
};

/// Assembles the sampled dictionary, splits real and imaginary parts and
/// solves basis pursuit (noise_radius = 0) or BPDN.
inline Identification identify(const Eigen::VectorXcd& measurements, const SampleSet& omega,
                               const FrequencyGrid& grid, std::size_t n1, std::size_t n2,
                               const PoleSequence& poles, double noise_radius = 0.0,
                               const SolverTolerances& tolerances = {}) {
  if (omega.size() == 0) throw std::invalid_argument("identify needs at least one measurement");
  if (static_cast<std::size_t>(measurements.size()) != omega.size()) {
    throw std::invalid_argument("measurement count does not match the sample set");
  }
  if (n1 + n2 == 0) throw std::invalid_argument("empty dictionary");
  const Eigen::MatrixXcd rows = composite_rows(grid, omega.indices(), n1, n2, poles);
  RealSplitSystem split = real_split(rows, measurements);
  L1Problem problem{std::move(split.matrix), std::move(split.rhs), noise_radius, tolerances};
  Identification out;
  out.solver = solve_l1(problem);
  out.theta_hat = CoefficientVector(out.solver.solution, n1, n2);
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

inline constexpr std::size_t kDefaultQuadrature = 16384;

/// |theta_hat - theta|_2 / |theta|_2.
inline double relative_coefficient_error(const CoefficientVector& theta_hat, const CoefficientVector& theta) {
  if (theta_hat.n1 != theta.n1 || theta_hat.n2 != theta.n2) throw std::invalid_argument("coefficient split mismatch");
  const double denom = theta.values.norm();
  if (denom == 0.0) throw std::invalid_argument("relative error of a zero reference vector");
  return (theta_hat.values - theta.values).norm() / denom;
}

namespace detail {

// Values of the expansion on the full quadrature grid.
inline Eigen::VectorXcd expansion_on_grid(const CoefficientVector& c, const PoleSequence& poles,
                                          const FrequencyGrid& grid) {
  const std::size_t nq = grid.size();
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(nq));
  const auto a = c.alpha();
  for (std::size_t r = 0; r < nq; ++r) {
    Complex acc(0.0, 0.0);
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (a(k) != 0.0) acc += a(k) * grid.power(-static_cast<std::int64_t>(r) * k);
    }
    h(static_cast<Eigen::Index>(r)) = acc;
  }
  if (c.n2 > 0) {
    const auto b = c.beta();
    for (std::size_t r = 0; r < nq; ++r) {
      const auto psi = tm_eval_all(poles, c.n2, grid.points()[r]);
      Complex acc(0.0, 0.0);
      for (std::size_t l = 0; l < c.n2; ++l) acc += b(static_cast<Eigen::Index>(l)) * psi[l];
      h(static_cast<Eigen::Index>(r)) += acc;
    }
  }
  return h;
}

inline double rms(const Eigen::VectorXcd& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(v.size())); }

}  // namespace detail

/// H2 norm of an expansion, sqrt(mean |H(z_r)|^2) on an N-point grid.
inline double h2_norm(const CoefficientVector& c, const PoleSequence& poles,
                      std::size_t quadrature_n = kDefaultQuadrature) {
  return detail::rms(detail::expansion_on_grid(c, poles, FrequencyGrid(quadrature_n)));
}

/// H2 distance between two expansions over the same dictionary.
inline double h2_error(const CoefficientVector& theta_hat, const CoefficientVector& theta, const PoleSequence& poles,
                       std::size_t quadrature_n = kDefaultQuadrature) {
  if (theta_hat.n1 != theta.n1 || theta_hat.n2 != theta.n2) throw std::invalid_argument("coefficient split mismatch");
  return h2_norm(CoefficientVector(theta_hat.values - theta.values, theta.n1, theta.n2), poles, quadrature_n);
}

/// H2 distance between an expansion and a rational system.
inline double h2_error(const CoefficientVector& theta_hat, const PoleSequence& poles, const RationalSystem& system,
                       std::size_t quadrature_n = kDefaultQuadrature) {
  const FrequencyGrid grid(quadrature_n);
  Eigen::VectorXcd d = detail::expansion_on_grid(theta_hat, poles, grid);
  for (std::size_t r = 0; r < quadrature_n; ++r) d(static_cast<Eigen::Index>(r)) -= system.evaluate(grid.points()[r]);
  return detail::rms(d);
}

inline double h2_error(const CoefficientVector& theta_hat, const GroundTruth& truth,
                       std::size_t quadrature_n = kDefaultQuadrature) {
  if (truth.system) return h2_error(theta_hat, truth.poles, *truth.system, quadrature_n);
  if (truth.theta) return h2_error(theta_hat, *truth.theta, truth.poles, quadrature_n);
  throw std::invalid_argument("ground truth has neither coefficients nor a system");
}

inline constexpr double kDefaultSignificance = 1e-4;

/// Denominator degree of the recovered rational function: the largest
/// significant FIR lag (k - 1) plus the largest significant TM index l.
inline std::size_t reconstruction_order(const CoefficientVector& theta_hat,
                                        double significance = kDefaultSignificance) {
  if (!(significance > 0.0)) throw std::invalid_argument("significance threshold must be positive");
  std::size_t fir = 0, tm = 0;
  const auto a = theta_hat.alpha();
  for (Eigen::Index k = a.size(); k-- > 0;) {
    if (std::abs(a(k)) > significance) {
      fir = static_cast<std::size_t>(k);  // lag k-1 for 1-based k = index + 1
      break;
    }
  }
  const auto b = theta_hat.beta();
  for (Eigen::Index l = b.size(); l-- > 0;) {
    if (std::abs(b(l)) > significance) {
      tm = static_cast<std::size_t>(l) + 1;
      break;
    }
  }
  return fir + tm;
}

struct RecoveryStats {
  std::vector<double> errors;
  double threshold = 0.0;
  double recover_rate = 0.0;
  double max_error = 0.0;
  double min_error = 0.0;
  double average_error = 0.0;
  std::size_t argmin = 0;  // position of the minimum error
};

/// Fraction of errors strictly below threshold, plus max/min/mean.
inline RecoveryStats recovery_stats(std::span<const double> errors, double threshold) {
  if (errors.empty()) throw std::invalid_argument("recovery statistics of an empty error list");
  RecoveryStats s;
  s.errors.assign(errors.begin(), errors.end());
  s.threshold = threshold;
  std::size_t below = 0;
  double sum = 0.0;
  s.max_error = -std::numeric_limits<double>::infinity();
  s.min_error = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double e = errors[i];
    if (e < threshold) ++below;
    sum += e;
    s.max_error = std::max(s.max_error, e);
    if (e < s.min_error) {
      s.min_error = e;
      s.argmin = i;
    }
  }
  s.recover_rate = static_cast<double>(below) / static_cast<double>(errors.size());
  s.average_error = sum / static_cast<double>(errors.size());
  return s;
}

/// k-means over recovered coefficient vectors (all with the same split).
inline ClusterResult cluster_coefficients(std::span<const CoefficientVector> theta_hats, std::size_t k, Rng& rng,
                                          const KMeansOptions& options = {}) {
  std::vector<Eigen::VectorXd> x;
  x.reserve(theta_hats.size());
  for (const auto& t : theta_hats) {
    if (t.n1 != theta_hats.front().n1 || t.n2 != theta_hats.front().n2) {
      throw std::invalid_argument("coefficient vectors differ in split");
    }
    x.push_back(t.values);
  }
  return kmeans(x, k, rng, options);
}

}  // namespace sparsid
