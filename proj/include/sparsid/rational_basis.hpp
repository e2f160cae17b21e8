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

// FIR and Takenaka-Malmquist (TM) basis functions on the unit circle, TM
// impulse responses, the FIR/TM mutual coherence and epsilon-sparsity tools.
//
// Index conventions follow the function families: FIR functions are
// phi_k(z) = z^-(k-1) for k = 1, 2, ... and TM functions psi_l for
// l = 1, 2, ...; impulse-response lags d start at 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <complex>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsid/errors.hpp"

namespace sparsid {

using Complex = std::complex<double>;

/// Ordered sequence of real TM poles xi_1, xi_2, ... strictly inside the unit
/// disk. Repeats are allowed.
class PoleSequence {
 public:
  PoleSequence() = default;

  explicit PoleSequence(std::vector<double> poles) : poles_(std::move(poles)) {
    for (std::size_t i = 0; i < poles_.size(); ++i) {
      const double p = poles_[i];
      if (!std::isfinite(p) || !(std::abs(p) < 1.0)) {
        throw std::invalid_argument("pole " + std::to_string(i + 1) +
                                    " is not strictly inside the unit disk");
      }
    }
  }

  /// Complex input is accepted only when every imaginary part is exactly zero.
  static PoleSequence from_complex(std::span<const Complex> poles) {
    std::vector<double> re;
    re.reserve(poles.size());
    for (std::size_t i = 0; i < poles.size(); ++i) {
      if (poles[i].imag() != 0.0) {
        throw std::invalid_argument("complex pole " + std::to_string(i + 1) +
                                    " rejected: only real TM poles are supported");
      }
      re.push_back(poles[i].real());
    }
    return PoleSequence(std::move(re));
  }

  static PoleSequence zeros(std::size_t n) { return PoleSequence(std::vector<double>(n, 0.0)); }

  std::size_t size() const noexcept { return poles_.size(); }
  bool empty() const noexcept { return poles_.empty(); }

  /// Zero-based element access; pole xi_l is `(*this)[l - 1]`.
  double operator[](std::size_t i) const { return poles_[i]; }
  const std::vector<double>& values() const noexcept { return poles_; }

  /// max |xi_l| over the first n poles.
  double max_abs(std::size_t n) const {
    double m = 0.0;
    for (std::size_t i = 0; i < std::min(n, poles_.size()); ++i) m = std::max(m, std::abs(poles_[i]));
    return m;
  }
  double max_abs() const { return max_abs(poles_.size()); }

  friend bool operator==(const PoleSequence&, const PoleSequence&) = default;

 private:
  std::vector<double> poles_;
};

namespace detail {

inline void check_tm_index(const PoleSequence& poles, std::size_t l) {
  if (l < 1 || l > poles.size()) {
    throw std::out_of_range("TM index " + std::to_string(l) + " outside 1.." +
                            std::to_string(poles.size()));
  }
}

inline void check_not_pole(double pole, Complex z) {
  if (std::abs(z - pole) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z))) {
    throw SingularityError("evaluation point coincides with TM pole " + std::to_string(pole));
  }
}

// z^-n by binary powering of 1/z.
inline Complex inverse_power(Complex z, std::size_t n) {
  Complex base = 1.0 / z;
  Complex result(1.0, 0.0);
  while (n != 0) {
    if (n & 1U) result *= base;
    base *= base;
    n >>= 1U;
  }
  return result;
}

}  // namespace detail

/// phi_k(z) = z^-(k-1).
inline Complex fir_eval(std::size_t k, Complex z) {
  if (k < 1) throw std::out_of_range("FIR index starts at 1");
  if (z == Complex(0.0, 0.0)) throw SingularityError("FIR basis is singular at z = 0");
  return detail::inverse_power(z, k - 1);
}

/// psi_l(z) = sqrt(1 - xi_l^2) / (z - xi_l) * prod_{j<l} (1 - xi_j z) / (z - xi_j).
inline Complex tm_eval(const PoleSequence& poles, std::size_t l, Complex z) {
  detail::check_tm_index(poles, l);
  Complex blaschke(1.0, 0.0);
  for (std::size_t j = 0; j + 1 < l; ++j) {
    const double xi = poles[j];
    detail::check_not_pole(xi, z);
    blaschke *= (1.0 - xi * z) / (z - xi);
  }
  const double xi = poles[l - 1];
  detail::check_not_pole(xi, z);
  return std::sqrt(1.0 - xi * xi) / (z - xi) * blaschke;
}

/// psi_1(z) ... psi_n(z) in one pass over the all-pass product.
inline std::vector<Complex> tm_eval_all(const PoleSequence& poles, std::size_t n, Complex z) {
  if (n > poles.size()) throw std::out_of_range("requested more TM functions than poles");
  std::vector<Complex> out(n);
  Complex blaschke(1.0, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    const double xi = poles[l];
    detail::check_not_pole(xi, z);
    const Complex inv = 1.0 / (z - xi);
    out[l] = std::sqrt(1.0 - xi * xi) * inv * blaschke;
    blaschke *= (1.0 - xi * z) * inv;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Impulse responses psi_l(z) = sum_d a_dl z^-d

/// One TM impulse-response column a_0l ... a_Dl with an estimate of the
/// discarded tail sum_{d > D} |a_dl|.
struct ImpulseColumn {
  Eigen::VectorXd a;
  double tail_bound = 0.0;
};

/// Impulse responses of psi_1 ... psi_n2, row d = 0..D, column l - 1.
struct ImpulseTable {
  Eigen::MatrixXd a;
  Eigen::VectorXd tail_bound;

  std::size_t truncation() const { return a.rows() == 0 ? 0 : static_cast<std::size_t>(a.rows() - 1); }
  std::size_t columns() const { return static_cast<std::size_t>(a.cols()); }
  double max_tail_bound() const { return tail_bound.size() == 0 ? 0.0 : tail_bound.maxCoeff(); }
};

/// Closed-form residue expansion, valid for pairwise distinct poles
/// xi_1..xi_l. Accumulated in extended precision because the partial-fraction
/// weights grow like the inverse pole separations.
inline Eigen::VectorXd impulse_response_closed_form(const PoleSequence& poles, std::size_t l,
                                                    std::size_t depth) {
  detail::check_tm_index(poles, l);
  if (depth < 1) throw std::invalid_argument("truncation depth must be at least 1");
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = i + 1; j < l; ++j) {
      if (std::abs(poles[i] - poles[j]) < 1e-8) {
        throw std::invalid_argument(
            "closed-form impulse response needs distinct poles; poles " + std::to_string(i + 1) +
            " and " + std::to_string(j + 1) + " are (nearly) equal, use impulse_response_filter");
      }
    }
  }
  using Ld = long double;
  std::vector<Ld> weight(l);
  for (std::size_t jp = 0; jp < l; ++jp) {
    const Ld x = poles[jp];
    Ld num = 1.0L;
    for (std::size_t j = 0; j + 1 < l; ++j) num *= 1.0L - static_cast<Ld>(poles[j]) * x;
    Ld den = 1.0L;
    for (std::size_t j = 0; j < l; ++j) {
      if (j != jp) den *= x - static_cast<Ld>(poles[j]);
    }
    weight[jp] = num / den;
  }
  const Ld scale = std::sqrt(1.0L - static_cast<Ld>(poles[l - 1]) * poles[l - 1]);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(depth + 1));
  std::vector<Ld> power(l, 1.0L);  // xi_j'^(d-1), starting at d = 1
  for (std::size_t d = 1; d <= depth; ++d) {
    Ld sum = 0.0L;
    for (std::size_t jp = 0; jp < l; ++jp) {
      sum += power[jp] * weight[jp];
      power[jp] *= poles[jp];
    }
    a(static_cast<Eigen::Index>(d)) = static_cast<double>(scale * sum);
  }
  return a;
}

namespace detail {

// y[n] = xi y[n-1] + x[n-1]          (1 / (z - xi))
inline void first_order_section(double xi, const std::vector<double>& in, std::vector<double>& out) {
  double prev_y = 0.0, prev_x = 0.0;
  for (std::size_t n = 0; n < in.size(); ++n) {
    out[n] = xi * prev_y + prev_x;
    prev_y = out[n];
    prev_x = in[n];
  }
}

// y[n] = xi y[n-1] + x[n-1] - xi x[n]   ((1 - xi z) / (z - xi))
inline void allpass_section(double xi, std::vector<double>& io) {
  double prev_y = 0.0, prev_x = 0.0;
  for (double& v : io) {
    const double x = v;
    const double y = xi * prev_y + prev_x - xi * x;
    v = y;
    prev_y = y;
    prev_x = x;
  }
}

// Extra samples computed past the truncation to estimate the tail.
inline constexpr std::size_t kTailWindow = 64;

inline double tail_estimate(const std::vector<double>& h, std::size_t depth, double decay) {
  double window = 0.0;
  for (std::size_t d = depth + 1; d < h.size(); ++d) window += std::abs(h[d]);
  const double last = std::abs(h.back());
  if (last == 0.0) return window;
  // Observed per-sample decay over the window; dominates decay when poles repeat.
  const double first = std::abs(h[depth + 1]);
  double q = decay;
  if (first > 0.0) {
    q = std::max(q, std::pow(last / first, 1.0 / static_cast<double>(kTailWindow - 1)));
  }
  if (q >= 1.0) return std::numeric_limits<double>::infinity();
  return window + last * q / (1.0 - q);
}

}  // namespace detail

/// Impulse responses of psi_1..psi_n2 by cascading first-order and all-pass
/// recursions on a unit impulse. Works for repeated poles.
inline ImpulseTable impulse_table(const PoleSequence& poles, std::size_t n2, std::size_t depth) {
  if (depth < 1) throw std::invalid_argument("truncation depth must be at least 1");
  if (n2 > poles.size()) throw std::out_of_range("requested more TM functions than poles");
  const std::size_t len = depth + 1 + detail::kTailWindow;
  ImpulseTable table;
  table.a.resize(static_cast<Eigen::Index>(depth + 1), static_cast<Eigen::Index>(n2));
  table.tail_bound.resize(static_cast<Eigen::Index>(n2));

  std::vector<double> chain(len, 0.0);  // prod_{j<l} all-pass applied to a unit impulse
  chain[0] = 1.0;
  std::vector<double> column(len);
  for (std::size_t l = 0; l < n2; ++l) {
    const double xi = poles[l];
    detail::first_order_section(xi, chain, column);
    const double s = std::sqrt(1.0 - xi * xi);
    for (double& v : column) v *= s;
    for (std::size_t d = 0; d <= depth; ++d) {
      table.a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(l)) = column[d];
    }
    table.tail_bound(static_cast<Eigen::Index>(l)) =
        detail::tail_estimate(column, depth, poles.max_abs(l + 1));
    detail::allpass_section(xi, chain);
  }
  return table;
}

/// Single column of `impulse_table`.
inline ImpulseColumn impulse_response_filter(const PoleSequence& poles, std::size_t l,
                                             std::size_t depth) {
  detail::check_tm_index(poles, l);
  ImpulseTable t = impulse_table(poles, l, depth);
  return {t.a.col(static_cast<Eigen::Index>(l - 1)), t.tail_bound(static_cast<Eigen::Index>(l - 1))};
}

inline constexpr double kDefaultTailTolerance = 1e-12;
inline constexpr std::size_t kMaxTruncation = 10000;

/// ceil(log(tol) / log(max|xi|)) plus n2 lags for the delays stacked by the
/// cascade, capped at kMaxTruncation.
inline std::size_t default_truncation(const PoleSequence& poles, std::size_t n2,
                                      double tail_tol = kDefaultTailTolerance) {
  const double rho = poles.max_abs(n2);
  double base = 0.0;
  if (rho > 0.0) base = std::ceil(std::log(tail_tol) / std::log(rho));
  const double d = std::min(static_cast<double>(kMaxTruncation), base + static_cast<double>(n2));
  return std::max<std::size_t>(1, static_cast<std::size_t>(d));
}

/// Impulse table whose depth starts at `default_truncation` and doubles until
/// every column's tail estimate is below `tail_tol` or the cap is reached.
inline ImpulseTable impulse_table_auto(const PoleSequence& poles, std::size_t n2,
                                       double tail_tol = kDefaultTailTolerance) {
  std::size_t depth = default_truncation(poles, n2, tail_tol);
  ImpulseTable t = impulse_table(poles, n2, depth);
  while (t.max_tail_bound() > tail_tol && depth < kMaxTruncation) {
    depth = std::min(kMaxTruncation, 2 * depth);
    t = impulse_table(poles, n2, depth);
  }
  return t;
}

/// Writes `d,l,a_dl` rows.
inline void write_impulse_csv(std::ostream& os, const ImpulseTable& t) {
  os << "d,l,a_dl\n";
  char buf[64];
  for (Eigen::Index l = 0; l < t.a.cols(); ++l) {
    for (Eigen::Index d = 0; d < t.a.rows(); ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", t.a(d, l));
      os << d << ',' << (l + 1) << ',' << buf << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Coherence and sparsity

struct CoherenceTilde {
  double value = 0.0;          // max |a_dl| over the computed table
  double max_tail_bound = 0.0; // worst per-column tail estimate
  double accuracy = 0.0;       // max(0, tail - value): how far the true sup may exceed value
  std::size_t argmax_d = 0;
  std::size_t argmax_l = 0;    // 1-based
  std::size_t truncation = 0;
};

/// mu~ = sup_{d,l} |a_dl| over psi_1..psi_n2. An entry beyond the truncation
/// is bounded by its column tail sum, so the maximum is exact once the tails
/// fall below it.
inline CoherenceTilde mutual_coherence_tilde(const ImpulseTable& table, double accuracy = 1e-9) {
  if (table.columns() == 0) throw std::invalid_argument("mutual coherence needs at least one TM column");
  CoherenceTilde out;
  Eigen::Index d = 0, l = 0;
  out.value = table.a.cwiseAbs().maxCoeff(&d, &l);
  out.argmax_d = static_cast<std::size_t>(d);
  out.argmax_l = static_cast<std::size_t>(l) + 1;
  out.max_tail_bound = table.max_tail_bound();
  out.accuracy = std::max(0.0, out.max_tail_bound - out.value);
  out.truncation = table.truncation();
  if (out.accuracy > accuracy) {
    throw std::runtime_error("impulse table truncated too short for requested coherence accuracy (tail " +
                             std::to_string(out.max_tail_bound) + ")");
  }
  return out;
}

inline CoherenceTilde mutual_coherence_tilde(const PoleSequence& poles, std::size_t n2,
                                             std::size_t depth, double accuracy = 1e-9) {
  return mutual_coherence_tilde(impulse_table(poles, n2, depth), accuracy);
}

inline CoherenceTilde mutual_coherence_tilde(const PoleSequence& poles, std::size_t n2) {
  return mutual_coherence_tilde(impulse_table_auto(poles, n2));
}

/// epsilon-support summary of a finite coefficient sequence.
struct SparsityReport {
  double epsilon = 0.0;
  std::size_t n_eps = 1;              // smallest 1-based K with sum_{k>=K} |c_k| <= epsilon
  std::vector<std::size_t> support;   // 1-based indices k < n_eps with c_k != 0
  std::size_t eps_zero_norm = 0;
  double tail_sum = 0.0;              // sum_{k>=n_eps} |c_k|
};

/// Tail sums are compared with a rounding allowance of (terms * machine
/// epsilon) relative to the tail, so decimal inputs such as 0.2 + 0.1 against
/// 0.3 resolve as in exact arithmetic.
inline SparsityReport sparsity_report(std::span<const double> coeffs, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be nonnegative");
  const std::size_t n = coeffs.size();
  constexpr double u = std::numeric_limits<double>::epsilon();
  // tails[k] = sum_{i >= k} |c_i| (0-based), tails[n] = 0
  std::vector<double> tails(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) tails[i] = tails[i + 1] + std::abs(coeffs[i]);

  std::size_t k0 = n;  // 0-based start of the accepted tail
  for (std::size_t k = 0; k <= n; ++k) {
    const double allowance = static_cast<double>(n - k + 1) * u * tails[k];
    if (tails[k] <= epsilon + allowance) {
      k0 = k;
      break;
    }
  }
  SparsityReport r;
  r.epsilon = epsilon;
  r.n_eps = k0 + 1;
  r.tail_sum = tails[k0];
  for (std::size_t k = 0; k < k0; ++k) {
    if (coeffs[k] != 0.0) r.support.push_back(k + 1);
  }
  r.eps_zero_norm = r.support.size();
  return r;
}

struct UniquenessVerdict {
  bool unique = false;
  double lhs = 0.0;    // (sqrt|a|_0e + e)^2 + (sqrt|b|_0e + e)^2
  double bound = 0.0;  // 1 / mu~
  double margin = 0.0; // bound - lhs
};

/// Sufficient condition for uniqueness of an (epsilon, s1 + s2)-sparse
/// FIR/TM representation.
inline UniquenessVerdict uniqueness_check(const SparsityReport& alpha, const SparsityReport& beta,
                                          double mu_tilde) {
  if (!(mu_tilde > 0.0)) throw std::invalid_argument("mu_tilde must be positive");
  if (alpha.epsilon != beta.epsilon) {
    throw std::invalid_argument("sparsity reports were computed with different epsilon");
  }
  const double e = alpha.epsilon;
  const double ta = std::sqrt(static_cast<double>(alpha.eps_zero_norm)) + e;
  const double tb = std::sqrt(static_cast<double>(beta.eps_zero_norm)) + e;
  UniquenessVerdict v;
  v.lhs = ta * ta + tb * tb;
  v.bound = 1.0 / mu_tilde;
  v.margin = v.bound - v.lhs;
  v.unique = v.lhs < v.bound;
  return v;
}

}  // namespace sparsid
