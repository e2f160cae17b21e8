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

// Frequency grid on the unit circle, the composite FIR/TM sample matrix,
// admissible sampling sets on the open upper half circle, the real/imaginary
// split system and coherence diagnostics of the sampled dictionary.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsid/random.hpp"
#include "sparsid/rational_basis.hpp"

namespace sparsid {

/// Grid T_N = { z_r = exp(2 pi i (r-1) / N), r = 1..N }.
class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::size_t n) : points_(n) {
    if (n < 2) throw std::invalid_argument("frequency grid needs N >= 2");
    for (std::size_t j = 0; j < n; ++j) points_[j] = root(j, n);
  }

  std::size_t size() const noexcept { return points_.size(); }

  /// z_r for 1-based r.
  Complex point(std::size_t r) const {
    if (r < 1 || r > points_.size()) throw std::out_of_range("grid index " + std::to_string(r));
    return points_[r - 1];
  }

  /// exp(2 pi i j / N) for any integer exponent j (reduced modulo N).
  Complex power(std::int64_t j) const {
    const auto n = static_cast<std::int64_t>(points_.size());
    j %= n;
    if (j < 0) j += n;
    return points_[static_cast<std::size_t>(j)];
  }

  const std::vector<Complex>& points() const noexcept { return points_; }

 private:
  // exp(2 pi i j / n), folded into the first quadrant so that conjugate and
  // mirrored points are bit-exact images of each other.
  static Complex root(std::size_t j, std::size_t n) {
    if (2 * j > n) return std::conj(root(n - j, n));
    if (4 * j > n) {
      const Complex w = half_turn(n - 2 * j, n);
      return {-w.real(), w.imag()};
    }
    return half_turn(2 * j, n);
  }
  // exp(i pi j / n)
  static Complex half_turn(std::size_t j, std::size_t n) {
    const double a = std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    return {std::cos(a), std::sin(a)};
  }

  std::vector<Complex> points_;
};

inline FrequencyGrid build_grid(std::size_t n) { return FrequencyGrid(n); }

/// Points with 0 < arg z_r < pi: no real-axis points and no conjugate pairs.
/// Imaginary parts below 1e-12 count as real.
inline std::vector<std::size_t> upper_circle_indices(const FrequencyGrid& grid) {
  const std::size_t n = grid.size();
  const std::size_t last = (n % 2 == 0) ? n / 2 : (n + 1) / 2;
  std::vector<std::size_t> out;
  for (std::size_t r = 2; r <= last; ++r) {
    if (std::abs(grid.point(r).imag()) >= 1e-12) out.push_back(r);
  }
  return out;
}

/// Sorted set of admissible 1-based grid indices.
class SampleSet {
 public:
  SampleSet() = default;

  /// Validates admissibility against `grid` and sorts ascending.
  SampleSet(const FrequencyGrid& grid, std::vector<std::size_t> indices) : omega_(std::move(indices)) {
    std::sort(omega_.begin(), omega_.end());
    if (std::adjacent_find(omega_.begin(), omega_.end()) != omega_.end()) {
      throw std::invalid_argument("sample set contains duplicate indices");
    }
    const auto admissible = upper_circle_indices(grid);
    for (std::size_t r : omega_) {
      if (!std::binary_search(admissible.begin(), admissible.end(), r)) {
        throw std::invalid_argument("grid index " + std::to_string(r) +
                                    " is not on the open upper half circle");
      }
    }
  }

  std::size_t size() const noexcept { return omega_.size(); }
  const std::vector<std::size_t>& indices() const noexcept { return omega_; }

 private:
  std::vector<std::size_t> omega_;
};

/// m admissible indices drawn uniformly without replacement.
inline SampleSet draw_sample_set(const FrequencyGrid& grid, std::size_t m, Rng& rng) {
  const auto admissible = upper_circle_indices(grid);
  if (m > admissible.size()) {
    throw std::invalid_argument("m = " + std::to_string(m) + " exceeds the " +
                                std::to_string(admissible.size()) + " admissible grid points");
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  for (std::size_t pos : sample_without_replacement(rng, admissible.size(), m)) {
    chosen.push_back(admissible[pos]);
  }
  return SampleSet(grid, std::move(chosen));
}

// ---------------------------------------------------------------------------
// Composite matrix [Phi Psi]

/// Row r of [Phi Psi]: [1, z_r^-1, ..., z_r^-(n1-1), psi_1(z_r), ..., psi_n2(z_r)].
/// FIR entries use exact exponent arithmetic on the grid.
inline void composite_row(const FrequencyGrid& grid, std::size_t r, std::size_t n1, std::size_t n2,
                          const PoleSequence& poles, Eigen::Ref<Eigen::RowVectorXcd, 0, Eigen::InnerStride<>> row) {
  const auto rr = static_cast<std::int64_t>(r - 1);
  for (std::size_t k = 0; k < n1; ++k) {
    row(static_cast<Eigen::Index>(k)) = grid.power(-rr * static_cast<std::int64_t>(k));
  }
  const auto psi = tm_eval_all(poles, n2, grid.point(r));
  for (std::size_t l = 0; l < n2; ++l) row(static_cast<Eigen::Index>(n1 + l)) = psi[l];
}

class CompositeMatrix {
 public:
  CompositeMatrix(std::size_t n, std::size_t n1, std::size_t n2, PoleSequence poles, Eigen::MatrixXcd entries)
      : n_(n), n1_(n1), n2_(n2), poles_(std::move(poles)), entries_(std::move(entries)) {}

  std::size_t grid_size() const noexcept { return n_; }
  std::size_t n1() const noexcept { return n1_; }
  std::size_t n2() const noexcept { return n2_; }
  const PoleSequence& poles() const noexcept { return poles_; }
  const Eigen::MatrixXcd& entries() const noexcept { return entries_; }

  auto phi() const { return entries_.leftCols(static_cast<Eigen::Index>(n1_)); }
  auto psi() const { return entries_.rightCols(static_cast<Eigen::Index>(n2_)); }

 private:
  std::size_t n_, n1_, n2_;
  PoleSequence poles_;
  Eigen::MatrixXcd entries_;
};

inline CompositeMatrix build_composite(const FrequencyGrid& grid, std::size_t n1, std::size_t n2,
                                       const PoleSequence& poles) {
  if (n2 > poles.size()) {
    throw std::invalid_argument("n2 = " + std::to_string(n2) + " exceeds the " +
                                std::to_string(poles.size()) + " supplied poles");
  }
  const std::size_t n = grid.size();
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n1 + n2));
  for (std::size_t r = 1; r <= n; ++r) composite_row(grid, r, n1, n2, poles, m.row(static_cast<Eigen::Index>(r - 1)));
  return CompositeMatrix(n, n1, n2, poles, std::move(m));
}

/// Rows of [Phi Psi] at arbitrary 1-based grid indices, built without the full matrix.
inline Eigen::MatrixXcd composite_rows(const FrequencyGrid& grid, std::span<const std::size_t> rows,
                                       std::size_t n1, std::size_t n2, const PoleSequence& poles) {
  if (n2 > poles.size()) throw std::invalid_argument("n2 exceeds the supplied poles");
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n1 + n2));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 1 || rows[i] > grid.size()) throw std::out_of_range("grid index " + std::to_string(rows[i]));
    composite_row(grid, rows[i], n1, n2, poles, m.row(static_cast<Eigen::Index>(i)));
  }
  return m;
}

/// Rows at arbitrary 1-based indices (conjugate or real-axis rows allowed).
inline Eigen::MatrixXcd select_rows(const CompositeMatrix& a, std::span<const std::size_t> rows) {
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(rows.size()), a.entries().cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 1 || rows[i] > a.grid_size()) {
      throw std::out_of_range("row index " + std::to_string(rows[i]) + " outside 1.." +
                              std::to_string(a.grid_size()));
    }
    out.row(static_cast<Eigen::Index>(i)) = a.entries().row(static_cast<Eigen::Index>(rows[i] - 1));
  }
  return out;
}

inline Eigen::MatrixXcd sample_rows(const CompositeMatrix& a, const SampleSet& omega) {
  return select_rows(a, omega.indices());
}

/// Real form [Re A; Im A] x = [Re b; Im b] of a complex system.
struct RealSplitSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
};

inline RealSplitSystem real_split(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b) {
  if (a.rows() != b.size()) throw std::invalid_argument("real_split: row count and rhs length differ");
  const Eigen::Index m = a.rows();
  RealSplitSystem s;
  s.matrix.resize(2 * m, a.cols());
  s.matrix.topRows(m) = a.real();
  s.matrix.bottomRows(m) = a.imag();
  s.rhs.resize(2 * m);
  s.rhs.head(m) = b.real();
  s.rhs.tail(m) = b.imag();
  return s;
}

inline Eigen::MatrixXd real_split(const Eigen::MatrixXcd& a) {
  Eigen::MatrixXd out(2 * a.rows(), a.cols());
  out.topRows(a.rows()) = a.real();
  out.bottomRows(a.rows()) = a.imag();
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Max deviations of the scaled Gram blocks from their large-N limits:
/// Phi*Phi/N -> I, Psi*Psi/N -> I and (Phi*Psi/N)_{kl} -> a_{k-1,l}.
struct GramDiagnostics {
  double fir_block = 0.0;
  double tm_block = 0.0;
  double cross_block = 0.0;
};

inline GramDiagnostics gram_diagnostics(const CompositeMatrix& a, const ImpulseTable& table) {
  const auto n1 = static_cast<Eigen::Index>(a.n1());
  const auto n2 = static_cast<Eigen::Index>(a.n2());
  if (n2 > 0 && table.a.cols() < n2) throw std::invalid_argument("impulse table has too few columns");
  if (n1 > 0 && n2 > 0 && table.a.rows() < n1) {
    throw std::invalid_argument("impulse table depth must reach lag n1 - 1");
  }
  const double n = static_cast<double>(a.grid_size());
  GramDiagnostics g;
  if (n1 > 0) {
    Eigen::MatrixXcd gp = a.phi().adjoint() * a.phi() / n;
    gp -= Eigen::MatrixXcd::Identity(n1, n1);
    g.fir_block = gp.cwiseAbs().maxCoeff();
  }
  if (n2 > 0) {
    Eigen::MatrixXcd gs = a.psi().adjoint() * a.psi() / n;
    gs -= Eigen::MatrixXcd::Identity(n2, n2);
    g.tm_block = gs.cwiseAbs().maxCoeff();
  }
  if (n1 > 0 && n2 > 0) {
    Eigen::MatrixXcd gc = a.phi().adjoint() * a.psi() / n;
    gc -= table.a.topLeftCorner(n1, n2).cast<Complex>();
    g.cross_block = gc.cwiseAbs().maxCoeff();
  }
  return g;
}

/// mu(Phi, Psi) = max_{k,l} |<Phi_k, Psi_l>| / (|Phi_k| |Psi_l|), for real or
/// complex column blocks.
template <typename DerivedA, typename DerivedB>
double matrix_coherence(const Eigen::MatrixBase<DerivedA>& phi, const Eigen::MatrixBase<DerivedB>& psi) {
  if (phi.cols() == 0 || psi.cols() == 0) throw std::invalid_argument("coherence needs nonempty blocks");
  if (phi.rows() != psi.rows()) throw std::invalid_argument("coherence blocks differ in row count");
  const Eigen::VectorXd pn = phi.colwise().norm().transpose();
  const Eigen::VectorXd sn = psi.colwise().norm().transpose();
  if (pn.minCoeff() == 0.0 || sn.minCoeff() == 0.0) throw std::invalid_argument("coherence of a zero column");
  const auto gram = (phi.adjoint() * psi).eval();
  double mu = 0.0;
  for (Eigen::Index k = 0; k < gram.rows(); ++k) {
    for (Eigen::Index l = 0; l < gram.cols(); ++l) {
      mu = std::max(mu, std::abs(gram(k, l)) / (pn(k) * sn(l)));
    }
  }
  return mu;
}

inline double matrix_coherence(const CompositeMatrix& a) {
  if (a.n1() == 0 || a.n2() == 0) throw std::invalid_argument("coherence needs n1 >= 1 and n2 >= 1");
  return matrix_coherence(a.phi(), a.psi());
}

enum class CrossNorm { spectral, frobenius };

/// Measurement-count bound m >= C * pole_factor * max^2{|T|, log(n/delta), C_mu}
/// with C_mu = 4 / bracket^2 and
/// bracket = (1/2 + |Phi_T1* Psi_T2 / N|) [2 log(2 n / delta)]^-1/2 - mu~ sqrt|T|.
/// `valid` is false when the bracket is nonpositive.
struct MeasurementBound {
  bool valid = false;
  std::size_t measurements = 0;  // ceil(value) when valid
  double value = 0.0;
  double pole_factor = 0.0;      // (1 + max|xi|) / (1 - max|xi|)
  double cross_norm = 0.0;
  double bracket = 0.0;
  double c_mu = 0.0;
  double log_term = 0.0;         // log((n1 + n2) / delta)
  double max_term = 0.0;
  std::size_t support_size = 0;
  // Same bound with the general sampled-system constant mu_M^2 in place of the pole factor.
  double mu_m_squared = 0.0;
  double value_mu_m = 0.0;
};

/// Arithmetic core of the bound; all problem-dependent inputs precomputed.
inline MeasurementBound measurement_bound_from_terms(std::size_t support_size, std::size_t n_total,
                                                     double delta, double c, double pole_factor,
                                                     double cross_norm, double mu_tilde,
                                                     double mu_m_squared = 0.0) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(c > 0.0)) throw std::invalid_argument("constant C must be positive");
  if (support_size == 0) throw std::invalid_argument("support T must be nonempty");
  const double n = static_cast<double>(n_total);
  const double t = static_cast<double>(support_size);
  MeasurementBound b;
  b.support_size = support_size;
  b.pole_factor = pole_factor;
  b.cross_norm = cross_norm;
  b.mu_m_squared = mu_m_squared;
  b.log_term = std::log(n / delta);
  b.bracket = (0.5 + cross_norm) / std::sqrt(2.0 * std::log(2.0 * n / delta)) - mu_tilde * std::sqrt(t);
  if (!(b.bracket > 0.0)) return b;
  b.valid = true;
  b.c_mu = 4.0 / (b.bracket * b.bracket);
  b.max_term = std::max({t, b.log_term, b.c_mu});
  b.value = c * pole_factor * b.max_term * b.max_term;
  b.value_mu_m = c * mu_m_squared * b.max_term * b.max_term;
  b.measurements = static_cast<std::size_t>(std::ceil(b.value));
  return b;
}

/// `t1` indexes FIR columns (1..n1), `t2` TM columns (1..n2) of `a`.
inline MeasurementBound measurement_bound(std::span<const std::size_t> t1, std::span<const std::size_t> t2,
                                          double delta, double c, const CompositeMatrix& a, double mu_tilde,
                                          CrossNorm norm = CrossNorm::spectral) {
  if (t1.empty() && t2.empty()) throw std::invalid_argument("support T must be nonempty");
  for (std::size_t k : t1) {
    if (k < 1 || k > a.n1()) throw std::out_of_range("FIR support index " + std::to_string(k));
  }
  for (std::size_t l : t2) {
    if (l < 1 || l > a.n2()) throw std::out_of_range("TM support index " + std::to_string(l));
  }
  double cross = 0.0;
  if (!t1.empty() && !t2.empty()) {
    Eigen::MatrixXcd phi_t(a.entries().rows(), static_cast<Eigen::Index>(t1.size()));
    Eigen::MatrixXcd psi_t(a.entries().rows(), static_cast<Eigen::Index>(t2.size()));
    for (std::size_t i = 0; i < t1.size(); ++i) phi_t.col(static_cast<Eigen::Index>(i)) = a.phi().col(static_cast<Eigen::Index>(t1[i] - 1));
    for (std::size_t i = 0; i < t2.size(); ++i) psi_t.col(static_cast<Eigen::Index>(i)) = a.psi().col(static_cast<Eigen::Index>(t2[i] - 1));
    const Eigen::MatrixXcd g = phi_t.adjoint() * psi_t / static_cast<double>(a.grid_size());
    if (norm == CrossNorm::spectral) {
      cross = Eigen::JacobiSVD<Eigen::MatrixXcd>(g).singularValues()(0);
    } else {
      cross = g.norm();
    }
  }
  const double rho = a.poles().max_abs(a.n2());
  const double pole_factor = (1.0 + rho) / (1.0 - rho);
  double mu_m = a.n1() > 0 ? 1.0 : 0.0;
  if (a.n2() > 0) mu_m = std::max(mu_m, a.psi().cwiseAbs().maxCoeff());
  return measurement_bound_from_terms(t1.size() + t2.size(), a.n1() + a.n2(), delta, c, pole_factor, cross,
                                      mu_tilde, mu_m * mu_m);
}

// ---------------------------------------------------------------------------
// Export

/// `r,column,real,imag` rows with 1-based indices.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXcd& m) {
  os << "r,column,real,imag\n";
  char buf[96];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", m(r, c).real(), m(r, c).imag());
      os << (r + 1) << ',' << (c + 1) << ',' << buf << '\n';
    }
  }
}

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  os.write(b, 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("truncated binary matrix dump");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// Header u64 N, n1, n2 then the matrix row-major as (re, im) float64 pairs,
/// all little-endian.
inline void write_matrix_binary(std::ostream& os, const CompositeMatrix& a) {
  detail::put_u64_le(os, a.grid_size());
  detail::put_u64_le(os, a.n1());
  detail::put_u64_le(os, a.n2());
  const Eigen::MatrixXcd& m = a.entries();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      detail::put_u64_le(os, std::bit_cast<std::uint64_t>(m(r, c).real()));
      detail::put_u64_le(os, std::bit_cast<std::uint64_t>(m(r, c).imag()));
    }
  }
  if (!os) throw IoError("failed writing binary matrix dump");
}

struct MatrixDump {
  std::size_t grid_size = 0, n1 = 0, n2 = 0;
  Eigen::MatrixXcd entries;
};

inline MatrixDump read_matrix_binary(std::istream& is) {
  MatrixDump d;
  d.grid_size = detail::get_u64_le(is);
  d.n1 = detail::get_u64_le(is);
  d.n2 = detail::get_u64_le(is);
  if (d.grid_size > (1U << 26) || d.n1 + d.n2 > (1U << 20)) throw IoError("implausible matrix dump header");
  d.entries.resize(static_cast<Eigen::Index>(d.grid_size), static_cast<Eigen::Index>(d.n1 + d.n2));
  for (Eigen::Index r = 0; r < d.entries.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.entries.cols(); ++c) {
      const double re = std::bit_cast<double>(detail::get_u64_le(is));
      const double im = std::bit_cast<double>(detail::get_u64_le(is));
      d.entries(r, c) = Complex(re, im);
    }
  }
  return d;
}

}  // namespace sparsid
