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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <sstream>
#include <vector>

#include "sparsid/random.hpp"
#include "sparsid/rational_basis.hpp"
#include "sparsid/sensing.hpp"

using namespace sparsid;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const Complex I(0.0, 1.0);

bool near(Complex a, Complex b, double tol = 1e-15) { return std::abs(a - b) <= tol; }

Eigen::MatrixXcd random_complex(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXcd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = Complex(standard_normal(rng), standard_normal(rng));
  }
  return m;
}

// Normalized-column coherence by explicit loops.
double coherence_loops(const Eigen::MatrixXcd& phi, const Eigen::MatrixXcd& psi) {
  double mu = 0.0;
  for (Eigen::Index k = 0; k < phi.cols(); ++k) {
    for (Eigen::Index l = 0; l < psi.cols(); ++l) {
      Complex ip(0.0, 0.0);
      for (Eigen::Index r = 0; r < phi.rows(); ++r) ip += std::conj(phi(r, k)) * psi(r, l);
      mu = std::max(mu, std::abs(ip) / (phi.col(k).norm() * psi.col(l).norm()));
    }
  }
  return mu;
}

}  // namespace

TEST_CASE("grid examples", "[sensing]") {
  const auto g4 = build_grid(4);
  CHECK(near(g4.point(1), 1.0));
  CHECK(near(g4.point(2), I));
  CHECK(near(g4.point(3), -1.0));
  CHECK(near(g4.point(4), -I));
  const auto g2 = build_grid(2);
  CHECK(near(g2.point(1), 1.0));
  CHECK(near(g2.point(2), -1.0));
  CHECK(near(build_grid(8).point(2), std::polar(1.0, std::numbers::pi / 4)));
  CHECK_THROWS(build_grid(1));
  CHECK_THROWS(g4.point(0));
  CHECK_THROWS(g4.point(5));

  const auto g = build_grid(1000);
  CHECK(g.point(1) == Complex(1.0, 0.0));
  for (std::size_t r = 1; r <= 1000; ++r) REQUIRE_THAT(std::abs(g.point(r)), WithinAbs(1.0, 1e-15));
  CHECK(g.power(-3) == g.point(998));
  CHECK(g.power(1003) == g.point(4));
}

TEST_CASE("upper circle indices", "[sensing]") {
  CHECK(upper_circle_indices(build_grid(4)) == std::vector<std::size_t>{2});
  CHECK(upper_circle_indices(build_grid(8)) == std::vector<std::size_t>{2, 3, 4});
  CHECK(upper_circle_indices(build_grid(7)) == std::vector<std::size_t>{2, 3, 4});
  CHECK(upper_circle_indices(build_grid(2)).empty());
  CHECK(upper_circle_indices(build_grid(3)) == std::vector<std::size_t>{2});
}

TEST_CASE("admissible sets avoid the real axis and conjugate pairs", "[sensing][property]") {
  for (std::size_t n : {5, 6, 63, 64, 999, 1000, 4000}) {
    const auto g = build_grid(n);
    const auto idx = upper_circle_indices(g);
    REQUIRE(idx.size() == (n - 1) / 2);
    std::vector<Complex> pts;
    for (auto r : idx) {
      const Complex z = g.point(r);
      REQUIRE(z.imag() >= 1e-12);
      pts.push_back(z);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 0; j < pts.size(); ++j) REQUIRE(std::abs(pts[i] - std::conj(pts[j])) > 1e-9);
    }
  }
}

TEST_CASE("composite matrix examples", "[sensing]") {
  const auto g = build_grid(4);
  const auto a = build_composite(g, 2, 0, PoleSequence());
  Eigen::MatrixXcd expect(4, 2);
  expect << 1, 1, 1, -I, 1, -1, 1, I;
  CHECK((a.entries() - expect).cwiseAbs().maxCoeff() <= 1e-15);

  const auto b = build_composite(g, 0, 1, PoleSequence({0.0}));
  Eigen::VectorXcd col(4);
  col << 1, -I, -1, I;
  CHECK((b.psi().col(0) - col).cwiseAbs().maxCoeff() <= 1e-15);

  const auto c = build_composite(g, 1, 1, PoleSequence({0.5}));
  CHECK(near(c.entries()(0, 0), 1.0));
  CHECK(near(c.entries()(0, 1), std::sqrt(0.75) / 0.5, 1e-14));

  CHECK_THROWS_AS(build_composite(g, 1, 2, PoleSequence({0.5})), std::invalid_argument);
}

TEST_CASE("composite matrix modulus bounds", "[sensing][property]") {
  const PoleSequence p({0.9, -0.6, 0.3, 0.9});
  const auto a = build_composite(build_grid(257), 10, 4, p);
  CHECK(a.phi().cwiseAbs().maxCoeff() == Catch::Approx(1.0).margin(1e-15));
  CHECK(a.phi().cwiseAbs().minCoeff() == Catch::Approx(1.0).margin(1e-15));
  for (Eigen::Index l = 0; l < 4; ++l) {
    const double x = std::abs(p[static_cast<std::size_t>(l)]);
    const double lo = std::sqrt((1 - x) / (1 + x)), hi = std::sqrt((1 + x) / (1 - x));
    CHECK(a.psi().col(l).cwiseAbs().minCoeff() >= lo - 1e-12);
    CHECK(a.psi().col(l).cwiseAbs().maxCoeff() <= hi + 1e-12);
  }
}

TEST_CASE("row sampling", "[sensing]") {
  const auto g = build_grid(4);
  const auto a = build_composite(g, 2, 1, PoleSequence({0.0}));
  const SampleSet one(g, {2});
  const auto r = sample_rows(a, one);
  REQUIRE(r.rows() == 1);
  CHECK(near(r(0, 0), 1.0));
  CHECK(near(r(0, 1), -I));

  const auto g2 = build_grid(200);
  const auto big = build_composite(g2, 5, 3, PoleSequence({0.2, 0.4, 0.6}));
  Rng rng(1);
  const auto omega = draw_sample_set(g2, 17, rng);
  const auto rows = sample_rows(big, omega);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    REQUIRE(rows.row(static_cast<Eigen::Index>(i)) ==
            big.entries().row(static_cast<Eigen::Index>(omega.indices()[i] - 1)));
  }
  // direct row assembly agrees with selection from the full matrix
  const auto direct = composite_rows(g2, omega.indices(), 5, 3, big.poles());
  CHECK(direct == rows);

  const auto all = upper_circle_indices(g2);
  CHECK(sample_rows(big, SampleSet(g2, all)).rows() == static_cast<Eigen::Index>(all.size()));
  CHECK_THROWS(select_rows(big, std::vector<std::size_t>{201}));
}

TEST_CASE("sample sets", "[sensing]") {
  const auto g = build_grid(64);
  CHECK_THROWS(SampleSet(g, {1}));
  CHECK_THROWS(SampleSet(g, {33}));
  CHECK_THROWS(SampleSet(g, {40}));
  CHECK_THROWS(SampleSet(g, {3, 3}));
  CHECK(SampleSet(g, {9, 2, 5}).indices() == std::vector<std::size_t>{2, 5, 9});

  Rng r1(5), r2(5);
  CHECK(draw_sample_set(g, 10, r1).indices() == draw_sample_set(g, 10, r2).indices());
  Rng r3(6);
  CHECK(draw_sample_set(g, 31, r3).indices() == upper_circle_indices(g));
  CHECK_THROWS(draw_sample_set(g, 32, r3));
}

TEST_CASE("sample sets are uniform over admissible indices", "[sensing][statistics]") {
  const auto g = build_grid(1000);
  const auto adm = upper_circle_indices(g);
  const std::size_t m = 30, draws = 10000;
  std::vector<double> count(1001, 0.0);
  Rng rng(77);
  for (std::size_t t = 0; t < draws; ++t) {
    const SampleSet omega = draw_sample_set(g, m, rng);
    for (auto r : omega.indices()) count[r] += 1.0;
  }
  const double p = static_cast<double>(m) / static_cast<double>(adm.size());
  const double mean = p * draws, sigma = std::sqrt(draws * p * (1 - p));
  std::size_t outside3 = 0;
  for (auto r : adm) {
    const double z = std::abs(count[r] - mean) / sigma;
    REQUIRE(z < 5.0);
    if (z > 3.0) ++outside3;
  }
  // about 0.3% of indices are expected beyond 3 sigma
  CHECK(outside3 <= 6);
  double total = 0.0;
  for (auto c : count) total += c;
  CHECK(total == static_cast<double>(m * draws));
}

TEST_CASE("real split examples", "[sensing]") {
  Eigen::MatrixXcd a(2, 2);
  a << 1.0, 2.0, -3.0, 0.5;
  Eigen::VectorXcd b(2);
  b << 1.0, 4.0;
  const auto s = real_split(a, b);
  CHECK(s.matrix.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.rhs.tail(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.matrix.topRows(2) == a.real());

  Eigen::MatrixXcd one(1, 1);
  one << Complex(1.0, 2.0);
  Eigen::VectorXcd v(1);
  v << Complex(1.0, 2.0);
  const auto t = real_split(one, v);
  CHECK(t.matrix(0, 0) == 1.0);
  CHECK(t.matrix(1, 0) == 2.0);
  CHECK(t.rhs(0) == 1.0);
  CHECK(t.rhs(1) == 2.0);
  CHECK_THROWS(real_split(a, Eigen::VectorXcd(3)));
}

TEST_CASE("real split is equivalent to the complex system", "[sensing][property]") {
  Rng rng(8);
  const Eigen::MatrixXcd a = random_complex(rng, 3, 5);
  Eigen::VectorXd x0(5);
  for (auto& v : x0) v = standard_normal(rng);
  const Eigen::VectorXcd b = a * x0.cast<Complex>();
  const auto s = real_split(a, b);
  // x0 solves both
  CHECK((a * x0.cast<Complex>() - b).norm() <= 1e-14);
  CHECK((s.matrix * x0 - s.rhs).norm() <= 1e-14);
  // a real solution of the split system solves the complex one
  const Eigen::VectorXd x1 = s.matrix.completeOrthogonalDecomposition().solve(s.rhs);
  CHECK((s.matrix * x1 - s.rhs).norm() <= 1e-12);
  CHECK((a * x1.cast<Complex>() - b).norm() <= 1e-12);
  // residual norms agree for arbitrary x
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd x(5);
    for (auto& v : x) v = standard_normal(rng);
    REQUIRE_THAT((s.matrix * x - s.rhs).norm(), WithinRel((a * x.cast<Complex>() - b).norm(), 1e-13));
  }
}

TEST_CASE("conjugate rows make the split system redundant", "[sensing][property]") {
  const auto g = build_grid(64);
  const auto a = build_composite(g, 6, 4, PoleSequence({0.3, 0.6, -0.2, 0.1}));
  const std::vector<std::size_t> dedup{3, 7, 12};
  const std::vector<std::size_t> with_conj{3, 7, 12, 64 - 7 + 2};  // conjugate of z_7
  const auto r1 = real_split(select_rows(a, dedup));
  const auto r2 = real_split(select_rows(a, with_conj));
  CHECK(r2.rows() > r1.rows());
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(r2).rank() == Eigen::FullPivLU<Eigen::MatrixXd>(r1).rank());
  // a real-axis row contributes an all-zero imaginary equation
  const auto z = real_split(select_rows(a, std::vector<std::size_t>{1}));
  CHECK(z.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gram diagnostics examples", "[sensing]") {
  const auto g = build_grid(64);
  const PoleSequence zero = PoleSequence::zeros(20);
  const auto t0 = impulse_table(zero, 20, 40);
  const auto d0 = gram_diagnostics(build_composite(g, 30, 20, zero), t0);
  CHECK(d0.fir_block <= 1e-12);
  CHECK(d0.tm_block <= 1e-12);
  CHECK(d0.cross_block <= 1e-12);

  const PoleSequence p({0.5, 0.7});
  const auto t = impulse_table_auto(p, 2);
  const auto small = gram_diagnostics(build_composite(build_grid(16), 8, 2, p), t);
  const auto large = gram_diagnostics(build_composite(build_grid(32), 8, 2, p), t);
  CHECK(small.fir_block <= 1e-12);
  CHECK(large.fir_block <= 1e-12);
  CHECK(large.tm_block / small.tm_block < 1.0);
  CHECK(large.cross_block / small.cross_block < 1.0);

  CHECK_THROWS(gram_diagnostics(build_composite(g, 30, 2, p), impulse_table(p, 2, 5)));
}

TEST_CASE("TM gram deviations do not grow when N doubles", "[sensing][property]") {
  const PoleSequence p({0.9, 0.5, -0.7, 0.9, 0.2});
  const auto t = impulse_table_auto(p, 5);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n : {32, 64, 128, 256, 512}) {
    const double dev = gram_diagnostics(build_composite(build_grid(n), 10, 5, p), t).tm_block;
    REQUIRE(dev <= 2.0 * prev + 1e-13);
    prev = dev;
  }
}

TEST_CASE("matrix coherence examples", "[sensing]") {
  CHECK_THAT(matrix_coherence(build_composite(build_grid(64), 3, 3, PoleSequence::zeros(3))), WithinAbs(1.0, 1e-12));
  const double mu = matrix_coherence(build_composite(build_grid(4000), 20, 1, PoleSequence({0.5})));
  CHECK_THAT(mu, WithinAbs(std::sqrt(0.75), 1e-3));
  CHECK_THROWS(matrix_coherence(build_composite(build_grid(64), 3, 0, PoleSequence())));

  Rng rng(4);
  const Eigen::MatrixXcd phi = random_complex(rng, 12, 3), psi = random_complex(rng, 12, 4);
  CHECK_THAT(matrix_coherence(phi, psi), WithinAbs(coherence_loops(phi, psi), 1e-14));
}

TEST_CASE("coherence is unchanged by the real split on the full grid", "[sensing][property]") {
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> poles(4);
    for (auto& x : poles) x = uniform_open(rng, -0.9, 0.9);
    const auto a = build_composite(build_grid(128 + 7 * rep), 6, 4, PoleSequence(poles));
    const Eigen::MatrixXd phi = real_split(a.phi()), psi = real_split(a.psi());
    REQUIRE_THAT(matrix_coherence(phi, psi), WithinAbs(matrix_coherence(a), 1e-12));
  }
}

TEST_CASE("matrix coherence approaches the mutual coherence", "[sensing][property]") {
  const PoleSequence p({0.99, 0.995});
  const double mu = mutual_coherence_tilde(p, 2).value;
  const double e1 = std::abs(matrix_coherence(build_composite(build_grid(1000), 20, 2, p)) - mu);
  const double e8 = std::abs(matrix_coherence(build_composite(build_grid(8000), 20, 2, p)) - mu);
  CHECK(e8 < e1);
}

TEST_CASE("measurement bound guarded case", "[sensing]") {
  // all-zero poles give mu~ = 1, which always exceeds the first bracket term
  const auto a = build_composite(build_grid(1000), 50, 50, PoleSequence::zeros(50));
  const std::vector<std::size_t> t1{1}, none;
  const auto b = measurement_bound(t1, none, 0.1, 1.0, a, 1.0);
  CHECK_FALSE(b.valid);
  CHECK_THAT(b.bracket, WithinAbs(0.5 / std::sqrt(2.0 * std::log(2.0 * 100 / 0.1)) - 1.0, 1e-15));
  CHECK(b.measurements == 0);
}

TEST_CASE("measurement bound matches term-by-term evaluation", "[sensing]") {
  const PoleSequence p({0.5, 0.3, 0.0});
  const auto a = build_composite(build_grid(1000), 50, 3, p);
  const std::vector<std::size_t> t1{1, 2}, t2{1};
  const double mu = 0.02, delta = 0.1, c = 1.0;
  const auto b = measurement_bound(t1, t2, delta, c, a, mu);
  REQUIRE(b.valid);

  // independent re-evaluation
  Eigen::MatrixXcd g(2, 1);
  for (int k = 0; k < 2; ++k) {
    Complex s(0.0, 0.0);
    for (Eigen::Index r = 0; r < 1000; ++r) s += std::conj(a.entries()(r, k)) * a.entries()(r, 50);
    g(k, 0) = s / 1000.0;
  }
  const double cross = g.norm();  // one column: spectral norm = Euclidean norm
  const double n = 53.0, t = 3.0;
  const double bracket = (0.5 + cross) / std::sqrt(2.0 * std::log(2.0 * n / delta)) - mu * std::sqrt(t);
  const double cmu = 4.0 / (bracket * bracket);
  const double mx = std::max({t, std::log(n / delta), cmu});
  const double value = c * (1.5 / 0.5) * mx * mx;
  CHECK_THAT(b.cross_norm, WithinRel(cross, 1e-12));
  CHECK_THAT(b.bracket, WithinRel(bracket, 1e-12));
  CHECK_THAT(b.value, WithinRel(value, 1e-12));
  CHECK(b.measurements == static_cast<std::size_t>(std::ceil(value)));
  CHECK_THAT(b.pole_factor, WithinRel(3.0, 1e-15));

  const auto f = measurement_bound(t1, t2, delta, c, a, mu, CrossNorm::frobenius);
  CHECK_THAT(f.cross_norm, WithinRel(cross, 1e-12));

  CHECK_THROWS(measurement_bound(t1, t2, 0.0, c, a, mu));
  CHECK_THROWS(measurement_bound(t1, t2, delta, -1.0, a, mu));
  CHECK_THROWS(measurement_bound(std::vector<std::size_t>{}, std::vector<std::size_t>{}, delta, c, a, mu));
  CHECK_THROWS(measurement_bound(std::vector<std::size_t>{51}, t2, delta, c, a, mu));
}

TEST_CASE("measurement bound is linear in the pole factor", "[sensing]") {
  const auto b1 = measurement_bound_from_terms(4, 100, 0.1, 1.0, 3.0, 0.2, 0.01);
  const auto b2 = measurement_bound_from_terms(4, 100, 0.1, 1.0, 6.0, 0.2, 0.01);
  REQUIRE(b1.valid);
  CHECK(b1.max_term == b2.max_term);
  CHECK_THAT(b2.value, WithinRel(2.0 * b1.value, 1e-15));
}

TEST_CASE("matrix export", "[sensing]") {
  const auto a = build_composite(build_grid(8), 2, 1, PoleSequence({0.25}));
  std::stringstream bin;
  write_matrix_binary(bin, a);
  CHECK(bin.str().size() == 24 + 8 * 3 * 16);
  const auto d = read_matrix_binary(bin);
  CHECK(d.grid_size == 8);
  CHECK(d.n1 == 2);
  CHECK(d.n2 == 1);
  CHECK(d.entries == a.entries());

  std::stringstream truncated(bin.str().substr(0, 30));
  CHECK_THROWS_AS(read_matrix_binary(truncated), IoError);

  std::ostringstream csv;
  write_matrix_csv(csv, select_rows(a, std::vector<std::size_t>{1}));
  CHECK(csv.str().rfind("r,column,real,imag\n1,1,1,0\n1,2,1,0\n", 0) == 0);
}
