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
#include <sstream>
#include <vector>

#include "sparsid/random.hpp"
#include "sparsid/rational_basis.hpp"

using namespace sparsid;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const Complex I(0.0, 1.0);

// Impulse response of psi_l recovered from K samples on the unit circle:
// a_d = (1/K) sum_r psi_l(w_r) w_r^d. Aliasing error is O(rho^K).
std::vector<double> dft_resynthesis(const PoleSequence& poles, std::size_t l, std::size_t depth, std::size_t k) {
  std::vector<double> a(depth + 1, 0.0);
  std::vector<Complex> psi(k);
  for (std::size_t r = 0; r < k; ++r) {
    psi[r] = tm_eval(poles, l, std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(r) / k));
  }
  for (std::size_t d = 0; d <= depth; ++d) {
    Complex s(0.0, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
      s += psi[r] * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>((r * d) % k) / k);
    }
    a[d] = s.real() / static_cast<double>(k);
  }
  return a;
}

Complex resynthesize(const Eigen::VectorXd& a, Complex z) {
  Complex s(0.0, 0.0), zinv = 1.0 / z, p(1.0, 0.0);
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    s += a(d) * p;
    p *= zinv;
  }
  return s;
}

}  // namespace

TEST_CASE("pole sequences reject poles on or outside the circle", "[basis]") {
  CHECK_THROWS_AS(PoleSequence({0.5, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(PoleSequence({-1.2}), std::invalid_argument);
  CHECK_THROWS_AS(PoleSequence({std::nan("")}), std::invalid_argument);
  CHECK_NOTHROW(PoleSequence({0.99, -0.99, 0.0}));
  const std::vector<Complex> c{{0.5, 0.0}, {0.2, 0.1}};
  CHECK_THROWS_AS(PoleSequence::from_complex(c), std::invalid_argument);
  const std::vector<Complex> r{{0.5, 0.0}, {-0.2, 0.0}};
  CHECK(PoleSequence::from_complex(r).values() == std::vector<double>{0.5, -0.2});
}

TEST_CASE("fir_eval examples", "[basis]") {
  CHECK(std::abs(fir_eval(1, Complex(0.3, -2.0)) - 1.0) < 1e-15);
  CHECK(std::abs(fir_eval(3, I) - (-1.0)) < 1e-15);
  const Complex z = std::polar(1.0, std::numbers::pi / 4);
  CHECK(std::abs(fir_eval(2, z) - std::polar(1.0, -std::numbers::pi / 4)) < 1e-15);
  CHECK_THROWS(fir_eval(2, Complex(0.0, 0.0)));
  CHECK_THROWS(fir_eval(0, I));
}

TEST_CASE("tm_eval examples", "[basis]") {
  CHECK(std::abs(tm_eval(PoleSequence({0.0, 0.0}), 2, I) - (-1.0)) < 1e-15);
  CHECK_THAT(tm_eval(PoleSequence({0.5}), 1, 1.0).real(), WithinAbs(1.7320508075688772, 1e-14));
  CHECK_THROWS_AS(tm_eval(PoleSequence({0.5}), 2, I), std::out_of_range);
  CHECK_THROWS(tm_eval(PoleSequence({0.5}), 0, I));
  CHECK_THROWS(tm_eval(PoleSequence({0.5}), 1, Complex(0.5, 0.0)));

  // value at e^{i pi/3} against a resynthesis of its impulse response
  const PoleSequence p({0.5, 0.9});
  const Complex z = std::polar(1.0, std::numbers::pi / 3);
  const auto col = impulse_response_filter(p, 2, 600);
  CHECK(std::abs(tm_eval(p, 2, z) - resynthesize(col.a, z)) < 1e-8);
}

TEST_CASE("all-zero poles reduce TM to delayed FIR", "[basis][property]") {
  const PoleSequence p = PoleSequence::zeros(6);
  double worst = 0.0;
  for (int r = 0; r < 512; ++r) {
    const Complex z = std::polar(1.0, 2.0 * std::numbers::pi * r / 512.0);
    const auto all = tm_eval_all(p, 6, z);
    for (std::size_t l = 1; l <= 6; ++l) {
      worst = std::max(worst, std::abs(all[l - 1] - std::pow(z, -static_cast<int>(l))));
      worst = std::max(worst, std::abs(tm_eval(p, l, z) - all[l - 1]));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("closed-form impulse response examples", "[basis]") {
  const auto a = impulse_response_closed_form(PoleSequence({0.5}), 1, 10);
  CHECK(a(0) == 0.0);
  CHECK_THAT(a(1), WithinAbs(0.8660254037844386, 1e-15));
  CHECK_THAT(a(2), WithinAbs(0.4330127018922193, 1e-15));
  for (int d = 1; d <= 10; ++d) CHECK_THAT(a(d), WithinAbs(std::sqrt(0.75) * std::pow(0.5, d - 1), 1e-15));

  const auto u = impulse_response_closed_form(PoleSequence({0.0}), 1, 5);
  CHECK(u(1) == 1.0);
  CHECK(u.cwiseAbs().sum() == 1.0);

  const PoleSequence p({0.3, 0.7});
  const auto cf = impulse_response_closed_form(p, 2, 50);
  const auto fl = impulse_response_filter(p, 2, 50);
  CHECK((cf - fl.a).cwiseAbs().maxCoeff() <= 1e-10);

  CHECK_THROWS_AS(impulse_response_closed_form(PoleSequence({0.4, 0.4}), 2, 10), std::invalid_argument);
  CHECK_THROWS_AS(impulse_response_closed_form(PoleSequence({0.4, 0.4 + 1e-10}), 2, 10), std::invalid_argument);
  CHECK_THROWS(impulse_response_closed_form(PoleSequence({0.4}), 2, 10));
  CHECK_THROWS(impulse_response_closed_form(PoleSequence({0.4}), 1, 0));
}

TEST_CASE("filter impulse response examples", "[basis]") {
  const auto c = impulse_response_filter(PoleSequence::zeros(5), 3, 20);
  for (int d = 0; d <= 20; ++d) CHECK(c.a(d) == (d == 3 ? 1.0 : 0.0));

  const PoleSequence half({0.5});
  CHECK((impulse_response_filter(half, 1, 80).a - impulse_response_closed_form(half, 1, 80)).cwiseAbs().maxCoeff() <=
        1e-12);
  CHECK_THROWS(impulse_table(half, 1, 0));

  // repeated pole: resynthesis matches tm_eval on a 4096-point grid
  const PoleSequence rep({0.9, 0.9});
  const auto col = impulse_response_filter(rep, 2, 800);
  double worst = 0.0;
  for (int r = 0; r < 4096; ++r) {
    const Complex z = std::polar(1.0, 2.0 * std::numbers::pi * r / 4096.0);
    worst = std::max(worst, std::abs(resynthesize(col.a, z) - tm_eval(rep, 2, z)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("filter columns match a frequency-domain resynthesis", "[basis]") {
  const PoleSequence p({0.6, -0.4, 0.6, 0.2});
  const auto t = impulse_table(p, 4, 60);
  for (std::size_t l = 1; l <= 4; ++l) {
    const auto ref = dft_resynthesis(p, l, 60, 1024);
    for (std::size_t d = 0; d <= 60; ++d) {
      REQUIRE_THAT(t.a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(l - 1)), WithinAbs(ref[d], 1e-12));
    }
  }
}

TEST_CASE("closed form and cascade agree for distinct poles", "[basis][property]") {
  Rng rng(2024);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t l = 1 + uniform_index(rng, 6);
    std::vector<double> v(l);
    for (auto& x : v) x = uniform_open(rng, -0.95, 0.95);
    bool distinct = true;
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = i + 1; j < l; ++j) distinct = distinct && std::abs(v[i] - v[j]) > 1e-3;
    }
    if (!distinct) continue;
    const PoleSequence p(v);
    const auto cf = impulse_response_closed_form(p, l, 60);
    const auto fl = impulse_response_filter(p, l, 60);
    REQUIRE((cf - fl.a).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("impulse tables are orthonormal columns with a zero first row", "[basis][property]") {
  const PoleSequence p({0.8, -0.5, 0.8, 0.3, 0.0, 0.9});
  const auto t = impulse_table_auto(p, 6);
  CHECK(t.max_tail_bound() <= kDefaultTailTolerance);
  CHECK(t.a.row(0).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd g = t.a.transpose() * t.a;
  const double tol = 10.0 * t.max_tail_bound() + 1e-12;
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK_THAT(g(i, i), WithinAbs(1.0, tol));
    for (Eigen::Index j = 0; j < 6; ++j) {
      if (i != j) CHECK(std::abs(g(i, j)) <= tol);
    }
  }
}

TEST_CASE("default truncation", "[basis]") {
  CHECK(default_truncation(PoleSequence({0.5}), 1) == static_cast<std::size_t>(std::ceil(std::log(1e-12) / std::log(0.5))) + 1);
  CHECK(default_truncation(PoleSequence::zeros(4), 4) == 4);
  CHECK(default_truncation(PoleSequence({0.999999}), 1) == kMaxTruncation);
}

TEST_CASE("mutual coherence examples", "[basis]") {
  CHECK(mutual_coherence_tilde(PoleSequence::zeros(7), 7).value == 1.0);
  const auto h = mutual_coherence_tilde(PoleSequence({0.5}), 1);
  CHECK_THAT(h.value, WithinAbs(std::sqrt(0.75), 1e-15));
  CHECK(h.argmax_d == 1);
  CHECK(h.argmax_l == 1);

  const PoleSequence p({0.3, 0.7});
  const auto t = impulse_table(p, 2, 200);
  double scan = 0.0;
  for (Eigen::Index d = 0; d < t.a.rows(); ++d) {
    for (Eigen::Index l = 0; l < 2; ++l) scan = std::max(scan, std::abs(t.a(d, l)));
  }
  CHECK(mutual_coherence_tilde(p, 2, 200).value == scan);

  // a depth of 2 leaves a tail larger than the requested accuracy
  CHECK_THROWS(mutual_coherence_tilde(PoleSequence({0.95}), 1, 2, 1e-9));
  CHECK_THROWS(mutual_coherence_tilde(PoleSequence({0.5}), 2, 10));
}

TEST_CASE("impulse csv export", "[basis]") {
  std::ostringstream os;
  write_impulse_csv(os, impulse_table(PoleSequence({0.0}), 1, 2));
  CHECK(os.str() == "d,l,a_dl\n0,1,0\n1,1,1\n2,1,0\n");
}

TEST_CASE("sparsity report examples", "[basis]") {
  const std::vector<double> a{1, 0, 0.5, 0, 0};
  auto r = sparsity_report(a, 0.0);
  CHECK(r.n_eps == 4);
  CHECK(r.support == std::vector<std::size_t>{1, 3});
  CHECK(r.eps_zero_norm == 2);

  r = sparsity_report(std::vector<double>{1, 0, 0.5}, 1.5);
  CHECK(r.n_eps == 1);
  CHECK(r.support.empty());
  CHECK(r.eps_zero_norm == 0);

  r = sparsity_report(std::vector<double>{0.6, 0.3, 0.2, 0.1}, 0.3);
  CHECK(r.n_eps == 3);
  CHECK(r.support == std::vector<std::size_t>{1, 2});
  CHECK(r.eps_zero_norm == 2);

  CHECK_THROWS_AS(sparsity_report(a, -1e-3), std::invalid_argument);
}

TEST_CASE("sparsity report invariants and monotonicity", "[basis][property]") {
  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> c(12);
    for (auto& x : c) x = uniform01(rng) < 0.4 ? 0.0 : standard_normal(rng);
    std::size_t prev_n = 1000, prev_norm = 1000;
    for (double eps : {0.0, 0.01, 0.1, 0.5, 1.0, 3.0, 100.0}) {
      const auto r = sparsity_report(c, eps);
      double tail = 0.0;
      for (std::size_t k = r.n_eps; k <= c.size(); ++k) tail += std::abs(c[k - 1]);
      REQUIRE(tail <= eps * (1 + 1e-12) + 1e-15);
      REQUIRE(r.eps_zero_norm == r.support.size());
      for (auto k : r.support) {
        REQUIRE(k < r.n_eps);
        REQUIRE(c[k - 1] != 0.0);
      }
      REQUIRE(r.n_eps <= prev_n);
      REQUIRE(r.eps_zero_norm <= prev_norm);
      prev_n = r.n_eps;
      prev_norm = r.eps_zero_norm;
    }
  }
}

TEST_CASE("uniqueness check examples", "[basis]") {
  const std::vector<double> none{0, 0};
  auto v = uniqueness_check(sparsity_report(none, 0), sparsity_report(none, 0), 1.0);
  CHECK(v.unique);
  CHECK(v.margin == 1.0);

  const std::vector<double> one{1, 0};
  v = uniqueness_check(sparsity_report(one, 0), sparsity_report(one, 0), 0.866);
  CHECK_FALSE(v.unique);
  CHECK(v.lhs == 2.0);
  CHECK_THAT(v.bound, WithinRel(1.0 / 0.866, 1e-15));

  const std::vector<double> a3{1, 1, 1}, b2{1, 1};
  const double mu = mutual_coherence_tilde(PoleSequence::zeros(2), 2).value;
  v = uniqueness_check(sparsity_report(a3, 0), sparsity_report(b2, 0), mu);
  CHECK_FALSE(v.unique);
  CHECK(v.margin == -4.0);

  CHECK_THROWS_AS(uniqueness_check(sparsity_report(a3, 0), sparsity_report(b2, 0), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(uniqueness_check(sparsity_report(a3, 0), sparsity_report(b2, 0.1), 0.5), std::invalid_argument);
}
