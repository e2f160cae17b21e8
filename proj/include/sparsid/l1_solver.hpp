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

// l1 minimization over real systems:
//
//   basis pursuit          min |x|_1  s.t.  A x = b
//   basis pursuit denoise  min |x|_1  s.t.  |A x - b|_2 <= eps
//
// Both are solved with over-relaxed ADMM (Boyd et al., "Distributed
// Optimization and Statistical Learning via the Alternating Direction Method
// of Multipliers", 2011) using one cached factorization per problem. Every few
// iterations the current support is polished: the restricted problem is
// solved exactly and accepted once a dual vector certifies optimality, i.e.
// |x|_1 minus the dual objective is below the optimality tolerance.
//
// A brute-force l0 search is included for small instances.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsid {

struct SolverTolerances {
  double feasibility_tol = 1e-7;  // relative: |Ax - b| <= tol (1 + |b|)
  double optimality_tol = 1e-6;   // absolute gap on the l1 objective
  std::size_t max_iterations = 50000;
};

struct L1Problem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  double noise_radius = 0.0;  // 0 selects basis pursuit
  SolverTolerances tolerances;
};

enum class SolverStatus { converged, max_iter, infeasible };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iter: return "max_iter";
    case SolverStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

inline SolverStatus solver_status_from_string(const std::string& s) {
  if (s == "converged") return SolverStatus::converged;
  if (s == "max_iter") return SolverStatus::max_iter;
  if (s == "infeasible") return SolverStatus::infeasible;
  throw std::invalid_argument("unknown solver status '" + s + "'");
}

struct SolverResult {
  Eigen::VectorXd solution;
  double l1_value = 0.0;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  SolverStatus status = SolverStatus::max_iter;
  // Weak-duality lower bound on the optimal l1 value; l1_value - dual_bound
  // bounds the suboptimality.
  double dual_bound = -std::numeric_limits<double>::infinity();
  bool polished = false;

  double duality_gap() const { return l1_value - dual_bound; }
};

namespace detail {

inline void validate(const L1Problem& p) {
  if (p.matrix.rows() < 1 || p.matrix.cols() < 1) throw std::invalid_argument("l1 problem needs M >= 1 and n >= 1");
  if (p.rhs.size() != p.matrix.rows()) throw std::invalid_argument("rhs length does not match matrix rows");
  if (!(p.noise_radius >= 0.0)) throw std::invalid_argument("noise radius must be nonnegative");
  if (!p.matrix.allFinite() || !p.rhs.allFinite()) throw std::invalid_argument("l1 problem has non-finite data");
}

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  return v.unaryExpr([t](double x) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
  });
}

// Row-space basis and minimum-norm least-squares solution from a thin SVD.
struct RowSpace {
  Eigen::MatrixXd u;      // M x r
  Eigen::VectorXd sigma;  // r
  Eigen::MatrixXd v;      // n x r
  Eigen::VectorXd x_ls;   // min-norm minimizer of |Ax - b|
  std::size_t rank = 0;

  // Singular values at or below rel_cut * sigma_max are treated as zero; the
  // default is the usual numerical rank.
  RowSpace(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rel_cut = 0.0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    rel_cut = std::max(rel_cut, static_cast<double>(std::max(a.rows(), a.cols())) *
                                    std::numeric_limits<double>::epsilon());
    const double cut = s.size() > 0 ? s(0) * rel_cut : 0.0;
    while (rank < static_cast<std::size_t>(s.size()) && s(static_cast<Eigen::Index>(rank)) > cut) ++rank;
    const auto r = static_cast<Eigen::Index>(rank);
    u = svd.matrixU().leftCols(r);
    v = svd.matrixV().leftCols(r);
    sigma = s.head(r);
    x_ls = v * (u.transpose() * b).cwiseQuotient(sigma);
  }

  // Projection onto {x : A x = A x_ls}.
  Eigen::VectorXd project(const Eigen::VectorXd& w) const { return w - v * (v.transpose() * w) + x_ls; }

  // Minimum-norm y with A^T y = g restricted to the row space.
  Eigen::VectorXd pinv_transpose(const Eigen::VectorXd& g) const {
    return u * (v.transpose() * g).cwiseQuotient(sigma);
  }
};

// Scales y into the dual-feasible box |A^T y|_inf <= 1 and evaluates the dual
// objective b^T y - eps |y|.
inline double dual_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double eps, Eigen::VectorXd y) {
  if (!y.allFinite()) return -std::numeric_limits<double>::infinity();
  const double box = (a.transpose() * y).cwiseAbs().maxCoeff();
  if (box > 1.0) y /= box;
  return b.dot(y) - eps * y.norm();
}

struct Polished {
  Eigen::VectorXd x;
  double dual = -std::numeric_limits<double>::infinity();
};

inline std::vector<Eigen::Index> support_of(const Eigen::VectorXd& z) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) != 0.0) s.push_back(i);
  }
  return s;
}

inline Eigen::MatrixXd columns(const Eigen::MatrixXd& a, const std::vector<Eigen::Index>& s) {
  Eigen::MatrixXd out(a.rows(), static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = a.col(s[i]);
  return out;
}

// Exact solve on the support of z with the signs of z. For eps = 0 this is
// the restricted least-squares solution; for eps > 0 the sign-constrained
// minimizer on the residual sphere of radius eps. Returns nothing when the
// restricted system is rank deficient, infeasible, or flips a sign.
// For eps = 0 the dual is not unique; `hint` (an approximate dual from the
// iteration) is corrected onto A_S^T y = sign and tried as well.
inline std::optional<Polished> polish(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double eps,
                                      const Eigen::VectorXd& z, double feas_abs,
                                      const Eigen::VectorXd* hint = nullptr) {
  const auto support = support_of(z);
  if (support.empty() || support.size() > static_cast<std::size_t>(a.rows())) return std::nullopt;
  const Eigen::MatrixXd as = columns(a, support);
  const Eigen::MatrixXd gram = as.transpose() * as;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  const Eigen::VectorXd d = ldlt.vectorD();
  if (d.minCoeff() <= d.maxCoeff() * 1e-13) return std::nullopt;

  Eigen::VectorXd signs(static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) signs(static_cast<Eigen::Index>(i)) = z(support[i]) > 0 ? 1.0 : -1.0;

  Eigen::VectorXd xs = ldlt.solve(as.transpose() * b);
  const Eigen::VectorXd r_ls = b - as * xs;
  const Eigen::VectorXd w = ldlt.solve(signs);
  Eigen::VectorXd y;
  if (eps == 0.0) {
    if (r_ls.norm() > feas_abs) return std::nullopt;
    y = as * w;
  } else {
    const double r2 = r_ls.squaredNorm();
    const Eigen::VectorXd dir = as * w;
    const double dn = dir.norm();
    if (r2 >= eps * eps || dn == 0.0) return std::nullopt;
    const double tau = std::sqrt(eps * eps - r2) / dn;
    xs -= tau * w;
    y = (b - as * xs) / tau;
  }
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    if (xs(i) * signs(i) <= 0.0) return std::nullopt;
  }
  Polished p;
  p.x = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t i = 0; i < support.size(); ++i) p.x(support[i]) = xs(static_cast<Eigen::Index>(i));
  p.dual = dual_objective(a, b, eps, y);
  if (eps > 0.0) {
    // r/tau loses digits once tau is tiny; its range part alone is exact
    p.dual = std::max(p.dual, dual_objective(a, b, eps, as * w));
  }
  if (hint != nullptr) {
    const Eigen::VectorXd yh = *hint + as * ldlt.solve(signs - as.transpose() * *hint);
    p.dual = std::max(p.dual, dual_objective(a, b, eps, yh));
  }
  return p;
}

inline void finish(SolverResult& r, const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  r.l1_value = r.solution.lpNorm<1>();
  r.residual_norm = (a * r.solution - b).norm();
}

// ADMM step-size control shared by both solvers.
struct PenaltyControl {
  double rho;
  static constexpr double kMu = 10.0;
  static constexpr double kTau = 2.0;
  static constexpr std::size_t kInterval = 10;
  static constexpr std::size_t kStop = 5000;  // freeze rho after this many iterations

  // Returns the factor applied to rho (scaled duals must be divided by it).
  double update(std::size_t it, double primal, double dual) {
    if (it == 0 || it % kInterval != 0 || it > kStop) return 1.0;
    if (primal > kMu * dual) {
      rho *= kTau;
      return kTau;
    }
    if (dual > kMu * primal) {
      rho /= kTau;
      return 1.0 / kTau;
    }
    return 1.0;
  }
};

inline constexpr double kRelaxation = 1.6;
inline constexpr std::size_t kPolishInterval = 20;
// ADMM iterations spent on basis pursuit before the interior-point finish.
inline constexpr std::size_t kBpAdmmBudget = 2000;
inline constexpr double kRankCutFraction = 1e-2;

struct InteriorPointResult {
  Eigen::VectorXd x;  // in the original coordinates
  Eigen::VectorXd y;  // dual for A x = b
  std::size_t iterations = 0;
  bool converged = false;
};

// Mehrotra predictor-corrector on the standard-form LP
//   min 1^T (p + q)  s.t.  W (p - q) = c,  p, q >= 0,
// where W = V^T has orthonormal rows (row space of A) and c = S^-1 U^T b.
inline InteriorPointResult bp_interior_point(const RowSpace& rs, std::size_t max_iterations) {
  const Eigen::MatrixXd w = rs.v.transpose();
  const Eigen::VectorXd c = rs.v.transpose() * rs.x_ls;
  const Eigen::Index n = w.cols();
  const Eigen::Index r = w.rows();
  auto apply = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& q) -> Eigen::VectorXd { return w * (p - q); };

  // Starting point after Mehrotra (1992), split into the p and q halves.
  Eigen::VectorXd p = rs.x_ls.cwiseMax(0.0), q = (-rs.x_ls).cwiseMax(0.0);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd sp = Eigen::VectorXd::Ones(n), sq = Eigen::VectorXd::Ones(n);
  {
    const double dx = std::max(-1.5 * std::min(p.minCoeff(), q.minCoeff()), 0.0);
    p.array() += dx;
    q.array() += dx;
    const double xs = p.dot(sp) + q.dot(sq);
    const double shift_x = 0.5 * xs / (sp.sum() + sq.sum());
    const double shift_s = 0.5 * xs / (p.sum() + q.sum());
    p.array() += shift_x + 1.0;
    q.array() += shift_x + 1.0;
    sp.array() += shift_s;
    sq.array() += shift_s;
  }

  InteriorPointResult out;
  const double dim = static_cast<double>(2 * n);
  const double c_norm = c.norm();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd rp = c - apply(p, q);
    const Eigen::VectorXd wy = w.transpose() * y;
    const Eigen::VectorXd rdp = Eigen::VectorXd::Ones(n) - wy - sp;
    const Eigen::VectorXd rdq = Eigen::VectorXd::Ones(n) + wy - sq;
    const double gap = p.dot(sp) + q.dot(sq);
    const double primal_obj = p.sum() + q.sum();
    const double dual_obj = c.dot(y);
    // The returned x is re-projected onto the constraints, so the primal test
    // is looser than the gap test.
    if (rp.norm() <= 1e-8 * (1.0 + c_norm) &&
        std::sqrt(rdp.squaredNorm() + rdq.squaredNorm()) <= 1e-10 * (1.0 + std::sqrt(dim)) &&
        std::abs(primal_obj - dual_obj) <= 1e-10 * (1.0 + std::abs(primal_obj))) {
      out.converged = true;
      break;
    }
    const double mu = gap / dim;
    if (!(mu > std::numeric_limits<double>::min())) break;
    const Eigen::VectorXd dp = p.cwiseQuotient(sp), dq = q.cwiseQuotient(sq);
    const Eigen::MatrixXd normal = w * (dp + dq).asDiagonal() * w.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success) break;

    // Solves the Newton system for complementarity targets (cp, cq).
    struct Step {
      Eigen::VectorXd p, q, y, sp, sq;
    };
    auto newton = [&](const Eigen::VectorXd& cp, const Eigen::VectorXd& cq) {
      Step s;
      const Eigen::VectorXd tp = cp.cwiseQuotient(sp) - dp.cwiseProduct(rdp);
      const Eigen::VectorXd tq = cq.cwiseQuotient(sq) - dq.cwiseProduct(rdq);
      s.y = llt.solve(rp - w * (tp - tq));
      const Eigen::VectorXd wdy = w.transpose() * s.y;
      s.sp = rdp - wdy;
      s.sq = rdq + wdy;
      s.p = tp + dp.cwiseProduct(wdy);
      s.q = tq - dq.cwiseProduct(wdy);
      return s;
    };
    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      }
      return a;
    };

    const Step aff = newton(-p.cwiseProduct(sp), -q.cwiseProduct(sq));
    const double ap = std::min(max_step(p, aff.p), max_step(q, aff.q));
    const double ad = std::min(max_step(sp, aff.sp), max_step(sq, aff.sq));
    const double gap_aff = (p + ap * aff.p).dot(sp + ad * aff.sp) + (q + ap * aff.q).dot(sq + ad * aff.sq);
    const double sigma = std::pow(gap_aff / gap, 3);
    const Step st = newton((sigma * mu - p.cwiseProduct(sp).array() - aff.p.cwiseProduct(aff.sp).array()).matrix(),
                           (sigma * mu - q.cwiseProduct(sq).array() - aff.q.cwiseProduct(aff.sq).array()).matrix());
    const double eta = std::max(0.9, 1.0 - mu);
    const double step_p = std::min(1.0, eta * std::min(max_step(p, st.p), max_step(q, st.q)));
    const double step_d = std::min(1.0, eta * std::min(max_step(sp, st.sp), max_step(sq, st.sq)));
    if (!st.p.allFinite() || !st.q.allFinite() || !st.y.allFinite() || !st.sp.allFinite() || !st.sq.allFinite()) {
      break;
    }
    p += step_p * st.p;
    q += step_p * st.q;
    y += step_d * st.y;
    sp += step_d * st.sp;
    sq += step_d * st.sq;
  }
  out.x = rs.project(p - q);
  // A^T y_A = W^T y for y_A = U S^-1 y.
  out.y = rs.u * y.cwiseQuotient(rs.sigma);
  return out;
}

}  // namespace detail

/// min |x|_1 subject to A x = b.
inline SolverResult solve_bp(const L1Problem& problem) {
  detail::validate(problem);
  if (problem.noise_radius != 0.0) throw std::invalid_argument("solve_bp requires noise_radius = 0; use solve_bpdn");
  const Eigen::MatrixXd& a = problem.matrix;
  const Eigen::VectorXd& b = problem.rhs;
  const SolverTolerances& tol = problem.tolerances;
  const double feas_abs = tol.feasibility_tol * (1.0 + b.norm());
  const auto n = a.cols();

  SolverResult res;
  // Directions with tiny singular values carry amplified rounding noise in
  // b; dropping them moves the residual by far less than the tolerance.
  const detail::RowSpace rs(a, b, detail::kRankCutFraction * tol.feasibility_tol);
  if ((a * rs.x_ls - b).norm() > feas_abs) {
    res.solution = rs.x_ls;
    res.status = SolverStatus::infeasible;
    detail::finish(res, a, b);
    return res;
  }
  if (rs.rank == static_cast<std::size_t>(n)) {
    // Single feasible point.
    res.solution = rs.x_ls;
    res.status = SolverStatus::converged;
    detail::finish(res, a, b);
    res.dual_bound = res.l1_value;
    return res;
  }
  if (b.norm() == 0.0) {
    res.solution = Eigen::VectorXd::Zero(n);
    res.status = SolverStatus::converged;
    detail::finish(res, a, b);
    res.dual_bound = 0.0;
    return res;
  }

  const double scale = std::max(rs.x_ls.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  detail::PenaltyControl penalty{static_cast<double>(n) / rs.x_ls.lpNorm<1>()};
  const double eps_abs = 1e-10 * scale;
  const double eps_rel = 1e-9;

  Eigen::VectorXd z = rs.x_ls;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x(n), z_old(n), x_hat(n);
  std::optional<detail::Polished> best;
  std::vector<Eigen::Index> last_support;

  auto certified = [&](const detail::Polished& p) {
    return p.x.lpNorm<1>() - p.dual <= tol.optimality_tol;
  };

  std::size_t it = 0;
  bool admm_converged = false;
  bool certified_early = false;
  const std::size_t admm_budget = std::min(tol.max_iterations, detail::kBpAdmmBudget);
  for (; it < admm_budget; ++it) {
    x = rs.project(z - u);
    x_hat = detail::kRelaxation * x + (1.0 - detail::kRelaxation) * z;
    z_old = z;
    z = detail::soft_threshold(x_hat + u, 1.0 / penalty.rho);
    u += x_hat - z;

    const double primal = (x - z).norm();
    const double dual = penalty.rho * (z - z_old).norm();
    const double eps_pri = std::sqrt(static_cast<double>(n)) * eps_abs + eps_rel * std::max(x.norm(), z.norm());
    const double eps_dual = std::sqrt(static_cast<double>(n)) * eps_abs + eps_rel * penalty.rho * u.norm();
    admm_converged = primal <= eps_pri && dual <= eps_dual;

    if (admm_converged || (it + 1) % detail::kPolishInterval == 0) {
      auto support = detail::support_of(z);
      if (admm_converged || support != last_support) {
        last_support = std::move(support);
        const Eigen::VectorXd y_admm = rs.pinv_transpose(penalty.rho * u);
        if (auto p = detail::polish(a, b, 0.0, z, feas_abs, &y_admm)) {
          if (!best || p->x.lpNorm<1>() <= best->x.lpNorm<1>()) best = std::move(p);
          if (certified(*best)) {
            certified_early = true;
            ++it;
            break;
          }
        }
      }
    }
    if (admm_converged) {
      ++it;
      break;
    }
    const double f = penalty.update(it + 1, primal, dual);
    if (f != 1.0) u /= f;
  }

  Eigen::VectorXd x_feasible = rs.project(z);
  double dual_bound = detail::dual_objective(a, b, 0.0, rs.pinv_transpose(penalty.rho * u));
  bool ipm_converged = false;
  if (!certified_early && it < tol.max_iterations) {
    // ADMM stalls on degenerate instances; finish with an interior-point
    // solve and re-polish on its support.
    const auto ipm = detail::bp_interior_point(rs, tol.max_iterations - it);
    it += ipm.iterations;
    ipm_converged = ipm.converged;
    dual_bound = std::max(dual_bound, detail::dual_objective(a, b, 0.0, ipm.y));
    if (ipm.x.lpNorm<1>() < x_feasible.lpNorm<1>()) x_feasible = ipm.x;
    const double cut = 1e-9 * std::max(1.0, ipm.x.cwiseAbs().maxCoeff());
    const Eigen::VectorXd sparse = ipm.x.unaryExpr([cut](double v) { return std::abs(v) > cut ? v : 0.0; });
    if (auto p = detail::polish(a, b, 0.0, sparse, feas_abs, &ipm.y)) {
      if (!best || p->x.lpNorm<1>() <= best->x.lpNorm<1>()) best = std::move(p);
    }
  }

  res.iterations = it;
  if (best && best->x.lpNorm<1>() <= x_feasible.lpNorm<1>() + tol.optimality_tol) {
    res.solution = best->x;
    res.polished = true;
    res.dual_bound = std::max(best->dual, dual_bound);
  } else {
    res.solution = x_feasible;
    res.dual_bound = dual_bound;
  }
  detail::finish(res, a, b);
  const bool certified_gap = res.duality_gap() <= tol.optimality_tol;
  res.status = (certified_gap || admm_converged || ipm_converged) && res.residual_norm <= feas_abs
                   ? SolverStatus::converged
                   : SolverStatus::max_iter;
  return res;
}

/// min |x|_1 subject to |A x - b|_2 <= noise_radius, noise_radius > 0.
inline SolverResult solve_bpdn(const L1Problem& problem) {
  detail::validate(problem);
  const double eps = problem.noise_radius;
  if (!(eps > 0.0)) throw std::invalid_argument("solve_bpdn requires noise_radius > 0; use solve_bp");
  const Eigen::MatrixXd& a = problem.matrix;
  const Eigen::VectorXd& b = problem.rhs;
  const SolverTolerances& tol = problem.tolerances;
  const auto m = a.rows();
  const auto n = a.cols();
  // second term: rounding in evaluating |Ax - b| itself
  const double radius_ok = eps * (1.0 + tol.feasibility_tol) + 1e-13 * (1.0 + b.norm());

  SolverResult res;
  if (b.norm() <= eps) {
    res.solution = Eigen::VectorXd::Zero(n);
    res.status = SolverStatus::converged;
    detail::finish(res, a, b);
    res.dual_bound = 0.0;
    return res;
  }
  const detail::RowSpace rs(a, b);
  const double r_ls = (a * rs.x_ls - b).norm();
  if (r_ls > eps) {
    res.solution = rs.x_ls;
    res.status = SolverStatus::infeasible;
    detail::finish(res, a, b);
    return res;
  }

  // (I + A^T A)^-1 via whichever Gram matrix is smaller.
  const bool wide = m <= n;
  Eigen::LLT<Eigen::MatrixXd> llt(wide ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(m, m) + a * a.transpose())
                                       : Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n) + a.transpose() * a));
  auto solve_x = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (wide) return v - a.transpose() * llt.solve(a * v);
    return llt.solve(v);
  };
  auto project_ball = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    const Eigen::VectorXd d = v - b;
    const double dn = d.norm();
    return dn <= eps ? v : Eigen::VectorXd(b + d * (eps / dn));
  };

  const double scale = std::max(rs.x_ls.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  detail::PenaltyControl penalty{static_cast<double>(n) / std::max(rs.x_ls.lpNorm<1>(), scale)};
  const double eps_abs = 1e-10 * scale;
  const double eps_rel = 1e-9;

  Eigen::VectorXd z = rs.x_ls, w = a * rs.x_ls;
  Eigen::VectorXd u1 = Eigen::VectorXd::Zero(m), u2 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x(n), ax(m), z_old(n), w_old(m);
  std::optional<detail::Polished> best;
  std::vector<Eigen::Index> last_support;
  const double feas_abs = tol.feasibility_tol * (1.0 + b.norm());

  std::size_t it = 0;
  bool admm_converged = false;
  for (; it < tol.max_iterations; ++it) {
    x = solve_x(a.transpose() * (w - u1) + (z - u2));
    ax = a * x;
    const Eigen::VectorXd ax_hat = detail::kRelaxation * ax + (1.0 - detail::kRelaxation) * w;
    const Eigen::VectorXd x_hat = detail::kRelaxation * x + (1.0 - detail::kRelaxation) * z;
    w_old = w;
    z_old = z;
    w = project_ball(ax_hat + u1);
    z = detail::soft_threshold(x_hat + u2, 1.0 / penalty.rho);
    u1 += ax_hat - w;
    u2 += x_hat - z;

    const double primal = std::sqrt((ax - w).squaredNorm() + (x - z).squaredNorm());
    const double dual = penalty.rho * (a.transpose() * (w - w_old) + (z - z_old)).norm();
    const double dim = std::sqrt(static_cast<double>(m + n));
    const double eps_pri = dim * eps_abs + eps_rel * std::max({ax.norm(), x.norm(), w.norm(), z.norm()});
    const double eps_dual = dim * eps_abs + eps_rel * penalty.rho * (a.transpose() * u1 + u2).norm();
    admm_converged = primal <= eps_pri && dual <= eps_dual;

    if (admm_converged || (it + 1) % detail::kPolishInterval == 0) {
      auto support = detail::support_of(z);
      if (admm_converged || support != last_support) {
        last_support = std::move(support);
        if (auto p = detail::polish(a, b, eps, z, feas_abs)) {
          if (!best || p->x.lpNorm<1>() <= best->x.lpNorm<1>()) best = std::move(p);
          if (best->x.lpNorm<1>() - best->dual <= tol.optimality_tol) {
            ++it;
            break;
          }
        }
      }
    }
    if (admm_converged) {
      ++it;
      break;
    }
    const double f = penalty.update(it + 1, primal, dual);
    if (f != 1.0) {
      u1 /= f;
      u2 /= f;
    }
  }
  res.iterations = it;

  if (!best || best->x.lpNorm<1>() - best->dual > tol.optimality_tol) {
    // Small radii leave ADMM creeping along the ball boundary; the BP
    // support is then usually the BPDN support.
    L1Problem bp_problem{a, b, 0.0, tol};
    const SolverResult bp = solve_bp(bp_problem);
    res.iterations += bp.iterations;
    if (auto p = detail::polish(a, b, eps, bp.solution, feas_abs)) {
      if (!best || p->x.lpNorm<1>() <= best->x.lpNorm<1>()) best = std::move(p);
    }
  }

  // Pull the sparse iterate into the residual ball along the segment towards
  // the least-squares point.
  Eigen::VectorXd candidate = z;
  if ((a * candidate - b).norm() > eps) {
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 80; ++k) {
      const double mid = 0.5 * (lo + hi);
      if ((a * (z + mid * (rs.x_ls - z)) - b).norm() <= eps) hi = mid; else lo = mid;
    }
    candidate = z + hi * (rs.x_ls - z);
  }
  // y = -rho u1 satisfies A^T y = rho u2 at a fixed point.
  const double admm_dual = detail::dual_objective(a, b, eps, -penalty.rho * u1);
  if (best && best->x.lpNorm<1>() <= candidate.lpNorm<1>() + tol.optimality_tol) {
    res.solution = best->x;
    res.polished = true;
    res.dual_bound = std::max(best->dual, admm_dual);
  } else {
    res.solution = candidate;
    res.dual_bound = admm_dual;
  }
  detail::finish(res, a, b);
  const bool certified_gap = res.duality_gap() <= tol.optimality_tol;
  res.status = (certified_gap || admm_converged) && res.residual_norm <= radius_ok ? SolverStatus::converged
                                                                                   : SolverStatus::max_iter;
  return res;
}

/// Dispatches on the noise radius.
inline SolverResult solve_l1(const L1Problem& problem) {
  return problem.noise_radius > 0.0 ? solve_bpdn(problem) : solve_bp(problem);
}

// ---------------------------------------------------------------------------
// Exhaustive l0 search

struct FeasibleSupport {
  std::vector<std::size_t> support;  // 0-based column indices, ascending
  Eigen::VectorXd x;
  double l1 = 0.0;
};

struct L0Solution {
  Eigen::VectorXd x;
  std::vector<std::size_t> support;
  std::size_t l0 = 0;
  // Only one support of the minimal cardinality admits an exact solution.
  bool unique = false;
};

namespace detail {

inline void check_l0_guard(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, std::size_t max_support) {
  if (a.cols() > 20) throw std::invalid_argument("l0 search is limited to n <= 20 columns");
  if (max_support > 6) throw std::invalid_argument("l0 search is limited to supports of size <= 6");
  if (b.size() != a.rows()) throw std::invalid_argument("rhs length does not match matrix rows");
}

// Least squares on a support; empty when rank deficient or the residual is too large.
inline std::optional<Eigen::VectorXd> exact_on_support(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                                       const std::vector<std::size_t>& s, double feas_abs) {
  if (s.empty()) {
    if (b.norm() <= feas_abs) return Eigen::VectorXd::Zero(a.cols());
    return std::nullopt;
  }
  Eigen::MatrixXd as(a.rows(), static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) as.col(static_cast<Eigen::Index>(i)) = a.col(static_cast<Eigen::Index>(s[i]));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(as);
  if (qr.rank() < static_cast<Eigen::Index>(s.size())) return std::nullopt;
  const Eigen::VectorXd xs = qr.solve(b);
  if ((as * xs - b).norm() > feas_abs) return std::nullopt;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t i = 0; i < s.size(); ++i) x(static_cast<Eigen::Index>(s[i])) = xs(static_cast<Eigen::Index>(i));
  return x;
}

// Calls f(support) for every k-subset of {0..n-1} in lexicographic order.
template <typename F>
void for_each_subset(std::size_t n, std::size_t k, F&& f) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    f(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

/// Every support of size <= max_support (n <= 20, max_support <= 6) on which
/// A x = b has an exact full-rank solution.
inline std::vector<FeasibleSupport> enumerate_feasible_supports(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                                                std::size_t max_support,
                                                                double feasibility_tol = 1e-7) {
  detail::check_l0_guard(a, b, max_support);
  const double feas_abs = feasibility_tol * (1.0 + b.norm());
  std::vector<FeasibleSupport> out;
  for (std::size_t k = 0; k <= max_support; ++k) {
    detail::for_each_subset(static_cast<std::size_t>(a.cols()), k, [&](const std::vector<std::size_t>& s) {
      if (auto x = detail::exact_on_support(a, b, s, feas_abs)) out.push_back({s, *x, x->lpNorm<1>()});
    });
  }
  return out;
}

/// Sparsest exact solution by increasing support size; nullopt when none
/// exists up to max_support.
inline std::optional<L0Solution> l0_oracle(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                           std::size_t max_support, double feasibility_tol = 1e-7) {
  detail::check_l0_guard(a, b, max_support);
  const double feas_abs = feasibility_tol * (1.0 + b.norm());
  for (std::size_t k = 0; k <= max_support; ++k) {
    std::optional<L0Solution> found;
    std::size_t count = 0;
    detail::for_each_subset(static_cast<std::size_t>(a.cols()), k, [&](const std::vector<std::size_t>& s) {
      if (auto x = detail::exact_on_support(a, b, s, feas_abs)) {
        ++count;
        if (!found) found = L0Solution{*x, s, k, false};
      }
    });
    if (found) {
      found->unique = count == 1;
      return found;
    }
  }
  return std::nullopt;
}

}  // namespace sparsid
