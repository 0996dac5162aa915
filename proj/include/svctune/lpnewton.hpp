#pragma once

// Inner solver for one relaxation level: a damped Newton method for the
// piecewise-smooth system F_tau(z) = 0 whose step is computed by a linear
// program instead of a linear solve. At the current iterate the subproblem
//
//   min eta  s.t.  |F + J d|_inf <= eta |F|^2,  |d|_inf <= eta |F|,
//                  z + d stays feasible,  eta >= 0
//
// is always solvable ((eta, d) = (1/|F|, 0) is feasible), tolerates rank
// deficiency in J, and near a root reproduces the Newton step, giving local
// quadratic convergence without nonsingularity assumptions.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svctune/lp.hpp"
#include "svctune/residual.hpp"

namespace svctune {

struct LpNewtonOptions {
  double sigma1 = 1e-2;     // fraction of the model decrease Armijo demands
  double theta = 0.5;       // step shrink factor between backtracks
  int max_backtracks = 50;  // largest power of theta tried
  int max_inner = 500;
  double lp_feas_tol = 1e-9;
  long lp_max_pivots = -1;  // -1: solver default
  LpRoute lp_route = LpRoute::Auto;
  // Reusing the previous iteration's basis is off by default: cold solves
  // keep the step LP self-contained and reproducible route-for-route. Flip
  // on for large instances where the subproblems dominate runtime.
  bool lp_warm_start = false;
};

enum class InnerStatus {
  ResidualZero,     // F(z) == 0 exactly
  ToleranceMet,     // |F(z)| <= eps
  DeltaZero,        // model predicts no decrease; z is a stationary point
  StallLineSearch,  // no backtracking power satisfied the Armijo test
  IterCap           // max_inner steps taken
};

inline const char* to_string(InnerStatus s) {
  switch (s) {
    case InnerStatus::ResidualZero: return "ResidualZero";
    case InnerStatus::ToleranceMet: return "ToleranceMet";
    case InnerStatus::DeltaZero: return "DeltaZero";
    case InnerStatus::StallLineSearch: return "StallLineSearch";
    case InnerStatus::IterCap: return "IterCap";
  }
  return "?";
}

struct InnerTraceRow {
  int iter = 0;
  double resid_inf = 0;  // |F| at the start of the iteration
  double eta = 0;
  int backtracks = 0;  // accepted power m, step length theta^m
  double delta = 0;    // model decrease, negative when progress is possible
  long lp_pivots = 0;
  Eigen::Index ties = 0;  // min-rows where both branches coincided
  ResidualBlockNorms blocks;
};

struct InnerResult {
  InnerStatus status = InnerStatus::IterCap;
  IterateZ z;
  double resid_inf = 0;
  int iters = 0;
  std::vector<InnerTraceRow> trace;
};

// Step LP over x = (eta, d). Requires |F| > 0; at a root there is no
// subproblem to pose.
inline SparseLp build_subproblem(const AffineMpec& p, const IterateZ& z,
                                 const Vec& F, const SpMat& J) {
  const Eigen::Index q = IterateZ::q_bar(p);
  const double nf = inf_norm(F);
  if (!(nf > 0.0))
    throw std::invalid_argument("step subproblem: residual is zero");
  const double nf2 = nf * nf;
  const Eigen::Index nv = p.n_v(), ng = p.n_ineq(), m = p.n_comp();

  SparseLp lp;
  lp.n = static_cast<int>(1 + q);
  lp.c = Vec::Zero(lp.n);
  lp.c[0] = 1.0;
  lp.lb = Vec::Constant(lp.n, -kInf);
  lp.ub = Vec::Constant(lp.n, kInf);
  lp.lb[0] = 0.0;
  // Multiplier and slack components may not step below zero; the v block is
  // kept feasible by explicit rows on g, G, H below.
  const Vec zf = z.flatten();
  for (Eigen::Index i = 0; i < ng + 4 * m; ++i) lp.lb[1 + nv + i] = -zf[nv + i];

  const Eigen::Index n_rows = 4 * q + ng + 2 * m;
  lp.rows.resize(static_cast<size_t>(n_rows));
  lp.b_ub = Vec::Zero(n_rows);

  // |F + J d|_inf <= eta |F|^2, one pair of rows per residual entry.
  Eigen::SparseMatrix<double, Eigen::RowMajor> Jr(J);
  for (Eigen::Index i = 0; i < q; ++i) {
    auto& pos = lp.rows[static_cast<size_t>(i)];
    auto& neg = lp.rows[static_cast<size_t>(q + i)];
    pos.emplace_back(0, -nf2);
    neg.emplace_back(0, -nf2);
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Jr, i);
         it; ++it) {
      pos.emplace_back(static_cast<int>(1 + it.col()), it.value());
      neg.emplace_back(static_cast<int>(1 + it.col()), -it.value());
    }
    lp.b_ub[i] = -F[i];
    lp.b_ub[q + i] = F[i];
  }
  // |d|_inf <= eta |F|.
  for (Eigen::Index i = 0; i < q; ++i) {
    lp.rows[static_cast<size_t>(2 * q + i)] = {{0, -nf},
                                               {static_cast<int>(1 + i), 1.0}};
    lp.rows[static_cast<size_t>(3 * q + i)] = {{0, -nf},
                                               {static_cast<int>(1 + i), -1.0}};
  }
  // g, G, H stay nonnegative along the step: -R dv <= g(v), etc.
  const Vec g = p.eval_g(z.v), G = p.eval_G(z.v), H = p.eval_H(z.v);
  auto add_fun_rows = [&lp](const SpMat& Arows, const Vec& rhs,
                            Eigen::Index row0) {
    for (Eigen::Index k = 0; k < Arows.outerSize(); ++k)
      for (SpMat::InnerIterator it(Arows, k); it; ++it)
        lp.rows[static_cast<size_t>(row0 + it.row())].emplace_back(
            static_cast<int>(1 + it.col()), -it.value());
    for (Eigen::Index i = 0; i < rhs.size(); ++i) lp.b_ub[row0 + i] = rhs[i];
  };
  add_fun_rows(p.R, g, 4 * q);
  add_fun_rows(p.P, G, 4 * q + ng);
  add_fun_rows(p.Q, H, 4 * q + ng + m);
  return lp;
}

namespace lpnewtondetail {

// The step LP solved internally. The substitution (s, p) = (eta |F|, d / |F|)
// keeps the residual rows at unit scale no matter how small the residual
// gets: the canonical form couples coefficients of size |F|^2 with rows of
// size one, and once |F|^2 falls under the simplex feasibility tolerance the
// solver is free to ignore the residual rows entirely (returning useless
// eta ~ 0 steps).
//
// (s, p) = (1, 0) is always feasible, so s* <= 1. On top of the substitution
// the step is boxed, |p|_inf <= box; inside the box the feasible set matches
// build_subproblem's exactly, while bounds and right-hand sides that only
// bind outside it (raw values grow like 1/|F|) are clamped to keep the
// solver's rhs scale tame.
inline SparseLp build_scaled_subproblem(const AffineMpec& p, const IterateZ& z,
                                        const Vec& F, const SpMat& J) {
  const Eigen::Index q = IterateZ::q_bar(p);
  const double nf = inf_norm(F);
  if (!(nf > 0.0))
    throw std::invalid_argument("step subproblem: residual is zero");
  const Eigen::Index nv = p.n_v(), ng = p.n_ineq(), m = p.n_comp();

  SparseLp lp;
  lp.n = static_cast<int>(1 + q);
  lp.c = Vec::Zero(lp.n);
  lp.c[0] = 1.0;
  // Box on the scaled step. The true trust rows already imply
  // |p|_inf <= s/|F| <= 1/|F| at any optimum, so a box this wide is almost
  // never the binding constraint; it exists to keep the step O(|F|) even when
  // |F| drops so far that the trust rows' coefficients fall below the
  // solver's pivot tolerance.
  const double box = 1e3;
  lp.lb = Vec::Constant(lp.n, -box);
  lp.ub = Vec::Constant(lp.n, box);
  lp.lb[0] = 0.0;
  lp.ub[0] = kInf;
  const Vec zf = z.flatten();
  // Multipliers and u stay nonnegative: p_i >= -z_i/|F|. Values that earlier
  // clamps left a hair below zero count as zero so that p = 0 stays feasible
  // and the dust cannot grow.
  for (Eigen::Index i = 0; i < ng + 4 * m; ++i)
    lp.lb[1 + nv + i] =
        std::max(-std::max(zf[nv + i], 0.0) / nf, -box);

  const Eigen::Index n_rows = 4 * q + ng + 2 * m;
  lp.rows.resize(static_cast<size_t>(n_rows));
  lp.b_ub = Vec::Zero(n_rows);

  // |F/|F| + J p|_inf <= s, one pair of rows per residual entry.
  Eigen::SparseMatrix<double, Eigen::RowMajor> Jr(J);
  for (Eigen::Index i = 0; i < q; ++i) {
    auto& pos = lp.rows[static_cast<size_t>(i)];
    auto& neg = lp.rows[static_cast<size_t>(q + i)];
    pos.emplace_back(0, -1.0);
    neg.emplace_back(0, -1.0);
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Jr, i);
         it; ++it) {
      pos.emplace_back(static_cast<int>(1 + it.col()), it.value());
      neg.emplace_back(static_cast<int>(1 + it.col()), -it.value());
    }
    lp.b_ub[i] = -F[i] / nf;
    lp.b_ub[q + i] = F[i] / nf;
  }
  // |d|_inf <= eta |F| reads |F| |p|_inf <= s in the scaled variables.
  for (Eigen::Index i = 0; i < q; ++i) {
    lp.rows[static_cast<size_t>(2 * q + i)] = {{0, -1.0},
                                               {static_cast<int>(1 + i), nf}};
    lp.rows[static_cast<size_t>(3 * q + i)] = {{0, -1.0},
                                               {static_cast<int>(1 + i), -nf}};
  }
  // g, G, H stay nonnegative along the step: -R p_v <= g(v)/|F|. Values a
  // hair below zero count as zero, and the rhs is capped a healthy multiple
  // past the row's reach over a unit step. The cap keeps the solver's rhs
  // scale tame; it can only tighten rows so slack they could not bind on any
  // Newton-sized step anyway.
  const Vec g = p.eval_g(z.v), G = p.eval_G(z.v), H = p.eval_H(z.v);
  auto add_fun_rows = [&lp, nf](const SpMat& Arows, const Vec& rhs,
                                Eigen::Index row0) {
    Vec reach = Vec::Zero(rhs.size());
    for (Eigen::Index k = 0; k < Arows.outerSize(); ++k)
      for (SpMat::InnerIterator it(Arows, k); it; ++it) {
        lp.rows[static_cast<size_t>(row0 + it.row())].emplace_back(
            static_cast<int>(1 + it.col()), -it.value());
        reach[it.row()] += std::abs(it.value());
      }
    for (Eigen::Index i = 0; i < rhs.size(); ++i)
      lp.b_ub[row0 + i] =
          std::min(std::max(rhs[i], 0.0) / nf, 16.0 * reach[i] + 1.0);
  };
  add_fun_rows(p.R, g, 4 * q);
  add_fun_rows(p.P, G, 4 * q + ng);
  add_fun_rows(p.Q, H, 4 * q + ng + m);
  return lp;
}

// Second-phase step refinement. The step LP's optimum is typically a broad
// face: components that no residual row prices (at a corner of the bilinear
// system whole variable blocks drop out of the linearization) ride along for
// free, and an arbitrary vertex can carry large spurious motion that decides
// which root the iteration tracks. Re-solving with the residual level pinned
// and |p|_1 minimized keeps exactly the motion the decrease needs.
inline SparseLp build_least_norm_lp(const SparseLp& step_lp, double s_star) {
  const int q = step_lp.n - 1;
  SparseLp lp;
  lp.n = step_lp.n + q;
  lp.c = Vec::Zero(lp.n);
  lp.c.tail(q).setOnes();
  lp.lb = Vec::Zero(lp.n);
  lp.ub = Vec::Constant(lp.n, kInf);
  lp.lb.head(step_lp.n) = step_lp.lb;
  lp.ub.head(step_lp.n) = step_lp.ub;

  const size_t base = step_lp.rows.size();
  lp.rows = step_lp.rows;
  lp.rows.resize(base + 1 + 2 * static_cast<size_t>(q));
  lp.b_ub = Vec::Zero(static_cast<Eigen::Index>(lp.rows.size()));
  lp.b_ub.head(static_cast<Eigen::Index>(base)) = step_lp.b_ub;

  // Hold the certified decrease, then majorize each |p_i| by t_i.
  lp.rows[base] = {{0, 1.0}};
  lp.b_ub[static_cast<Eigen::Index>(base)] = s_star;
  for (int i = 0; i < q; ++i) {
    lp.rows[base + 1 + 2 * static_cast<size_t>(i)] = {{1 + i, 1.0},
                                                      {step_lp.n + i, -1.0}};
    lp.rows[base + 2 + 2 * static_cast<size_t>(i)] = {{1 + i, -1.0},
                                                      {step_lp.n + i, -1.0}};
  }
  return lp;
}

}  // namespace lpnewtondetail

struct LineSearchResult {
  bool accepted = false;
  int backtracks = 0;
  IterateZ z;
  Vec F;
  double resid_inf = 0;
};

// Backtracks from the full step until the residual drops by at least
// sigma1 * theta^m * delta (delta < 0). Returns the first accepted point.
inline LineSearchResult line_search(const AffineMpec& p, const IterateZ& z,
                                    double tau, const Vec& d, double delta,
                                    const LpNewtonOptions& opts = {}) {
  const Vec z0 = z.flatten();
  const double f0 = inf_norm(eval_residual(p, z, tau));
  double step = 1.0;
  LineSearchResult r;
  for (int m = 0; m <= opts.max_backtracks; ++m, step *= opts.theta) {
    IterateZ zt = IterateZ::split(p, z0 + step * d);
    Vec Ft = eval_residual(p, zt, tau);
    const double ft = inf_norm(Ft);
    // The bound sits strictly below f0 (delta < 0), so also demanding a
    // strict decrease only filters out steps whose margin rounds away.
    if (ft <= f0 + opts.sigma1 * step * delta && ft < f0) {
      r.accepted = true;
      r.backtracks = m;
      r.z = std::move(zt);
      r.F = std::move(Ft);
      r.resid_inf = ft;
      return r;
    }
  }
  return r;
}

inline InnerResult inner_solve(const AffineMpec& p, const IterateZ& z0,
                               double tau, double eps,
                               const LpNewtonOptions& opts = {}) {
  InnerResult out;
  out.z = z0;
  Vec F = eval_residual(p, out.z, tau);
  out.resid_inf = inf_norm(F);
  LpWarmStart ws;

  for (int j = 0;; ++j) {
    if (out.resid_inf == 0.0) {
      out.status = InnerStatus::ResidualZero;
      return out;
    }
    if (out.resid_inf <= eps) {
      out.status = InnerStatus::ToleranceMet;
      return out;
    }
    if (j >= opts.max_inner) break;

    const ActiveSelection sel = select_active(p, out.z, tau);
    const SpMat J = jacobian(p, out.z, tau, sel);
    const SparseLp lp =
        lpnewtondetail::build_scaled_subproblem(p, out.z, F, J);
    // The scaled subproblem is built for the primal route's row-wise
    // feasibility handling; near convergence its step-bound rows hold
    // coefficients of size |F|, which make dual bases nearly singular.
    const LpRoute route =
        opts.lp_route == LpRoute::Auto ? LpRoute::Primal : opts.lp_route;
    const LpSolution sol =
        solve_lp(lp, opts.lp_feas_tol, opts.lp_max_pivots,
                 opts.lp_warm_start ? &ws : nullptr, route);
    if (sol.status == LpStatus::Infeasible)
      throw std::runtime_error(
          "inner step LP infeasible; the iterate left the feasible set");
    if (sol.status != LpStatus::Optimal) {
      // Pivot cap or numerical stall inside the LP: stop on the best iterate
      // seen (the current one; accepted steps only ever decrease the
      // residual) rather than escalate.
      out.status = InnerStatus::StallLineSearch;
      return out;
    }
    double s = sol.x[0];
    Vec pstep = sol.x.tail(IterateZ::q_bar(p));
    long lp_pivots = sol.pivots;

    // Refine the vertex to the least-norm optimum; any hiccup in the
    // refinement keeps the certified first solution.
    {
      const SparseLp lp2 = lpnewtondetail::build_least_norm_lp(lp, s);
      const LpSolution sol2 =
          solve_lp(lp2, opts.lp_feas_tol, opts.lp_max_pivots, nullptr, route);
      lp_pivots += sol2.pivots;
      if (sol2.status == LpStatus::Optimal) {
        s = sol2.x[0];
        pstep = sol2.x.segment(1, IterateZ::q_bar(p));
      }
    }

    // Map back from the unit-scale variables: eta = s/|F|, d = |F| p.
    const double eta = s / out.resid_inf;
    const Vec d = out.resid_inf * pstep;
    const double delta = -out.resid_inf * (1.0 - s);

    InnerTraceRow row;
    row.iter = j;
    row.resid_inf = out.resid_inf;
    row.eta = eta;
    row.delta = delta;
    row.lp_pivots = lp_pivots;
    row.ties = sel.ties;
    row.blocks = block_norms(p, F);

    if (std::abs(delta) <= 1e-14 * (1.0 + out.resid_inf)) {
      out.trace.push_back(row);
      out.status = InnerStatus::DeltaZero;
      return out;
    }

    const LineSearchResult ls = line_search(p, out.z, tau, d, delta, opts);
    if (!ls.accepted) {
      out.trace.push_back(row);
      out.status = InnerStatus::StallLineSearch;
      return out;  // current iterate is the best seen: steps only decrease
    }
    row.backtracks = ls.backtracks;
    out.trace.push_back(row);
    out.z = ls.z;
    F = ls.F;
    out.resid_inf = ls.resid_inf;
    out.iters = j + 1;
  }
  out.status = InnerStatus::IterCap;
  return out;
}

}  // namespace svctune
