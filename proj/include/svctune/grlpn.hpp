#pragma once

// Outer driver: solves the relaxed problem for a geometrically shrinking
// relaxation parameter, warm-starting each round from the previous iterate,
// until the complementarity violation is small. Also provides the one-shot
// fixed-relaxation baseline, the initialization recipe, and post-solve
// feature thresholding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "svctune/bench.hpp"
#include "svctune/dataio.hpp"
#include "svctune/lpnewton.hpp"
#include "svctune/mpec.hpp"
#include "svctune/svcqp.hpp"

namespace svctune {

enum class EpsMode { Constant, Theory };

struct SolverConfig {
  double tau0 = 0.1;
  double tau_min = 1e-8;
  double sigma2 = 0.1;   // relaxation shrink factor per outer round
  double sigma1 = 1e-2;  // line-search slope fraction
  double theta = 0.5;    // line-search backtrack ratio
  int max_backtracks = 50;
  double eps_inner = 1e-2;  // inner tolerance; Theory mode caps it by tau^2
  double vio_stop = 1e-3;
  // Theory mode shrinks the tolerance with the relaxation (eps_k =
  // min(eps_inner, tau_k^2)), which the outer convergence result needs; a
  // constant tolerance leaves every round after tau < eps with nothing to do.
  EpsMode eps_mode = EpsMode::Theory;
  MpecBounds bounds;  // used when assembling a problem from a config
  int max_outer = 20;
  int max_inner = 500;
  std::uint64_t seed = 0;  // governs data splitting in the front end
  bool lp_warm_start = false;

  void validate() const {
    if (!(tau_min > 0.0) || !(tau_min < tau0))
      throw std::invalid_argument("config: need 0 < tau_min < tau0");
    auto unit = [](double x) { return x > 0.0 && x < 1.0; };
    if (!unit(sigma2) || !unit(sigma1) || !unit(theta))
      throw std::invalid_argument("config: sigma1, sigma2, theta must lie in (0,1)");
    if (!(vio_stop > 0.0))
      throw std::invalid_argument("config: vio_stop must be positive");
    if (max_outer < 1 || max_inner < 1 || max_backtracks < 0)
      throw std::invalid_argument("config: iteration caps must be positive");
  }
};

struct OuterTraceRow {
  int k = 0;
  double tau = 0;
  double eps = 0;
  int inner_iters = 0;
  double resid = 0;  // final inner residual of the round
  double vio = 0;    // complementarity violation after the round
  InnerStatus status = InnerStatus::IterCap;
};

struct SolveReport {
  VariableVector v_opt;
  double c = 0;         // component 0 of the final iterate
  double c_scaled = 0;  // refit adjustment: c * K/(K-1)
  Vec w_bar;
  std::vector<Vec> per_fold_w;
  double vio = kInf;
  double cv_error = 1.0;
  bool has_test = false;
  TestErrorResult test;  // valid when has_test
  double tau_final = 0;  // relaxation level of the last round
  Vec w_bar_sparse;      // w_bar after thresholding at sqrt(tau_final)
  std::vector<Eigen::Index> kept;
  Vec w_refit;  // boxed fit on the full CV set at c_scaled, w_bar_sparse
  bool refit_failed = false;
  int outer_iters = 0;
  std::vector<OuterTraceRow> outer_trace;
  std::vector<std::vector<InnerTraceRow>> inner_rounds;
  double wall_time = 0;  // seconds
  long size = 0;         // unknown count q of the residual system
  MfcqReport diagnostics;
};

// Complementarity violation: |min(G, H)|_inf.
inline double vio(const Vec& G, const Vec& H) {
  return inf_norm(G.cwiseMin(H));
}

inline double vio(const MpecProblem& p, const Vec& v) {
  return vio(p.eval_G(v), p.eval_H(v));
}

struct ThresholdResult {
  Vec w_bar;
  std::vector<Eigen::Index> kept;
};

// Features whose bound ends below sqrt(tau_final) are deemed irrelevant.
inline ThresholdResult threshold_features(const Vec& w_bar, double tau_final) {
  if (!(tau_final > 0.0))
    throw std::invalid_argument("threshold: tau must be positive");
  const double cut = std::sqrt(tau_final);
  ThresholdResult r;
  r.w_bar = w_bar;
  for (Eigen::Index j = 0; j < w_bar.size(); ++j) {
    if (w_bar[j] < cut)
      r.w_bar[j] = 0.0;
    else
      r.kept.push_back(j);
  }
  return r;
}

namespace grdetail {

inline Mat rows_of(const Mat& x, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

inline Vec labels_of(const IVec& y, const std::vector<int>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(y[idx[i]]);
  return out;
}

inline void check_folds(const Dataset& data, const CvSplit& split) {
  for (int t = 0; t < split.K; ++t) {
    auto both_labels = [&](const std::vector<int>& idx) {
      bool pos = false, neg = false;
      for (int i : idx) (data.y[i] > 0 ? pos : neg) = true;
      return pos && neg;
    };
    if (!both_labels(split.folds[static_cast<size_t>(t)]))
      throw std::runtime_error(
          "degenerate split: fold " + std::to_string(t + 1) +
          " holds a single class; every fold needs points of both labels");
    if (!both_labels(split.training_indices(t)))
      throw std::runtime_error(
          "degenerate split: training set of fold " + std::to_string(t + 1) +
          " holds a single class; every fold needs points of both labels");
  }
}

inline Vec train_or_best(const Mat& x, const Vec& y, double c) {
  try {
    return train_unbounded(x, y, c).w;
  } catch (const SvcTrainError& e) {
    return e.best().w;
  }
}

}  // namespace grdetail

// Builds the starting iterate: a quickly cross-validated C, bounds from an
// unconstrained fit, per-fold duals from boxed fits, slacks from the sign
// rule, and multipliers at their least-effort feasible values. The result
// always lies in the feasible set of the relaxed system.
inline IterateZ initialize(const MpecProblem& p, const Dataset& data,
                           const CvSplit& split, const SolverConfig& cfg) {
  const MpecDims& d = p.dims();
  const MpecBounds& bounds = p.bounds();

  std::vector<Mat> xt(static_cast<size_t>(d.K)), xv(static_cast<size_t>(d.K));
  std::vector<Vec> yt(static_cast<size_t>(d.K)), yv(static_cast<size_t>(d.K));
  for (int t = 0; t < d.K; ++t) {
    const std::vector<int> tr = split.training_indices(t);
    xt[static_cast<size_t>(t)] = grdetail::rows_of(data.x, tr);
    yt[static_cast<size_t>(t)] = grdetail::labels_of(data.y, tr);
    xv[static_cast<size_t>(t)] =
        grdetail::rows_of(data.x, split.folds[static_cast<size_t>(t)]);
    yv[static_cast<size_t>(t)] =
        grdetail::labels_of(data.y, split.folds[static_cast<size_t>(t)]);
  }

  // Step 1: pick C by quick unconstrained cross-validation over the scaled
  // decade grid (1/((K-1) m2)) * {1e-2 .. 1e2}.
  const double scale =
      1.0 / (static_cast<double>(d.K - 1) * static_cast<double>(d.m2));
  double best_c = 0.0;
  double best_err = kInf;
  for (int e = -2; e <= 2; ++e) {
    const double cand = std::clamp(scale * std::pow(10.0, e), bounds.c_lb,
                                   bounds.c_ub);
    long wrong = 0, total = 0;
    for (int t = 0; t < d.K; ++t) {
      const Vec w = grdetail::train_or_best(xt[static_cast<size_t>(t)],
                                            yt[static_cast<size_t>(t)], cand);
      const Vec scores = xv[static_cast<size_t>(t)] * w;
      for (Eigen::Index i = 0; i < scores.size(); ++i)
        if ((scores[i] >= 0.0 ? 1.0 : -1.0) != yv[static_cast<size_t>(t)][i])
          ++wrong;
      total += scores.size();
    }
    const double err = static_cast<double>(wrong) / static_cast<double>(total);
    // Ties go to the larger C: its unconstrained fit yields informative
    // (nonzero) starting bounds, where a needlessly small C collapses w_bar
    // toward zero and the final thresholding step then erases every feature.
    if (err < best_err || (err == best_err && cand > best_c)) {
      best_err = err;
      best_c = cand;
    }
  }

  // Step 2: bounds from one unconstrained fit on the whole CV set; features
  // never observed in the file fall back to the neutral 0.5.
  std::vector<int> all_cv;
  for (const std::vector<int>& f : split.folds)
    all_cv.insert(all_cv.end(), f.begin(), f.end());
  const Vec w_full = grdetail::train_or_best(grdetail::rows_of(data.x, all_cv),
                                             grdetail::labels_of(data.y, all_cv),
                                             best_c);
  VariableVector vv;
  vv.C = best_c;
  vv.w_bar = Vec(d.n);
  for (Eigen::Index j = 0; j < d.n; ++j) {
    double wj = std::min(std::abs(w_full[j]), bounds.wbar_ub[j]);
    if (j < static_cast<Eigen::Index>(data.feature_observed.size()) &&
        !data.feature_observed[static_cast<size_t>(j)])
      wj = 0.5;
    vv.w_bar[j] = std::clamp(wj, bounds.wbar_lb[j], bounds.wbar_ub[j]);
  }

  // Step 3: per-fold boxed fits give alpha and, through it, the fold
  // weights; training failure falls back to the zero model.
  vv.zeta = Vec::Zero(d.K * d.m1);
  vv.z = Vec::Zero(d.K * d.m1);
  vv.alpha = Vec::Zero(d.K * d.m2);
  vv.xi = Vec::Zero(d.K * d.m2);
  vv.beta = Vec::Zero(d.K * d.n);
  vv.gamma = Vec::Zero(d.K * d.n);
  for (int t = 0; t < d.K; ++t) {
    Vec alpha_t = Vec::Zero(d.m2);
    try {
      const SvcModel m = train_boxed(xt[static_cast<size_t>(t)],
                                     yt[static_cast<size_t>(t)], best_c,
                                     vv.w_bar);
      alpha_t = m.alpha.cwiseMax(0.0).cwiseMin(best_c);
    } catch (const SvcTrainError&) {
      // keep alpha = 0: the zero model is always feasible
    }
    vv.alpha.segment(t * d.m2, d.m2) = alpha_t;

    // Fold weight as the problem reconstructs it, pulled back into the box
    // through beta/gamma so the bound rows stay feasible.
    Vec w_t = p.B(t).transpose() * alpha_t;
    for (Eigen::Index j = 0; j < d.n; ++j) {
      if (w_t[j] > vv.w_bar[j]) {
        vv.gamma[t * d.n + j] = w_t[j] - vv.w_bar[j];
        w_t[j] = vv.w_bar[j];
      } else if (w_t[j] < -vv.w_bar[j]) {
        vv.beta[t * d.n + j] = -vv.w_bar[j] - w_t[j];
        w_t[j] = -vv.w_bar[j];
      }
    }

    // Hinge slacks for the training rows, sign-rule slacks for validation.
    const Vec train_margins = p.B(t) * w_t;
    vv.xi.segment(t * d.m2, d.m2) =
        (1.0 - train_margins.array()).max(0.0).matrix();
    const Vec val_margins = p.A(t) * w_t;
    for (Eigen::Index i = 0; i < d.m1; ++i) {
      if (val_margins[i] < 0.0) {
        vv.zeta[t * d.m1 + i] = 1.0;
        vv.z[t * d.m1 + i] = -val_margins[i];
      }
    }
  }

  // Multipliers: the per-fold QP duals do not map onto the relaxed system's
  // multipliers in any clean way, so they start at zero (feasible, and the
  // inner solver recovers them in the first round).
  const AffineMpec compact = p.compact();
  IterateZ z0;
  z0.v = vv.flatten();
  z0.lambda_g = Vec::Zero(compact.n_ineq());
  z0.lambda_G = Vec::Zero(compact.n_comp());
  z0.lambda_H = Vec::Zero(compact.n_comp());
  z0.lambda_GH = Vec::Zero(compact.n_comp());
  const Vec G = compact.eval_G(z0.v);
  const Vec H = compact.eval_H(z0.v);
  z0.u = (cfg.tau0 - (G.array() * H.array())).max(0.0).matrix();
  return z0;
}

namespace grdetail {

inline SolveReport run_rounds(const MpecProblem& p, const Dataset& data,
                              const CvSplit& split, const SolverConfig& cfg,
                              double tau_start, int rounds_cap) {
  cfg.validate();
  check_folds(data, split);
  const Stopwatch timer;

  const AffineMpec compact = p.compact();
  IterateZ z = initialize(p, data, split, cfg);

  LpNewtonOptions inner_opts;
  inner_opts.sigma1 = cfg.sigma1;
  inner_opts.theta = cfg.theta;
  inner_opts.max_backtracks = cfg.max_backtracks;
  inner_opts.max_inner = cfg.max_inner;
  inner_opts.lp_warm_start = cfg.lp_warm_start;

  SolveReport rep;
  double tau = tau_start;
  for (int k = 0; k < rounds_cap; ++k) {
    const double eps =
        cfg.eps_mode == EpsMode::Theory ? std::min(cfg.eps_inner, tau * tau)
                                        : cfg.eps_inner;
    InnerResult r;
    try {
      r = inner_solve(compact, z, tau, eps, inner_opts);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("outer round " + std::to_string(k + 1) +
                               " (tau = " + num_str(tau) + "): " + e.what());
    }
    z = r.z;
    const double violation = vio(p, z.v);
    rep.outer_trace.push_back(
        {k, tau, eps, r.iters, r.resid_inf, violation, r.status});
    rep.inner_rounds.push_back(std::move(r.trace));
    rep.outer_iters = k + 1;

    if (violation < cfg.vio_stop) break;
    if (tau <= cfg.tau_min) break;
    if (k + 1 >= rounds_cap) break;

    // Shrink the relaxation and re-project the slack so next round's slack
    // block starts with zero residual.
    tau *= cfg.sigma2;
    const Vec G = compact.eval_G(z.v);
    const Vec H = compact.eval_H(z.v);
    z.u = (tau - (G.array() * H.array())).max(0.0).matrix();
  }

  const MpecDims& d = p.dims();
  rep.v_opt = VariableVector::split(d, z.v);
  rep.c = z.v[0];
  rep.c_scaled =
      rep.c * static_cast<double>(d.K) / static_cast<double>(d.K - 1);
  rep.w_bar = rep.v_opt.w_bar;
  rep.per_fold_w = p.reconstruct_w(z.v);
  rep.vio = vio(p, z.v);
  rep.cv_error = cv_error(p, z.v);
  rep.tau_final = rep.outer_trace.back().tau;

  // Reported model: threshold the bounds at sqrt(tau_final), then refit one
  // boxed classifier on the full CV set with the upscaled C. Zero bounds
  // eliminate their features exactly.
  const ThresholdResult thr = threshold_features(rep.w_bar, rep.tau_final);
  rep.w_bar_sparse = thr.w_bar;
  rep.kept = thr.kept;
  std::vector<int> all_cv;
  for (const std::vector<int>& f : split.folds)
    all_cv.insert(all_cv.end(), f.begin(), f.end());
  rep.w_refit = benchdetail::train_with_levels(
      rows_of(data.x, all_cv),
      [&] {
        IVec yy(static_cast<Eigen::Index>(all_cv.size()));
        for (size_t i = 0; i < all_cv.size(); ++i)
          yy[static_cast<Eigen::Index>(i)] = data.y[all_cv[i]];
        return yy;
      }(),
      rep.c_scaled, rep.w_bar_sparse, &rep.refit_failed);
  if (!split.test_indices.empty()) {
    rep.has_test = true;
    rep.test = test_error(rep.w_refit, rows_of(data.x, split.test_indices),
                          [&] {
                            IVec yy(static_cast<Eigen::Index>(
                                split.test_indices.size()));
                            for (size_t i = 0; i < split.test_indices.size(); ++i)
                              yy[static_cast<Eigen::Index>(i)] =
                                  data.y[split.test_indices[i]];
                            return yy;
                          }());
  }
  rep.size = IterateZ::q_bar(compact);
  rep.diagnostics = p.mfcq_diagnostic(z.v);
  rep.wall_time = timer.seconds();
  return rep;
}

}  // namespace grdetail

inline SolveReport solve(const MpecProblem& p, const Dataset& data,
                         const CvSplit& split, const SolverConfig& cfg) {
  return grdetail::run_rounds(p, data, split, cfg, cfg.tau0, cfg.max_outer);
}

// One round at a fixed relaxation value; the schedule never shrinks.
inline SolveReport solve_inlp(const MpecProblem& p, const Dataset& data,
                              const CvSplit& split, const SolverConfig& cfg,
                              double tau_fixed) {
  if (!(tau_fixed > 0.0))
    throw std::invalid_argument("fixed-relaxation solve: tau must be positive");
  SolverConfig one = cfg;
  one.tau0 = tau_fixed;
  one.tau_min = std::min(cfg.tau_min, tau_fixed / 2.0);
  return grdetail::run_rounds(p, data, split, one, tau_fixed, 1);
}

}  // namespace svctune
