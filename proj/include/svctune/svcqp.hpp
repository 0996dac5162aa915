#pragma once

// Single linear SVC trainer for the box-constrained lower-level problem
//
//   min over (w, xi):  1/2 ||w||^2 + C sum_i xi_i
//   s.t.  y_i (x_i' w) >= 1 - xi_i,  xi_i >= 0,  -wbar <= w <= wbar,
//
// and its unconstrained-weights specialization (wbar = +inf). The margin
// constraints are folded into an exact hinge penalty; an accelerated
// projected-gradient loop on w (with a smoothed hinge whose kink sharpens
// over stages) finds the region, and an active-set cleanup pins the exact
// piece and recovers multipliers by least squares. An independent check of
// the first-order conditions is the sole convergence authority.

#include <cmath>

#include "svctune/common.hpp"

namespace svctune {

struct SvcModel {
  Vec w;      // weights (n)
  Vec xi;     // margin slacks (m2)
  Vec alpha;  // margin-constraint duals (m2), 0 <= alpha <= C
  Vec mu;     // xi >= 0 duals, mu = C - alpha
  Vec beta;   // w >= -wbar duals (n)
  Vec gamma;  // w <= +wbar duals (n)
  double kkt_residual = kInf;
  long iterations = 0;
};

class SvcTrainError : public std::runtime_error {
 public:
  SvcTrainError(const std::string& msg, SvcModel best)
      : std::runtime_error(msg), best_(std::move(best)) {}
  // Best iterate found before giving up (its kkt_residual exceeds tol).
  const SvcModel& best() const { return best_; }

 private:
  SvcModel best_;
};

struct SvcQpOptions {
  double tol = 1e-8;
  long max_iter = 100000;
};

inline double svc_objective(double C, const SvcModel& m) {
  return 0.5 * m.w.squaredNorm() + C * m.xi.sum();
}

// Max violation over stationarity, feasibility, sign constraints and
// complementarity of the first-order conditions. Infinite wbar entries
// contribute nothing when their multiplier is zero.
inline double svc_kkt_residual(const Mat& X, const Vec& y, double C,
                               const Vec& wbar, const SvcModel& m) {
  const Eigen::Index n = X.cols(), l = X.rows();
  double r = 0.0;
  auto bump = [&r](double v) { r = std::max(r, v); };

  // Stationarity: w = X'(alpha.*y) + beta - gamma and mu = C - alpha.
  Vec s = X.transpose() * m.alpha.cwiseProduct(y);
  for (Eigen::Index j = 0; j < n; ++j)
    bump(std::abs(m.w[j] - (s[j] + m.beta[j] - m.gamma[j])));
  for (Eigen::Index i = 0; i < l; ++i)
    bump(std::abs(m.mu[i] - (C - m.alpha[i])));

  // Sign and bound feasibility.
  Vec margin = (y.cwiseProduct(X * m.w).array() - 1.0 + m.xi.array()).matrix();
  for (Eigen::Index i = 0; i < l; ++i) {
    bump(-m.alpha[i]);
    bump(m.alpha[i] - C);
    bump(-m.mu[i]);
    bump(-m.xi[i]);
    bump(-margin[i]);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    bump(-m.beta[j]);
    bump(-m.gamma[j]);
    if (wbar[j] < kInf) bump(std::abs(m.w[j]) - wbar[j]);
  }

  // Complementarity products.
  for (Eigen::Index i = 0; i < l; ++i) {
    bump(std::abs(m.alpha[i] * margin[i]));
    bump(std::abs(m.mu[i] * m.xi[i]));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (m.beta[j] != 0.0) bump(std::abs(m.beta[j] * (m.w[j] + wbar[j])));
    if (m.gamma[j] != 0.0) bump(std::abs(m.gamma[j] * (wbar[j] - m.w[j])));
  }
  return r;
}

namespace svcdetail {

// Everything downstream of alpha is closed form: s = X'(alpha.*y) clips onto
// the box to give w, the clipped excess is exactly the bound multiplier, and
// the slacks are the hinge values.
inline SvcModel assemble_from_alpha(const Mat& X, const Vec& y, double C,
                                    const Vec& wbar, const Vec& alpha) {
  const Eigen::Index n = X.cols();
  SvcModel m;
  m.alpha = alpha;
  Vec s = X.transpose() * alpha.cwiseProduct(y);
  m.w.resize(n);
  m.beta = Vec::Zero(n);
  m.gamma = Vec::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (s[j] < -wbar[j]) {
      m.w[j] = -wbar[j];
      m.beta[j] = -wbar[j] - s[j];
    } else if (s[j] > wbar[j]) {
      m.w[j] = wbar[j];
      m.gamma[j] = s[j] - wbar[j];
    } else {
      m.w[j] = s[j];
    }
  }
  m.xi = (1.0 - (y.cwiseProduct(X * m.w)).array()).cwiseMax(0.0).matrix();
  m.mu = Vec::Constant(alpha.size(), C) - alpha;
  return m;
}

// Pins the margin pieces suggested by `w_est` (alpha=0 off-margin, alpha=C
// inside the margin, least squares on the on-margin rows over the unclipped
// coordinates), assembles a candidate and scores it. Two passes: the second
// re-derives the clip pattern from s(alpha) itself.
inline SvcModel pin_and_score(const Mat& X, const Vec& y, double C,
                              const Vec& wbar, const Vec& w_est, double delta) {
  const Eigen::Index l = X.rows(), n = X.cols();
  Vec margin = (y.cwiseProduct(X * w_est).array() - 1.0).matrix();

  std::vector<Eigen::Index> free_rows;
  Vec alpha = Vec::Zero(l);
  for (Eigen::Index i = 0; i < l; ++i) {
    if (margin[i] < -delta) alpha[i] = C;
    else if (!(margin[i] > delta)) free_rows.push_back(i);
  }

  // Clip pattern: +1 pinned at +wbar, -1 at -wbar, 0 interior.
  std::vector<int> pattern(static_cast<size_t>(n), 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (wbar[j] < kInf && std::abs(w_est[j]) >= wbar[j] * (1.0 - 1e-7))
      pattern[static_cast<size_t>(j)] = w_est[j] >= 0 ? +1 : -1;
  }

  SvcModel best;
  for (int pass = 0; pass < 2; ++pass) {
    const auto nf = static_cast<Eigen::Index>(free_rows.size());
    if (nf > 0) {
      std::vector<Eigen::Index> inner;  // unclipped coordinates
      for (Eigen::Index j = 0; j < n; ++j)
        if (pattern[static_cast<size_t>(j)] == 0) inner.push_back(j);

      // s restricted to inner coords from the alpha=C block.
      Vec s0 = Vec::Zero(static_cast<Eigen::Index>(inner.size()));
      for (Eigen::Index i = 0; i < l; ++i) {
        if (alpha[i] != C) continue;
        bool is_free = false;
        for (Eigen::Index f : free_rows) is_free |= (f == i);
        if (is_free) continue;
        for (size_t jj = 0; jj < inner.size(); ++jj)
          s0[static_cast<Eigen::Index>(jj)] += C * y[i] * X(i, inner[jj]);
      }

      Mat M(nf, nf);
      Vec rhs(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        const Eigen::Index i = free_rows[static_cast<size_t>(a)];
        double r = 1.0;
        for (Eigen::Index j = 0; j < n; ++j)
          if (pattern[static_cast<size_t>(j)] != 0)
            r -= y[i] * X(i, j) * pattern[static_cast<size_t>(j)] * wbar[j];
        for (size_t jj = 0; jj < inner.size(); ++jj)
          r -= y[i] * X(i, inner[jj]) * s0[static_cast<Eigen::Index>(jj)];
        rhs[a] = r;
        for (Eigen::Index bq = 0; bq < nf; ++bq) {
          const Eigen::Index k = free_rows[static_cast<size_t>(bq)];
          double g = 0.0;
          for (size_t jj = 0; jj < inner.size(); ++jj)
            g += X(i, inner[jj]) * X(k, inner[jj]);
          M(a, bq) = y[i] * y[k] * g;
        }
      }
      Eigen::CompleteOrthogonalDecomposition<Mat> cod(M);
      Vec af = cod.solve(rhs);
      for (Eigen::Index a = 0; a < nf; ++a)
        alpha[free_rows[static_cast<size_t>(a)]] =
            std::clamp(af[a], 0.0, C);
    }

    SvcModel cand = assemble_from_alpha(X, y, C, wbar, alpha);
    cand.kkt_residual = svc_kkt_residual(X, y, C, wbar, cand);
    if (cand.kkt_residual < best.kkt_residual) best = std::move(cand);
    if (best.kkt_residual == 0.0) break;

    // Second pass: clip pattern from s(alpha) rather than from w_est.
    Vec s = X.transpose() * alpha.cwiseProduct(y);
    std::vector<int> p2(static_cast<size_t>(n), 0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (wbar[j] < kInf && std::abs(s[j]) > wbar[j])
        p2[static_cast<size_t>(j)] = s[j] > 0 ? +1 : -1;
    if (p2 == pattern) break;
    pattern = std::move(p2);
  }
  return best;
}

inline double spectral_norm_sq(const Mat& X) {
  const Eigen::Index n = X.cols();
  if (n == 0 || X.rows() == 0) return 0.0;
  Mat G = X.transpose() * X;  // n is small throughout this project
  Vec v = Vec::Ones(n).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 60; ++it) {
    Vec gv = G * v;
    lambda = gv.norm();
    if (lambda == 0.0) return 0.0;
    v = gv / lambda;
  }
  return lambda;
}

}  // namespace svcdetail

// Trains the box-constrained SVC. Throws SvcTrainError (carrying the best
// iterate) if the first-order residual cannot be brought under opt.tol
// within opt.max_iter gradient steps.
inline SvcModel train_boxed(const Mat& X, const Vec& y, double C,
                            const Vec& wbar, SvcQpOptions opt = {}) {
  using namespace svcdetail;
  const Eigen::Index l = X.rows(), n = X.cols();
  if (l == 0 || n == 0) throw std::invalid_argument("train_boxed: empty data");
  if (y.size() != l) throw std::invalid_argument("train_boxed: labels mismatch");
  if (wbar.size() != n) throw std::invalid_argument("train_boxed: wbar mismatch");
  if (!(C > 0.0)) throw std::invalid_argument("train_boxed: C must be > 0");
  for (Eigen::Index j = 0; j < n; ++j)
    if (!(wbar[j] > 0.0))
      throw std::invalid_argument("train_boxed: wbar must be positive");

  auto project = [&](Vec v) {
    for (Eigen::Index j = 0; j < n; ++j)
      v[j] = std::clamp(v[j], -wbar[j], wbar[j]);
    return v;
  };

  const double sig2 = std::max(spectral_norm_sq(X), 1e-12);
  SvcModel best;
  long iters = 0;

  const double deltas[] = {5e-2, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  auto try_cleanup = [&](const Vec& w_est) {
    for (double d : deltas) {
      SvcModel cand = pin_and_score(X, y, C, wbar, w_est, d);
      if (cand.kkt_residual < best.kkt_residual) best = std::move(cand);
      if (best.kkt_residual <= opt.tol) return true;
    }
    return false;
  };

  Vec w = project(Vec::Zero(n));
  if (try_cleanup(w)) {
    best.iterations = iters;
    return best;
  }

  // Accelerated projected gradient on the hinge-penalty objective; the kink
  // is smoothed by rho, which sharpens across stages.
  for (double rho = 1.0; rho >= 0.5e-4; rho *= 0.1) {
    const double L = 1.0 + C * sig2 / rho;
    Vec z = w, w_prev = w;
    double t = 1.0;
    int stall = 0;
    const long stage_cap = std::max<long>(300, 4 * l);
    for (long k = 0; k < stage_cap && iters < opt.max_iter; ++k, ++iters) {
      Vec zmarg = (1.0 - (y.cwiseProduct(X * z)).array()).matrix();
      Vec hp(l);
      for (Eigen::Index i = 0; i < l; ++i)
        hp[i] = std::clamp(zmarg[i] / rho, 0.0, 1.0);
      Vec grad = z - C * (X.transpose() * hp.cwiseProduct(y));
      Vec w_new = project(z - grad / L);

      // Gradient-based restart keeps momentum honest.
      if (grad.dot(w_new - w) > 0.0) t = 1.0;
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = w_new + ((t - 1.0) / t_new) * (w_new - w);
      t = t_new;
      w_prev = w;
      w = w_new;

      const double move = (w - w_prev).cwiseAbs().maxCoeff();
      stall = move <= 1e-13 * (1.0 + w.cwiseAbs().maxCoeff()) ? stall + 1 : 0;
      if ((k + 1) % 50 == 0 || stall >= 4) {
        if (try_cleanup(w)) {
          best.iterations = iters;
          return best;
        }
        if (stall >= 4) break;
      }
    }
    if (try_cleanup(w)) {
      best.iterations = iters;
      return best;
    }
    if (iters >= opt.max_iter) break;
  }

  best.iterations = iters;
  if (best.kkt_residual <= opt.tol) return best;
  throw SvcTrainError("svc training did not reach tol " + num_str(opt.tol) +
                          " within " + std::to_string(opt.max_iter) +
                          " iterations (best residual " +
                          num_str(best.kkt_residual) + ")",
                      std::move(best));
}

// Classical linear SVC: no bounds on w (beta = gamma = 0 throughout).
inline SvcModel train_unbounded(const Mat& X, const Vec& y, double C,
                                SvcQpOptions opt = {}) {
  return train_boxed(X, y, C, Vec::Constant(X.cols(), kInf), opt);
}

}  // namespace svctune
