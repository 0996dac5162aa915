#pragma once

// Linear programming via a bounded-variable revised primal simplex.
//
// One core works on the computational standard form
//     min c'x   s.t.  A x = b,  lb <= x <= ub,
// with an LU factorization of the basis plus a product-form eta file,
// composite (infeasibility-sum) phase 1, and Dantzig pricing that falls back
// to Bland's rule after a run of degenerate pivots.
//
// solve_lp() accepts inequality-form problems (A_ub x <= b_ub with variable
// bounds). Row-light problems are solved directly with slack columns. For
// row-heavy problems (many more rows than variables) the same core is applied
// to the dual standard form, whose basis is sized by the variable count; the
// answer is mapped back and certified against the original problem, with a
// primal-direct fallback if certification fails.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>

#include "svctune/common.hpp"

namespace svctune {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

// min c'x  s.t.  A_ub x <= b_ub,  lb <= x <= ub  (entries may be +-inf)
struct LinearProgram {
  Vec c;
  Mat A_ub;
  Vec b_ub;
  Vec lb, ub;
};

// Same problem with sparse rows; used for the large structured subproblems.
struct SparseLp {
  int n = 0;
  Vec c, lb, ub;
  std::vector<std::vector<std::pair<int, double>>> rows;
  Vec b_ub;

  int n_rows() const { return static_cast<int>(rows.size()); }
};

struct LpSolution {
  LpStatus status = LpStatus::IterLimit;
  Vec x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Vec row_duals;            // multipliers for A_ub rows (>= 0 at Optimal)
  long pivots = 0;
  double duality_gap = 0.0; // |primal obj - dual obj| at Optimal
};

// Basis snapshot for warm-starting a sequence of structurally identical
// solves. Opaque to callers.
struct LpWarmStart {
  bool valid = false;
  int n_sf = 0, m_sf = 0;
  std::vector<int8_t> vstat;
  std::vector<int> basic;
};

enum class LpRoute { Auto, Primal, Dual };

namespace lpdetail {

enum VStat : int8_t { kNbLower = 0, kNbUpper = 1, kNbFree = 2, kBasic = 3 };

// Standard form with column-compressed storage.
struct StdForm {
  int m = 0, n = 0;
  std::vector<int> col_start;  // size n+1
  std::vector<int> row_idx;
  std::vector<double> a_val;
  Vec c, lb, ub, b;

  void col_axpy(int j, double alpha, Vec& out) const {
    for (int k = col_start[j]; k < col_start[j + 1]; ++k)
      out[row_idx[k]] += alpha * a_val[k];
  }
  double col_dot(int j, const Vec& v) const {
    double s = 0.0;
    for (int k = col_start[j]; k < col_start[j + 1]; ++k)
      s += a_val[k] * v[row_idx[k]];
    return s;
  }
};

// Basis handle: singleton-column peel plus a dense LU of the remaining
// kernel, topped by an eta file of later pivots. Supports both B w = rhs
// (ftran) and B' pi = rhs (btran).
//
// A column whose only entry in still-active rows is (r, v) is solvable by
// substitution once everything else is known, so deactivating its row and
// repeating leaves just a small kernel for the dense factorization. Simplex
// bases are dominated by slack/bound-dual singletons and peel almost
// entirely; factoring the full m x m basis densely makes every refactor and
// every solve cost O(m^2)-O(m^3) regardless.
class BasisFactor {
 public:
  // Returns false when the basis looks numerically singular.
  bool refactor(const StdForm& sf, const std::vector<int>& basic) {
    const int m = sf.m;
    m_ = m;
    etas_r_.clear();
    etas_w_.clear();
    cols_.assign(static_cast<size_t>(m), {});
    rows_.assign(static_cast<size_t>(m), {});
    for (int p = 0; p < m; ++p) {
      const int j = basic[static_cast<size_t>(p)];
      for (int k = sf.col_start[j]; k < sf.col_start[j + 1]; ++k) {
        const int r = sf.row_idx[k];
        const double v = sf.a_val[k];
        cols_[static_cast<size_t>(p)].push_back({r, v});
        rows_[static_cast<size_t>(r)].push_back({p, v});
      }
    }

    peel_pos_.clear();
    peel_row_.clear();
    peel_val_.clear();
    std::vector<char> row_active(static_cast<size_t>(m), 1);
    std::vector<char> pos_done(static_cast<size_t>(m), 0);
    std::vector<int> count(static_cast<size_t>(m), 0);
    std::vector<double> colmax(static_cast<size_t>(m), 0.0);
    std::vector<int> stack;
    for (int p = 0; p < m; ++p) {
      count[p] = static_cast<int>(cols_[static_cast<size_t>(p)].size());
      if (count[p] == 0) return false;  // empty column
      for (auto [r, v] : cols_[static_cast<size_t>(p)])
        colmax[static_cast<size_t>(p)] =
            std::max(colmax[static_cast<size_t>(p)], std::abs(v));
      if (count[p] == 1) stack.push_back(p);
    }
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      if (pos_done[static_cast<size_t>(p)] || count[p] != 1) continue;
      int r = -1;
      double v = 0.0;
      for (auto [rr, vv] : cols_[static_cast<size_t>(p)])
        if (row_active[static_cast<size_t>(rr)]) {
          r = rr;
          v = vv;
        }
      if (r < 0) continue;  // all rows taken; the kernel test will judge
      // A weak pivot stays in the kernel where full pivoting handles it.
      if (std::abs(v) < 1e-8 * colmax[static_cast<size_t>(p)]) continue;
      pos_done[static_cast<size_t>(p)] = 1;
      row_active[static_cast<size_t>(r)] = 0;
      peel_pos_.push_back(p);
      peel_row_.push_back(r);
      peel_val_.push_back(v);
      for (auto [q, vv] : rows_[static_cast<size_t>(r)]) {
        if (pos_done[static_cast<size_t>(q)]) continue;
        if (--count[q] == 1) stack.push_back(q);
      }
    }

    kernel_rows_.clear();
    kernel_pos_.clear();
    row_kidx_.assign(static_cast<size_t>(m), -1);
    for (int r = 0; r < m; ++r)
      if (row_active[static_cast<size_t>(r)]) {
        row_kidx_[static_cast<size_t>(r)] = static_cast<int>(kernel_rows_.size());
        kernel_rows_.push_back(r);
      }
    for (int p = 0; p < m; ++p)
      if (!pos_done[static_cast<size_t>(p)]) kernel_pos_.push_back(p);
    const int k = static_cast<int>(kernel_pos_.size());
    if (k != static_cast<int>(kernel_rows_.size())) return false;
    if (k > 0) {
      Mat K = Mat::Zero(k, k);
      for (int c = 0; c < k; ++c)
        for (auto [r, v] : cols_[static_cast<size_t>(kernel_pos_[static_cast<size_t>(c)])])
          if (row_kidx_[static_cast<size_t>(r)] >= 0)
            K(row_kidx_[static_cast<size_t>(r)], c) = v;
      klu_.compute(K);
      Vec d = klu_.matrixLU().diagonal().cwiseAbs();
      const double dmax = d.maxCoeff();
      if (!(dmax > 0.0) || d.minCoeff() <= 1e-13 * dmax) return false;
    }
    return true;
  }

  int eta_count() const { return static_cast<int>(etas_r_.size()); }

  // B_new = B_old with basis position r replaced by the column whose current
  // ftran image is w (so w[r] is the pivot element).
  void push_eta(int r, Vec w) {
    etas_r_.push_back(r);
    etas_w_.push_back(std::move(w));
  }

  void ftran(Vec& x) const {
    Vec out(m_);
    const int k = static_cast<int>(kernel_pos_.size());
    if (k > 0) {
      Vec bk(k);
      for (int i = 0; i < k; ++i) bk[i] = x[kernel_rows_[static_cast<size_t>(i)]];
      Vec xk = klu_.solve(bk);
      for (int i = 0; i < k; ++i) out[kernel_pos_[static_cast<size_t>(i)]] = xk[i];
    }
    // A peeled column has entries only in its own row and earlier-peeled
    // rows, so reverse order resolves every dependency.
    for (size_t i = peel_pos_.size(); i-- > 0;) {
      const int p = peel_pos_[i], r = peel_row_[i];
      double s = x[r];
      for (auto [q, v] : rows_[static_cast<size_t>(r)])
        if (q != p) s -= v * out[q];
      out[p] = s / peel_val_[i];
    }
    x = std::move(out);
    for (size_t e = 0; e < etas_r_.size(); ++e) {
      const int r = etas_r_[e];
      const Vec& w = etas_w_[e];
      const double xr = x[r] / w[r];
      x.noalias() -= xr * w;
      x[r] = xr;
    }
  }

  void btran(Vec& x) const {
    for (size_t e = etas_r_.size(); e-- > 0;) {
      const int r = etas_r_[e];
      const Vec& w = etas_w_[e];
      x[r] = (x[r] - w.dot(x) + w[r] * x[r]) / w[r];
    }
    Vec pi(m_);
    for (size_t i = 0; i < peel_pos_.size(); ++i) {
      const int p = peel_pos_[i], r = peel_row_[i];
      double s = x[p];
      for (auto [rr, v] : cols_[static_cast<size_t>(p)])
        if (rr != r) s -= v * pi[rr];
      pi[r] = s / peel_val_[i];
    }
    const int k = static_cast<int>(kernel_pos_.size());
    if (k > 0) {
      Vec ck(k);
      for (int c = 0; c < k; ++c) {
        const int p = kernel_pos_[static_cast<size_t>(c)];
        double s = x[p];
        for (auto [r, v] : cols_[static_cast<size_t>(p)])
          if (row_kidx_[static_cast<size_t>(r)] < 0) s -= v * pi[r];
        ck[c] = s;
      }
      // K = P^{-1} L U  =>  K' pi = c  solved as U' y = c, L' z = y, pi = P' z.
      const auto& LU = klu_.matrixLU();
      Vec y = LU.transpose().triangularView<Eigen::Lower>().solve(ck);
      Vec z = LU.transpose().triangularView<Eigen::UnitUpper>().solve(y);
      Vec pk = klu_.permutationP().transpose() * z;
      for (int i = 0; i < k; ++i) pi[kernel_rows_[static_cast<size_t>(i)]] = pk[i];
    }
    x = std::move(pi);
  }

 private:
  int m_ = 0;
  std::vector<std::vector<std::pair<int, double>>> cols_, rows_;
  std::vector<int> peel_pos_, peel_row_;
  std::vector<double> peel_val_;
  std::vector<int> kernel_rows_, kernel_pos_, row_kidx_;
  Eigen::PartialPivLU<Mat> klu_;
  std::vector<int> etas_r_;
  std::vector<Vec> etas_w_;
};

struct CoreOptions {
  double feas_tol = 1e-9;
  long max_pivots = 100000;
  int refactor_every = 64;
  int stall_limit = 100;  // consecutive degenerate pivots before Bland
};

enum class CoreStatus {
  Optimal,
  Infeasible,
  Unbounded,
  IterLimit,
  SingularStart,
  Stalled,  // every attractive column was rejected for a tiny pivot element
};

struct CoreResult {
  CoreStatus status = CoreStatus::IterLimit;
  long pivots = 0;
};

// Bounded-variable simplex on a standard-form problem. `vstat`/`basic` carry
// the starting point in and the final basis out.
class SimplexCore {
 public:
  SimplexCore(const StdForm& sf, CoreOptions opt) : sf_(sf), opt_(opt) {}

  CoreResult run(std::vector<int8_t>& vstat, std::vector<int>& basic, Vec& x) {
    vstat_ = &vstat;
    basic_ = &basic;
    const int m = sf_.m, n = sf_.n;
    cscale_ = 1.0 + sf_.c.cwiseAbs().maxCoeff();
    bscale_ = 1.0 + (m ? sf_.b.cwiseAbs().maxCoeff() : 0.0);

    const std::vector<int8_t> vstat0 = vstat;
    const std::vector<int> basic0 = basic;

    for (int attempt = 0;; ++attempt) {
      x_ = Vec::Zero(n);
      for (int j = 0; j < n; ++j) {
        switch (vstat[static_cast<size_t>(j)]) {
          case kNbLower: x_[j] = sf_.lb[j]; break;
          case kNbUpper: x_[j] = sf_.ub[j]; break;
          default: break;  // free at 0; basic values are set below
        }
      }
      if (!factor_and_rescale()) {
        x = x_;
        return {CoreStatus::SingularStart, pivots_};
      }

      CoreResult res{CoreStatus::Optimal, 0};
      // Phase 1: drive the summed bound violation of the basics to zero.
      if (total_infeas() > feas_target()) {
        res = iterate(/*phase1=*/true);
        if (res.status == CoreStatus::Unbounded)
          res.status = CoreStatus::Infeasible;
        if (res.status == CoreStatus::Optimal &&
            total_infeas() > 10.0 * feas_target())
          res.status = CoreStatus::Infeasible;
      }
      if (res.status == CoreStatus::Optimal) res = iterate(/*phase1=*/false);

      // A refactor that fails mid-run marks a numerically collapsed pivot
      // path, not a bad problem: the starting basis did factorize. Restart
      // once from it under Bland's rule, which walks a tamer sequence.
      if (res.status == CoreStatus::SingularStart && attempt == 0) {
        vstat = vstat0;
        basic = basic0;
        force_bland_ = true;
        continue;
      }
      x = x_;
      return res;
    }
  }

  // Simplex multipliers for the final basis under the phase-2 costs.
  Vec duals() const {
    Vec cb(sf_.m);
    for (int p = 0; p < sf_.m; ++p)
      cb[p] = sf_.c[(*basic_)[static_cast<size_t>(p)]];
    factor_.btran(cb);
    return cb;
  }

 private:
  double feas_target() const {
    return std::max(1, sf_.m) * opt_.feas_tol * bscale_;
  }

  // Per-basic bound violation treated as "at the bound". Phase 1 exits on the
  // summed violation, so a single basic may legitimately carry up to the full
  // feas_target() at phase-2 entry.
  double feas_band() const {
    return std::max(1e-12 * bscale_, feas_target());
  }

  double infeas_of(int j) const {
    if (x_[j] < sf_.lb[j]) return sf_.lb[j] - x_[j];
    if (x_[j] > sf_.ub[j]) return x_[j] - sf_.ub[j];
    return 0.0;
  }

  double total_infeas() const {
    double s = 0.0;
    for (int p = 0; p < sf_.m; ++p)
      s += infeas_of((*basic_)[static_cast<size_t>(p)]);
    return s;
  }

  // Rebuild the factorization and recompute basic values from scratch.
  bool factor_and_rescale() {
    if (!factor_.refactor(sf_, *basic_)) return false;
    Vec rhs = sf_.b;
    for (int j = 0; j < sf_.n; ++j)
      if ((*vstat_)[static_cast<size_t>(j)] != kBasic && x_[j] != 0.0)
        sf_.col_axpy(j, -x_[j], rhs);
    factor_.ftran(rhs);
    for (int p = 0; p < sf_.m; ++p)
      x_[(*basic_)[static_cast<size_t>(p)]] = rhs[p];
    return true;
  }

  // Cost of variable j under the current phase (phase 1 prices only the
  // bound violations of basic variables). Violations within the band the
  // ratio test tolerates must not be priced: they attract entering columns
  // that nothing blocks, which reads as a false unbounded/infeasible ray.
  double phase_cost(int j, bool phase1) const {
    if (!phase1) return sf_.c[j];
    if ((*vstat_)[static_cast<size_t>(j)] != kBasic) return 0.0;
    if (x_[j] < sf_.lb[j] - feas_band()) return -1.0;
    if (x_[j] > sf_.ub[j] + feas_band()) return 1.0;
    return 0.0;
  }

  Vec multipliers(bool phase1) const {
    Vec cb(sf_.m);
    for (int p = 0; p < sf_.m; ++p)
      cb[p] = phase_cost((*basic_)[static_cast<size_t>(p)], phase1);
    factor_.btran(cb);
    return cb;
  }

  // Entering-candidate test; returns the travel sign (+1 increase, -1
  // decrease) or 0 when not attractive.
  int attractiveness(int j, const Vec& pi, bool phase1, double dtol,
                     double* score) const {
    int8_t st = (*vstat_)[static_cast<size_t>(j)];
    if (st == kBasic) return 0;
    if (sf_.lb[j] == sf_.ub[j]) return 0;  // fixed (includes parked artificials)
    double d = (phase1 ? 0.0 : sf_.c[j]) - sf_.col_dot(j, pi);
    if (st == kNbLower && d < -dtol) { *score = -d; return +1; }
    if (st == kNbUpper && d > dtol) { *score = d; return -1; }
    if (st == kNbFree && std::abs(d) > dtol) {
      *score = std::abs(d);
      return d < 0 ? +1 : -1;
    }
    return 0;
  }

  CoreResult iterate(bool phase1) {
    const int n = sf_.n;
    int degen_run = 0;
    bool bland = force_bland_;
    int scan_from = 0;
    const double zero_clip = 1e-12 * bscale_;
    // The ratio test must treat a basic within feas_band() of a bound as
    // sitting AT the bound; classifying it as "violated and moving away"
    // would let later pivots drive it arbitrarily far out without blocking.
    const double band = feas_band();
    const int stall_trigger = std::max(16, std::min(opt_.stall_limit, sf_.m));
    // Columns rejected for a numerically tiny pivot element at the current
    // basis. Cleared whenever the basis changes; bounds the retry loop below.
    std::vector<char> shunned(static_cast<size_t>(n), 0);
    int shun_count = 0;

    while (true) {
      if (pivots_ >= opt_.max_pivots) return {CoreStatus::IterLimit, pivots_};
      if (phase1 && total_infeas() <= feas_target())
        return {CoreStatus::Optimal, pivots_};

      const double dtol = 1e-9 * (phase1 ? 1.0 : cscale_);
      Vec pi = multipliers(phase1);

      // Pricing: Bland takes the lowest attractive index; otherwise Dantzig
      // over a partial sweep that extends to a full one if nothing shows up.
      int enter = -1, sigma = 0;
      double best = 0.0;
      if (bland) {
        for (int j = 0; j < n; ++j) {
          if (shunned[static_cast<size_t>(j)]) continue;
          double sc;
          int sg = attractiveness(j, pi, phase1, dtol, &sc);
          if (sg != 0) { enter = j; sigma = sg; break; }
        }
      } else {
        const int window = std::max(64, n / 8);
        int found = 0;
        for (int step = 0; step < n; ++step) {
          int j = scan_from + step;
          if (j >= n) j -= n;
          if (shunned[static_cast<size_t>(j)]) continue;
          double sc;
          int sg = attractiveness(j, pi, phase1, dtol, &sc);
          if (sg != 0) {
            ++found;
            if (sc > best + 1e-15 ||
                (sc > best - 1e-15 && (enter < 0 || j < enter))) {
              best = sc;
              enter = j;
              sigma = sg;
            }
          }
          if (found > 0 && step >= window) break;
        }
        if (enter >= 0) scan_from = (enter + 1 < n) ? enter + 1 : 0;
      }
      if (enter < 0) {
        // With columns shunned this is a numerical stall, not optimality.
        return {shun_count == 0 ? CoreStatus::Optimal : CoreStatus::Stalled,
                pivots_};
      }

      // Basics move by -t*sigma*w as the entering variable moves by t*sigma.
      Vec w = Vec::Zero(sf_.m);
      sf_.col_axpy(enter, 1.0, w);
      factor_.ftran(w);

      // Ratio test. A violated basic may stop at the bound it is moving
      // toward (phase-1 kink); ties prefer the larger pivot element, or the
      // smallest basic index under Bland. leave_pos == -1 means the entering
      // variable's own bound span binds first (a bound flip).
      double t_max = kInf;
      if (sf_.lb[enter] > -kInf && sf_.ub[enter] < kInf)
        t_max = sf_.ub[enter] - sf_.lb[enter];
      int leave_pos = -1;
      bool leave_to_upper = false;
      double best_piv = 0.0;

      for (int p = 0; p < sf_.m; ++p) {
        double wp = sigma * w[p];
        if (std::abs(wp) < 1e-11) continue;
        int jb = (*basic_)[static_cast<size_t>(p)];
        double t;
        bool to_upper;
        if (wp > 0) {  // this basic decreases
          if (x_[jb] > sf_.ub[jb] + band) {
            to_upper = true;  // violated above, heading back to ub
            t = (x_[jb] - sf_.ub[jb]) / wp;
          } else if (x_[jb] >= sf_.lb[jb] - band && sf_.lb[jb] > -kInf) {
            to_upper = false;
            t = (x_[jb] - sf_.lb[jb]) / wp;
          } else {
            continue;  // below lb and moving away: no kink ahead
          }
        } else {  // this basic increases
          if (x_[jb] < sf_.lb[jb] - band) {
            to_upper = false;  // violated below, heading back to lb
            t = (sf_.lb[jb] - x_[jb]) / (-wp);
          } else if (x_[jb] <= sf_.ub[jb] + band && sf_.ub[jb] < kInf) {
            to_upper = true;
            t = (sf_.ub[jb] - x_[jb]) / (-wp);
          } else {
            continue;  // above ub and moving away: no kink ahead
          }
        }
        if (t < 0.0) t = 0.0;
        const double tie =
            1e-12 * (1.0 + (t_max == kInf ? t : std::min(t, t_max)));
        bool take = false;
        if (t_max == kInf || t < t_max - tie) {
          take = true;
        } else if (t <= t_max + tie && leave_pos >= 0) {
          take = bland ? jb < (*basic_)[static_cast<size_t>(leave_pos)]
                       : std::abs(wp) > best_piv;
        }
        if (take) {
          t_max = (leave_pos >= 0) ? std::min(t, t_max) : t;
          leave_pos = p;
          leave_to_upper = to_upper;
          best_piv = std::abs(wp);
        }
      }

      if (t_max == kInf)
        return {phase1 ? CoreStatus::Infeasible : CoreStatus::Unbounded,
                pivots_};

      // Unstable pivot element: refactor once and retry the iteration; if it
      // is still tiny on fresh numbers, the column cannot pivot at this basis,
      // so park it and let pricing pick another.
      if (leave_pos >= 0 &&
          std::abs(w[leave_pos]) < 1e-9 * (1.0 + w.cwiseAbs().maxCoeff())) {
        if (factor_.eta_count() > 0) {
          if (!factor_and_rescale())
            return {CoreStatus::SingularStart, pivots_};
        } else {
          shunned[static_cast<size_t>(enter)] = 1;
          ++shun_count;
          bland = true;
        }
        continue;
      }

      ++pivots_;
      if (shun_count > 0) {
        std::fill(shunned.begin(), shunned.end(), 0);
        shun_count = 0;
      }
      bool degenerate = t_max <= zero_clip;
      degen_run = degenerate ? degen_run + 1 : 0;
      if (degen_run > stall_trigger) bland = true;
      if (!degenerate) bland = force_bland_;

      if (t_max > 0.0) {
        for (int p = 0; p < sf_.m; ++p)
          x_[(*basic_)[static_cast<size_t>(p)]] -= t_max * sigma * w[p];
      }

      if (leave_pos < 0) {
        // Bound flip: the entering variable jumps to its other bound.
        auto& st = (*vstat_)[static_cast<size_t>(enter)];
        st = (st == kNbLower) ? kNbUpper : kNbLower;
        x_[enter] = (st == kNbLower) ? sf_.lb[enter] : sf_.ub[enter];
        continue;
      }

      int jl = (*basic_)[static_cast<size_t>(leave_pos)];
      (*vstat_)[static_cast<size_t>(jl)] = leave_to_upper ? kNbUpper : kNbLower;
      x_[jl] = leave_to_upper ? sf_.ub[jl] : sf_.lb[jl];
      x_[enter] += sigma * t_max;
      (*vstat_)[static_cast<size_t>(enter)] = kBasic;
      (*basic_)[static_cast<size_t>(leave_pos)] = enter;

      factor_.push_eta(leave_pos, std::move(w));
      if (factor_.eta_count() >= opt_.refactor_every) {
        if (!factor_and_rescale()) return {CoreStatus::SingularStart, pivots_};
      }
    }
  }

  const StdForm& sf_;
  CoreOptions opt_;
  BasisFactor factor_;
  std::vector<int8_t>* vstat_ = nullptr;
  std::vector<int>* basic_ = nullptr;
  Vec x_;
  double cscale_ = 1.0, bscale_ = 1.0;
  long pivots_ = 0;
  bool force_bland_ = false;  // set by the post-collapse restart in run()
};

// Inequality form -> standard form with slack columns (primal route).
inline StdForm primal_std_form(const SparseLp& lp) {
  StdForm sf;
  const int m = lp.n_rows(), n = lp.n;
  sf.m = m;
  sf.n = n + m;
  sf.b = lp.b_ub;
  sf.c = Vec::Zero(n + m);
  sf.c.head(n) = lp.c;
  sf.lb = Vec::Zero(n + m);
  sf.ub = Vec::Constant(n + m, kInf);
  sf.lb.head(n) = lp.lb;
  sf.ub.head(n) = lp.ub;

  std::vector<std::vector<std::pair<int, double>>> cols(static_cast<size_t>(n));
  size_t nnz = static_cast<size_t>(m);
  for (int i = 0; i < m; ++i) {
    for (auto [j, aij] : lp.rows[static_cast<size_t>(i)])
      cols[static_cast<size_t>(j)].push_back({i, aij});
    nnz += lp.rows[static_cast<size_t>(i)].size();
  }
  sf.col_start.assign(static_cast<size_t>(sf.n) + 1, 0);
  sf.row_idx.reserve(nnz);
  sf.a_val.reserve(nnz);
  for (int j = 0; j < n; ++j) {
    sf.col_start[static_cast<size_t>(j)] = static_cast<int>(sf.row_idx.size());
    for (auto [i, aij] : cols[static_cast<size_t>(j)]) {
      sf.row_idx.push_back(i);
      sf.a_val.push_back(aij);
    }
  }
  for (int i = 0; i < m; ++i) {
    sf.col_start[static_cast<size_t>(n + i)] =
        static_cast<int>(sf.row_idx.size());
    sf.row_idx.push_back(i);
    sf.a_val.push_back(1.0);
  }
  sf.col_start[static_cast<size_t>(sf.n)] = static_cast<int>(sf.row_idx.size());
  return sf;
}

}  // namespace lpdetail

// Primal-direct solve of an inequality-form LP.
inline LpSolution solve_lp_primal(const SparseLp& lp, double feas_tol,
                                  long max_pivots) {
  using namespace lpdetail;
  const int m = lp.n_rows(), n = lp.n;
  LpSolution out;
  for (int j = 0; j < n; ++j)
    if (lp.lb[j] > lp.ub[j]) {
      out.status = LpStatus::Infeasible;
      return out;
    }

  if (m == 0) {  // pure box problem
    out.x = Vec::Zero(n);
    for (int j = 0; j < n; ++j) {
      if (lp.c[j] > 0.0) out.x[j] = lp.lb[j];
      else if (lp.c[j] < 0.0) out.x[j] = lp.ub[j];
      else out.x[j] = (lp.lb[j] > -kInf) ? lp.lb[j] : std::min(lp.ub[j], 0.0);
      if (std::isinf(out.x[j])) {
        if (lp.c[j] != 0.0) {
          out.status = LpStatus::Unbounded;
          return out;
        }
        out.x[j] = 0.0;
      }
    }
    out.status = LpStatus::Optimal;
    out.objective = lp.c.dot(out.x);
    out.row_duals = Vec(0);
    return out;
  }

  StdForm sf = primal_std_form(lp);
  std::vector<int8_t> vstat(static_cast<size_t>(sf.n));
  std::vector<int> basic(static_cast<size_t>(m));
  for (int j = 0; j < n; ++j) {
    if (lp.lb[j] > -kInf) vstat[static_cast<size_t>(j)] = kNbLower;
    else if (lp.ub[j] < kInf) vstat[static_cast<size_t>(j)] = kNbUpper;
    else vstat[static_cast<size_t>(j)] = kNbFree;
  }
  for (int i = 0; i < m; ++i) {
    vstat[static_cast<size_t>(n + i)] = kBasic;
    basic[static_cast<size_t>(i)] = n + i;
  }

  CoreOptions opt;
  opt.feas_tol = feas_tol;
  opt.max_pivots = max_pivots;
  SimplexCore core(sf, opt);
  Vec xsf;
  CoreResult cr = core.run(vstat, basic, xsf);
  out.pivots = cr.pivots;
  switch (cr.status) {
    case CoreStatus::Optimal: out.status = LpStatus::Optimal; break;
    case CoreStatus::Infeasible: out.status = LpStatus::Infeasible; break;
    case CoreStatus::Unbounded: out.status = LpStatus::Unbounded; break;
    case CoreStatus::IterLimit: out.status = LpStatus::IterLimit; break;
    case CoreStatus::Stalled: out.status = LpStatus::IterLimit; break;
    case CoreStatus::SingularStart:
      throw std::runtime_error("solve_lp: singular starting basis (internal)");
  }
  out.x = xsf.head(n);
  if (out.status == LpStatus::Optimal || out.status == LpStatus::IterLimit)
    out.objective = lp.c.dot(out.x);
  if (out.status == LpStatus::Optimal) {
    Vec pi = core.duals();
    out.row_duals = Vec(m);
    for (int i = 0; i < m; ++i) out.row_duals[i] = std::max(-pi[i], 0.0);
    // Weak-duality certificate from the reduced costs.
    double dual_obj = -out.row_duals.dot(lp.b_ub);
    for (int j = 0; j < n; ++j) {
      double dj = lp.c[j] - sf.col_dot(j, pi);
      if (vstat[static_cast<size_t>(j)] == kNbLower)
        dual_obj += std::max(dj, 0.0) * lp.lb[j];
      else if (vstat[static_cast<size_t>(j)] == kNbUpper)
        dual_obj += std::min(dj, 0.0) * lp.ub[j];
    }
    out.duality_gap = std::abs(out.objective - dual_obj);
  }
  return out;
}

// Row-heavy solve: the same core applied to the dual standard form
//     min b'y + u'w+ - l'w-   s.t.  A'y + w+ - w- = -c,   y, w+, w- >= 0,
// whose basis is n x n instead of m x m. The primal point is recovered from
// the simplex multipliers, certified, and on any doubt recomputed primally.
inline LpSolution solve_lp_dual_route(const SparseLp& lp, double feas_tol,
                                      long max_pivots, LpWarmStart* ws) {
  using namespace lpdetail;
  const int m = lp.n_rows(), n = lp.n;

  StdForm sf;
  sf.m = n;
  std::vector<int> wplus_col(static_cast<size_t>(n), -1);
  std::vector<int> wminus_col(static_cast<size_t>(n), -1);
  int ncols = m;
  for (int j = 0; j < n; ++j) {
    if (lp.ub[j] < kInf) wplus_col[static_cast<size_t>(j)] = ncols++;
    if (lp.lb[j] > -kInf) wminus_col[static_cast<size_t>(j)] = ncols++;
  }
  const int art0 = ncols;  // one artificial per equality, parked at [0,0]
  ncols += n;
  sf.n = ncols;
  sf.b = -lp.c;
  sf.c = Vec::Zero(ncols);
  sf.lb = Vec::Zero(ncols);
  sf.ub = Vec::Constant(ncols, kInf);
  for (int i = 0; i < m; ++i) sf.c[i] = lp.b_ub[i];
  for (int j = 0; j < n; ++j) {
    if (wplus_col[static_cast<size_t>(j)] >= 0)
      sf.c[wplus_col[static_cast<size_t>(j)]] = lp.ub[j];
    if (wminus_col[static_cast<size_t>(j)] >= 0)
      sf.c[wminus_col[static_cast<size_t>(j)]] = -lp.lb[j];
    sf.ub[art0 + j] = 0.0;
  }

  size_t nnz = static_cast<size_t>(3 * n);
  for (const auto& r : lp.rows) nnz += r.size();
  sf.col_start.assign(static_cast<size_t>(ncols) + 1, 0);
  sf.row_idx.reserve(nnz);
  sf.a_val.reserve(nnz);
  // Columns are appended in index order: y (one per primal row), then the
  // bound duals interleaved per variable, then the artificials.
  for (int i = 0; i < m; ++i) {
    sf.col_start[static_cast<size_t>(i)] = static_cast<int>(sf.row_idx.size());
    for (auto [j, aij] : lp.rows[static_cast<size_t>(i)]) {
      sf.row_idx.push_back(j);
      sf.a_val.push_back(aij);
    }
  }
  for (int j = 0; j < n; ++j) {
    if (wplus_col[static_cast<size_t>(j)] >= 0) {
      sf.col_start[static_cast<size_t>(wplus_col[static_cast<size_t>(j)])] =
          static_cast<int>(sf.row_idx.size());
      sf.row_idx.push_back(j);
      sf.a_val.push_back(1.0);
    }
    if (wminus_col[static_cast<size_t>(j)] >= 0) {
      sf.col_start[static_cast<size_t>(wminus_col[static_cast<size_t>(j)])] =
          static_cast<int>(sf.row_idx.size());
      sf.row_idx.push_back(j);
      sf.a_val.push_back(-1.0);
    }
  }
  for (int j = 0; j < n; ++j) {
    sf.col_start[static_cast<size_t>(art0 + j)] =
        static_cast<int>(sf.row_idx.size());
    sf.row_idx.push_back(j);
    sf.a_val.push_back(1.0);
  }
  sf.col_start[static_cast<size_t>(ncols)] = static_cast<int>(sf.row_idx.size());

  std::vector<int8_t> vstat(static_cast<size_t>(ncols), kNbLower);
  std::vector<int> basic(static_cast<size_t>(n));
  const bool warm_ok = ws && ws->valid && ws->n_sf == ncols && ws->m_sf == n;
  if (warm_ok) {
    vstat = ws->vstat;
    basic = ws->basic;
  } else {
    // Crash basis: a bound-dual column with nonnegative starting value where
    // one exists, otherwise the artificial (phase 1 repairs its violation).
    for (int j = 0; j < n; ++j) {
      int pick;
      if (wminus_col[static_cast<size_t>(j)] >= 0 && lp.c[j] >= 0.0)
        pick = wminus_col[static_cast<size_t>(j)];
      else if (wplus_col[static_cast<size_t>(j)] >= 0 && lp.c[j] <= 0.0)
        pick = wplus_col[static_cast<size_t>(j)];
      else
        pick = art0 + j;
      basic[static_cast<size_t>(j)] = pick;
      vstat[static_cast<size_t>(pick)] = kBasic;
    }
  }

  CoreOptions opt;
  opt.feas_tol = feas_tol;
  opt.max_pivots = max_pivots;
  SimplexCore core(sf, opt);
  Vec xsf;
  CoreResult cr = core.run(vstat, basic, xsf);
  if (cr.status == CoreStatus::SingularStart && warm_ok) {
    ws->valid = false;  // stale basis; retry cold
    return solve_lp_dual_route(lp, feas_tol, max_pivots, nullptr);
  }

  LpSolution out;
  out.pivots = cr.pivots;
  if (cr.status == CoreStatus::SingularStart) {
    // The dual basis can go numerically singular mid-run (columns whose only
    // sizable entry is the shared objective row); the primal route factors
    // row slacks instead and does not share the weakness.
    if (ws) ws->valid = false;
    return solve_lp_primal(lp, feas_tol, max_pivots);
  }
  if (cr.status == CoreStatus::Infeasible) {
    // Dual infeasible: the original problem is unbounded or infeasible;
    // decide with a primal solve.
    return solve_lp_primal(lp, feas_tol, max_pivots);
  }
  if (cr.status == CoreStatus::Stalled) {
    // Numerical stall in the dual basis; the primal route factors a
    // different basis and usually gets through.
    if (ws) ws->valid = false;
    return solve_lp_primal(lp, feas_tol, max_pivots);
  }
  if (cr.status == CoreStatus::Unbounded) {
    // Dual unbounded should mean primal infeasible, but at poor scaling the
    // dual ratio test can miss blocking rows; let a primal solve decide.
    if (ws) ws->valid = false;
    return solve_lp_primal(lp, feas_tol, max_pivots);
  }

  if (ws) {
    ws->valid = true;
    ws->n_sf = ncols;
    ws->m_sf = n;
    ws->vstat = vstat;
    ws->basic = basic;
  }

  // The dual SF columns price as  d_{w-} = pi_j - l_j >= 0  and
  // d_{w+} = u_j - pi_j >= 0  at optimality, so the multipliers themselves
  // are the primal point.
  Vec pi = core.duals();
  out.x = pi;
  out.objective = lp.c.dot(out.x);
  if (cr.status == CoreStatus::IterLimit) {
    out.status = LpStatus::IterLimit;
    return out;
  }
  out.status = LpStatus::Optimal;
  out.row_duals = xsf.head(m);

  // Certify against the original problem; on any doubt recompute primally.
  double viol = 0.0;
  for (int i = 0; i < m; ++i) {
    double ax = 0.0;
    for (auto [j, aij] : lp.rows[static_cast<size_t>(i)]) ax += aij * out.x[j];
    viol = std::max(viol, ax - lp.b_ub[i]);
  }
  for (int j = 0; j < n; ++j) {
    if (lp.lb[j] > -kInf) viol = std::max(viol, lp.lb[j] - out.x[j]);
    if (lp.ub[j] < kInf) viol = std::max(viol, out.x[j] - lp.ub[j]);
  }
  double dual_obj = -out.row_duals.dot(lp.b_ub);
  for (int j = 0; j < n; ++j) {
    if (wminus_col[static_cast<size_t>(j)] >= 0)
      dual_obj += xsf[wminus_col[static_cast<size_t>(j)]] * lp.lb[j];
    if (wplus_col[static_cast<size_t>(j)] >= 0)
      dual_obj -= xsf[wplus_col[static_cast<size_t>(j)]] * lp.ub[j];
  }
  out.duality_gap = std::abs(out.objective - dual_obj);
  const double b_scale = 1.0 + (m ? lp.b_ub.cwiseAbs().maxCoeff() : 0.0);
  if (viol > 1e-6 * b_scale ||
      out.duality_gap > 1e-6 * (1.0 + std::abs(out.objective))) {
    if (ws) ws->valid = false;
    return solve_lp_primal(lp, feas_tol, max_pivots);
  }
  return out;
}

inline long default_max_pivots(int nvars, int ncons) {
  return 50L * (static_cast<long>(nvars) + static_cast<long>(ncons));
}

inline LpSolution solve_lp(const SparseLp& lp, double feas_tol = 1e-9,
                           long max_pivots = -1, LpWarmStart* ws = nullptr,
                           LpRoute route = LpRoute::Auto) {
  if (lp.n <= 0) throw std::invalid_argument("solve_lp: no variables");
  if (max_pivots < 0) max_pivots = default_max_pivots(lp.n, lp.n_rows());
  const bool use_dual = route == LpRoute::Dual ||
                        (route == LpRoute::Auto && lp.n_rows() > 3 * lp.n + 16);
  return use_dual ? solve_lp_dual_route(lp, feas_tol, max_pivots, ws)
                  : solve_lp_primal(lp, feas_tol, max_pivots);
}

inline SparseLp to_sparse(const LinearProgram& lp) {
  SparseLp s;
  s.n = static_cast<int>(lp.c.size());
  s.c = lp.c;
  s.lb = lp.lb;
  s.ub = lp.ub;
  s.b_ub = lp.b_ub;
  s.rows.resize(static_cast<size_t>(lp.A_ub.rows()));
  for (Eigen::Index i = 0; i < lp.A_ub.rows(); ++i)
    for (Eigen::Index j = 0; j < lp.A_ub.cols(); ++j)
      if (lp.A_ub(i, j) != 0.0)
        s.rows[static_cast<size_t>(i)].push_back(
            {static_cast<int>(j), lp.A_ub(i, j)});
  return s;
}

inline LpSolution solve_lp(const LinearProgram& lp, double feas_tol = 1e-9,
                           long max_pivots = -1,
                           LpRoute route = LpRoute::Auto) {
  return solve_lp(to_sparse(lp), feas_tol, max_pivots, nullptr, route);
}

// Free-MPS export so subproblems can be cross-checked with external solvers.
inline void dump_lp_mps(const SparseLp& lp, std::ostream& os,
                        const std::string& name = "SVCTUNE_LP") {
  os << "NAME " << name << "\nROWS\n N OBJ\n";
  for (int i = 0; i < lp.n_rows(); ++i) os << " L R" << i << "\n";
  os << "COLUMNS\n";
  std::vector<std::vector<std::pair<int, double>>> cols(
      static_cast<size_t>(lp.n));
  for (int i = 0; i < lp.n_rows(); ++i)
    for (auto [j, aij] : lp.rows[static_cast<size_t>(i)])
      cols[static_cast<size_t>(j)].push_back({i, aij});
  for (int j = 0; j < lp.n; ++j) {
    if (lp.c[j] != 0.0) os << " X" << j << " OBJ " << num_str(lp.c[j]) << "\n";
    for (auto [i, aij] : cols[static_cast<size_t>(j)])
      os << " X" << j << " R" << i << " " << num_str(aij) << "\n";
  }
  os << "RHS\n";
  for (int i = 0; i < lp.n_rows(); ++i)
    if (lp.b_ub[i] != 0.0)
      os << " RHS R" << i << " " << num_str(lp.b_ub[i]) << "\n";
  os << "BOUNDS\n";
  for (int j = 0; j < lp.n; ++j) {
    if (lp.lb[j] == -kInf && lp.ub[j] == kInf) {
      os << " FR BND X" << j << "\n";
      continue;
    }
    if (lp.lb[j] == -kInf) os << " MI BND X" << j << "\n";
    else if (lp.lb[j] != 0.0)
      os << " LO BND X" << j << " " << num_str(lp.lb[j]) << "\n";
    if (lp.ub[j] < kInf)
      os << " UP BND X" << j << " " << num_str(lp.ub[j]) << "\n";
  }
  os << "ENDATA\n";
}

}  // namespace svctune
