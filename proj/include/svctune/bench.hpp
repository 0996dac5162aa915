#pragma once

// Evaluation metrics, the grid-search baseline, and table/figure emitters.
// Everything here is deterministic given its inputs; the error rates are
// exact rationals (misclassification counts over a fixed denominator).

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "svctune/dataio.hpp"
#include "svctune/mpec.hpp"
#include "svctune/svcqp.hpp"

namespace svctune {

struct TestErrorResult {
  double error = 0;
  long misclassified = 0;
  long total = 0;
  // Points sitting exactly on the hyperplane score as +1; any occurrence is
  // counted here so callers can surface the convention.
  long sign_zero_hits = 0;
};

inline TestErrorResult test_error(const Vec& w, const Mat& x, const IVec& y) {
  if (x.rows() == 0) throw std::invalid_argument("test error: empty test set");
  if (x.cols() != w.size() || y.size() != x.rows())
    throw std::invalid_argument("test error: dimension mismatch");
  TestErrorResult r;
  r.total = x.rows();
  const Vec scores = x * w;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (scores[i] == 0.0) ++r.sign_zero_hits;
    const int predicted = scores[i] >= 0.0 ? 1 : -1;
    if (predicted != y[i]) ++r.misclassified;
  }
  r.error = static_cast<double>(r.misclassified) / static_cast<double>(r.total);
  return r;
}

// Fraction of validation points misclassified across folds, computed from
// the weights reconstructed out of v. At inexact iterates the zeta block can
// be fractional, so the direct count is the ground metric; the two agree at
// exact solutions.
inline double cv_error(const MpecProblem& p, const Vec& v) {
  const std::vector<Vec> w = p.reconstruct_w(v);
  long wrong = 0;
  long total = 0;
  for (Eigen::Index t = 0; t < p.dims().K; ++t) {
    const Vec margins = p.A(t) * w[static_cast<size_t>(t)];  // y_i x_i' w^t
    for (Eigen::Index i = 0; i < margins.size(); ++i)
      if (margins[i] < 0.0) ++wrong;
    total += margins.size();
  }
  return static_cast<double>(wrong) / static_cast<double>(total);
}

struct ZetaResult {
  Vec zeta;
  long zero_components = 0;  // ambiguous entries, resolved to 0
};

// Closed form of argmin_u { -u'r : 0 <= u <= 1 }: each component decouples,
// so zeta_i = 1 exactly when r_i > 0. A zero component makes any value in
// [0, 1] optimal; it is resolved to 0 and counted for the caller to warn on.
inline ZetaResult zeta_from_lp(const Vec& r) {
  ZetaResult out;
  out.zeta = Vec::Zero(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (r[i] > 0.0)
      out.zeta[i] = 1.0;
    else if (r[i] == 0.0)
      ++out.zero_components;
  }
  return out;
}

struct GridSpec {
  std::vector<double> c_values;
  std::vector<double> wbar_levels;  // applied per feature, full product
  long max_cells = 100000;

  void validate() const {
    if (c_values.empty() || wbar_levels.empty())
      throw std::invalid_argument("grid: empty value lists");
    for (double c : c_values)
      if (!(c > 0.0)) throw std::invalid_argument("grid: C values must be positive");
    for (double l : wbar_levels)
      if (l < 0.0) throw std::invalid_argument("grid: levels must be nonnegative");
  }
};

class GridBudgetError : public std::runtime_error {
 public:
  GridBudgetError(double projected, long budget)
      : std::runtime_error("grid search: " + num_str(projected) +
                           " cells exceed the budget of " + num_str(budget)),
        projected_cells(projected) {}
  double projected_cells;
};

struct GridResult {
  double c = 0;
  Vec w_bar;
  double cv_error = 1.0;
  Vec w_refit;            // trained on the full cross-validation set
  TestErrorResult test;   // measured with w_refit
  long cells = 0;
  long failed_cells = 0;  // cells whose training hit the iteration cap
};

namespace benchdetail {

// Boxed training that tolerates zero bounds by eliminating the pinned
// features: w_bar_j = 0 fixes w_j = 0 exactly.
inline Vec train_with_levels(const Mat& x, const IVec& y, double c,
                             const Vec& wbar, bool* failed) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < wbar.size(); ++j)
    if (wbar[j] > 0.0) active.push_back(j);
  Vec w = Vec::Zero(wbar.size());
  if (active.empty()) return w;
  Mat xa(x.rows(), static_cast<Eigen::Index>(active.size()));
  Vec wa(static_cast<Eigen::Index>(active.size()));
  for (size_t k = 0; k < active.size(); ++k) {
    xa.col(static_cast<Eigen::Index>(k)) = x.col(active[k]);
    wa[static_cast<Eigen::Index>(k)] = wbar[active[k]];
  }
  Vec sub;
  try {
    sub = train_boxed(xa, y.cast<double>(), c, wa).w;
  } catch (const SvcTrainError& e) {
    sub = e.best().w;  // scored as-is; the cell is flagged
    if (failed) *failed = true;
  }
  for (size_t k = 0; k < active.size(); ++k)
    w[active[k]] = sub[static_cast<Eigen::Index>(k)];
  return w;
}

struct GridCell {
  double c = 0;
  Vec wbar;
  double cv = 1.0;
  bool failed = false;
};

// Deterministic preference order: error, then smaller C, then
// lexicographically smaller bounds.
inline bool cell_better(const GridCell& a, const GridCell& b) {
  if (a.cv != b.cv) return a.cv < b.cv;
  if (a.c != b.c) return a.c < b.c;
  for (Eigen::Index j = 0; j < a.wbar.size(); ++j)
    if (a.wbar[j] != b.wbar[j]) return a.wbar[j] < b.wbar[j];
  return false;
}

}  // namespace benchdetail

// Exhaustive baseline: every (C, w_bar) cell trains K boxed classifiers and
// scores the validation folds; the winning cell is refit on the full
// cross-validation set before measuring the test error.
inline GridResult grid_search(const Dataset& cv, const CvSplit& split,
                              const Dataset& test, const GridSpec& grid,
                              int jobs = 1) {
  grid.validate();
  const Eigen::Index n = cv.x.cols();
  const double projected =
      static_cast<double>(grid.c_values.size()) *
      std::pow(static_cast<double>(grid.wbar_levels.size()),
               static_cast<double>(n));
  if (projected > static_cast<double>(grid.max_cells))
    throw GridBudgetError(projected, grid.max_cells);
  const long n_cells = static_cast<long>(projected);

  // Materialize the per-fold training/validation views once.
  const Eigen::Index k_folds = split.K;
  std::vector<Mat> xt(static_cast<size_t>(k_folds)), xv(static_cast<size_t>(k_folds));
  std::vector<IVec> yt(static_cast<size_t>(k_folds)), yv(static_cast<size_t>(k_folds));
  for (Eigen::Index t = 0; t < k_folds; ++t) {
    const std::vector<int> tr = split.training_indices(static_cast<int>(t));
    const std::vector<int>& va = split.folds[static_cast<size_t>(t)];
    xt[static_cast<size_t>(t)].resize(static_cast<Eigen::Index>(tr.size()), n);
    yt[static_cast<size_t>(t)].resize(static_cast<Eigen::Index>(tr.size()));
    for (size_t i = 0; i < tr.size(); ++i) {
      xt[static_cast<size_t>(t)].row(static_cast<Eigen::Index>(i)) =
          cv.x.row(tr[i]);
      yt[static_cast<size_t>(t)][static_cast<Eigen::Index>(i)] = cv.y[tr[i]];
    }
    xv[static_cast<size_t>(t)].resize(static_cast<Eigen::Index>(va.size()), n);
    yv[static_cast<size_t>(t)].resize(static_cast<Eigen::Index>(va.size()));
    for (size_t i = 0; i < va.size(); ++i) {
      xv[static_cast<size_t>(t)].row(static_cast<Eigen::Index>(i)) =
          cv.x.row(va[i]);
      yv[static_cast<size_t>(t)][static_cast<Eigen::Index>(i)] = cv.y[va[i]];
    }
  }

  auto wbar_of = [&](long cell) {
    Vec wbar(n);
    long rest = cell / static_cast<long>(grid.c_values.size());
    for (Eigen::Index j = 0; j < n; ++j) {
      wbar[j] = grid.wbar_levels[static_cast<size_t>(
          rest % static_cast<long>(grid.wbar_levels.size()))];
      rest /= static_cast<long>(grid.wbar_levels.size());
    }
    return wbar;
  };

  std::vector<benchdetail::GridCell> cells(static_cast<size_t>(n_cells));
  auto eval_range = [&](long lo, long hi) {
    for (long cell = lo; cell < hi; ++cell) {
      benchdetail::GridCell& out = cells[static_cast<size_t>(cell)];
      out.c = grid.c_values[static_cast<size_t>(
          cell % static_cast<long>(grid.c_values.size()))];
      out.wbar = wbar_of(cell);
      long wrong = 0, total = 0;
      for (Eigen::Index t = 0; t < k_folds; ++t) {
        const Vec w = benchdetail::train_with_levels(
            xt[static_cast<size_t>(t)], yt[static_cast<size_t>(t)], out.c,
            out.wbar, &out.failed);
        // Cells are scored by classification error with the same sign(0)
        // convention as the test metric; the all-zero bounds cell then
        // honestly misclassifies every negative point instead of gaming a
        // zero-margin loophole.
        const Vec scores = xv[static_cast<size_t>(t)] * w;
        for (Eigen::Index i = 0; i < scores.size(); ++i)
          if ((scores[i] >= 0.0 ? 1 : -1) != yv[static_cast<size_t>(t)][i])
            ++wrong;
        total += scores.size();
      }
      out.cv = static_cast<double>(wrong) / static_cast<double>(total);
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n_cells)));
  if (workers == 1) {
    eval_range(0, n_cells);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (n_cells + workers - 1) / workers;
    for (int wkr = 0; wkr < workers; ++wkr)
      pool.emplace_back(eval_range, wkr * chunk,
                        std::min<long>(n_cells, (wkr + 1) * chunk));
    for (std::thread& th : pool) th.join();
  }

  const benchdetail::GridCell* best = &cells[0];
  for (const benchdetail::GridCell& c : cells)
    if (benchdetail::cell_better(c, *best)) best = &c;

  GridResult out;
  out.c = best->c;
  out.w_bar = best->wbar;
  out.cv_error = best->cv;
  out.cells = n_cells;
  for (const benchdetail::GridCell& c : cells)
    if (c.failed) ++out.failed_cells;
  bool refit_failed = false;
  out.w_refit = benchdetail::train_with_levels(cv.x, cv.y, best->c, best->wbar,
                                               &refit_failed);
  if (refit_failed) ++out.failed_cells;
  out.test = test_error(out.w_refit, test.x, test.y);
  return out;
}

// --- Table and figure emitters ---------------------------------------------

struct TableRow {
  std::string method;
  double e_t = 0;     // test error
  double e_c = 0;     // cross-validation error
  double vio = 0;     // complementarity violation at the reported point
  double seconds = 0;
  long size = 0;      // variable count of the method's formulation
  double c = 0;
};

namespace benchdetail {

inline std::string fmt_pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << (100.0 * v);
  return os.str();
}

inline std::string fmt_sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

}  // namespace benchdetail

inline void write_table_markdown(std::ostream& os,
                                 const std::vector<TableRow>& rows) {
  os << "| method | E_t (%) | E_C (%) | Vio | time (s) | size | C |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const TableRow& r : rows)
    os << "| " << r.method << " | " << benchdetail::fmt_pct(r.e_t) << " | "
       << benchdetail::fmt_pct(r.e_c) << " | " << benchdetail::fmt_sci(r.vio)
       << " | " << std::fixed << std::setprecision(2) << r.seconds << " | "
       << r.size << " | " << benchdetail::fmt_sci(r.c) << " |\n";
}

inline void write_table_csv(std::ostream& os,
                            const std::vector<TableRow>& rows) {
  os << "method,e_t,e_c,vio,seconds,size,c\n";
  for (const TableRow& r : rows)
    os << r.method << ',' << num_str(r.e_t) << ',' << num_str(r.e_c) << ','
       << num_str(r.vio) << ',' << num_str(r.seconds) << ',' << r.size << ','
       << num_str(r.c) << '\n';
}

// Static bar chart of per-feature pairs: the bound w_bar_i in blue, the
// refit weight w_i in red.
inline void write_feature_svg(std::ostream& os, const Vec& w_bar,
                              const Vec& w) {
  if (w_bar.size() != w.size())
    throw std::invalid_argument("feature chart: length mismatch");
  const int n = static_cast<int>(w_bar.size());
  const double peak =
      std::max({1e-12, w_bar.cwiseAbs().maxCoeff(), w.cwiseAbs().maxCoeff()});
  const int width = std::max(320, 40 * n + 80), height = 360;
  const double x0 = 50, y_axis = 180, scale = 150.0 / peak;

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "  <line x1=\"" << x0 - 10 << "\" y1=\"" << y_axis << "\" x2=\""
     << width - 20 << "\" y2=\"" << y_axis
     << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  for (int i = 0; i < n; ++i) {
    const double cx = x0 + 40.0 * i;
    auto bar = [&](double cxo, double value, const char* color) {
      const double h = std::abs(value) * scale;
      const double top = value >= 0 ? y_axis - h : y_axis;
      os << "  <rect x=\"" << num_str(cxo) << "\" y=\"" << num_str(top)
         << "\" width=\"14\" height=\"" << num_str(h) << "\" fill=\"" << color
         << "\"/>\n";
    };
    bar(cx, w_bar[i], "#1f77b4");
    bar(cx + 16, w[i], "#d62728");
    os << "  <text x=\"" << num_str(cx + 8) << "\" y=\"" << height - 12
       << "\" font-size=\"12\" text-anchor=\"middle\">" << (i + 1)
       << "</text>\n";
  }
  os << "  <text x=\"" << x0 << "\" y=\"20\" font-size=\"12\">bound (blue) / "
        "weight (red)</text>\n";
  os << "</svg>\n";
}

}  // namespace svctune
