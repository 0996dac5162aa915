#pragma once

// Assembly of the K-fold cross-validation bilevel SVC problem as a
// mathematical program with equilibrium constraints (MPEC) in compact
// affine form:
//
//   min f(v) = M'v   s.t.  g(v) = Rv + b >= 0,
//                          0 <= G(v) = Pv + a  _|_  H(v) = Qv >= 0,
//
// over v = [C, wbar, zeta, z, alpha, xi, beta, gamma]. The per-fold data
// blocks A^t (validation rows y_i x_i') and B^t (training rows) are stored
// densely; all products such as AB' and BB' are formed blockwise. Also
// provides the index-set classification of the complementarity structure
// and the constraint-qualification diagnostics built on it.

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "svctune/common.hpp"
#include "svctune/dataio.hpp"

namespace svctune {

// Generic affine MPEC data consumed by the residual and inner-solve layers.
// Unlike the SVC assembly below, H may be an arbitrary affine selection Qv.
struct AffineMpec {
  Vec M;    // objective gradient, length n_v
  SpMat P;  // m_c x n_v
  Vec a;    // length m_c
  SpMat Q;  // m_c x n_v
  SpMat R;  // n_g x n_v
  Vec b;    // length n_g

  Eigen::Index n_v() const { return M.size(); }
  Eigen::Index n_comp() const { return a.size(); }
  Eigen::Index n_ineq() const { return b.size(); }

  Vec eval_G(const Vec& v) const { return P * v + a; }
  Vec eval_H(const Vec& v) const { return Q * v; }
  Vec eval_g(const Vec& v) const { return R * v + b; }
  double eval_f(const Vec& v) const { return M.dot(v); }

  void validate() const {
    if (P.rows() != a.size() || Q.rows() != a.size() || R.rows() != b.size() ||
        P.cols() != M.size() || Q.cols() != M.size() || R.cols() != M.size())
      throw std::invalid_argument("affine mpec: inconsistent dimensions");
  }
};

struct MpecDims {
  Eigen::Index K = 0, m1 = 0, m2 = 0, n = 0;
  Eigen::Index n_bar() const { return 1 + n; }
  Eigen::Index m_bar() const { return 2 * K * (m1 + m2 + n); }
  Eigen::Index n_v() const { return n_bar() + m_bar(); }
};

struct MpecBounds {
  double c_lb = 0, c_ub = 0;
  Vec wbar_lb, wbar_ub;
};

// Named slices of the variable vector, stored contiguously in the order
// [C, wbar, zeta, z, alpha, xi, beta, gamma].
struct VariableVector {
  double C = 0;
  Vec w_bar, zeta, z, alpha, xi, beta, gamma;

  Vec flatten() const {
    Vec v(1 + w_bar.size() + zeta.size() + z.size() + alpha.size() +
          xi.size() + beta.size() + gamma.size());
    Eigen::Index o = 0;
    v[o++] = C;
    for (const Vec* part : {&w_bar, &zeta, &z, &alpha, &xi, &beta, &gamma}) {
      v.segment(o, part->size()) = *part;
      o += part->size();
    }
    return v;
  }

  static VariableVector split(const MpecDims& d, const Vec& v) {
    if (v.size() != d.n_v())
      throw std::invalid_argument("variable vector: length mismatch");
    VariableVector r;
    Eigen::Index o = 0;
    r.C = v[o++];
    auto take = [&](Eigen::Index len) {
      Vec s = v.segment(o, len);
      o += len;
      return s;
    };
    r.w_bar = take(d.n);
    r.zeta = take(d.K * d.m1);
    r.z = take(d.K * d.m1);
    r.alpha = take(d.K * d.m2);
    r.xi = take(d.K * d.m2);
    r.beta = take(d.K * d.n);
    r.gamma = take(d.K * d.n);
    return r;
  }
};

// Partition of the complementarity structure at a point. All indices are
// 0-based and local to their part: lambda/psi/pi sets index training rows
// [K*m2], validation rows [K*m1] and bound rows [K*n] respectively, while
// i_g / i_h / i_gh index the stacked rows [m_bar] and ig the rows of g.
struct IndexSets {
  double tol = 0;
  std::vector<Eigen::Index> i_g, i_h, i_gh;  // Definition-2 style sets
  std::vector<Eigen::Index> g_active;        // active rows of g(v)
  std::vector<Eigen::Index> psi1, psi1_zero, psi1_plus, psi2, psi3;
  std::vector<Eigen::Index> lambda1, lambda2, lambda3, lambda3_plus,
      lambda3_c, lambda_u;
  std::vector<Eigen::Index> pi1, pi1_zero, pi1_plus, pi2, pi3, pi3_zero,
      pi3_plus;
};

struct MfcqReport {
  std::vector<bool> strict_interior;  // per fold: -wbar < w^t < wbar
  Eigen::Index n_active_rows = 0;     // |lambda1 U lambda3|
  Eigen::Index rank_b_sub = 0;
  bool full_row_rank = true;
  bool positive_definite = true;
  double min_eigenvalue = kInf;  // of (BB')_(L,L); +inf when L is empty
};

class MpecProblem {
 public:
  MpecProblem() = default;

  MpecProblem(std::vector<Mat> a_blocks, std::vector<Mat> b_blocks,
              MpecBounds bounds)
      : A_(std::move(a_blocks)), B_(std::move(b_blocks)), bounds_(std::move(bounds)) {
    if (A_.empty() || A_.size() != B_.size())
      throw std::invalid_argument("mpec assembly: need one A and B block per fold");
    dims_.K = static_cast<Eigen::Index>(A_.size());
    dims_.m1 = A_[0].rows();
    dims_.m2 = B_[0].rows();
    dims_.n = A_[0].cols();
    for (const Mat& a : A_)
      if (a.rows() != dims_.m1 || a.cols() != dims_.n)
        throw std::invalid_argument("mpec assembly: ragged validation blocks");
    for (const Mat& b : B_)
      if (b.rows() != dims_.m2 || b.cols() != dims_.n)
        throw std::invalid_argument("mpec assembly: ragged training blocks");
    if (dims_.m1 == 0 || dims_.m2 == 0 || dims_.n == 0)
      throw std::invalid_argument("mpec assembly: empty fold blocks");
    if (!(bounds_.c_lb > 0.0) || !(bounds_.c_lb < bounds_.c_ub))
      throw std::invalid_argument("mpec assembly: need 0 < C_lb < C_ub");
    if (bounds_.wbar_lb.size() != dims_.n || bounds_.wbar_ub.size() != dims_.n)
      throw std::invalid_argument("mpec assembly: bound vectors must have length n");
    for (Eigen::Index j = 0; j < dims_.n; ++j)
      if (!(bounds_.wbar_lb[j] > 0.0) || !(bounds_.wbar_lb[j] < bounds_.wbar_ub[j]))
        throw std::invalid_argument("mpec assembly: need 0 < wbar_lb < wbar_ub");
  }

  const MpecDims& dims() const { return dims_; }
  const MpecBounds& bounds() const { return bounds_; }
  const Mat& A(Eigen::Index t) const { return A_.at(static_cast<size_t>(t)); }
  const Mat& B(Eigen::Index t) const { return B_.at(static_cast<size_t>(t)); }

  // ---- variable layout -------------------------------------------------

  Eigen::Index off_wbar() const { return 1; }
  Eigen::Index off_zeta() const { return 1 + dims_.n; }
  Eigen::Index off_z() const { return off_zeta() + dims_.K * dims_.m1; }
  Eigen::Index off_alpha() const { return off_z() + dims_.K * dims_.m1; }
  Eigen::Index off_xi() const { return off_alpha() + dims_.K * dims_.m2; }
  Eigen::Index off_beta() const { return off_xi() + dims_.K * dims_.m2; }
  Eigen::Index off_gamma() const { return off_beta() + dims_.K * dims_.n; }

  // Row offsets of the six G blocks (same order as the tail of v).
  Eigen::Index row_zeta() const { return 0; }
  Eigen::Index row_z() const { return dims_.K * dims_.m1; }
  Eigen::Index row_alpha() const { return 2 * dims_.K * dims_.m1; }
  Eigen::Index row_xi() const { return row_alpha() + dims_.K * dims_.m2; }
  Eigen::Index row_beta() const { return row_xi() + dims_.K * dims_.m2; }
  Eigen::Index row_gamma() const { return row_beta() + dims_.K * dims_.n; }

  // ---- affine evaluation (blockwise, never forming global products) ----

  double eval_f(const Vec& v) const {
    check_len(v);
    return v.segment(off_zeta(), dims_.K * dims_.m1).sum() /
           static_cast<double>(dims_.K * dims_.m1);
  }

  // w^t = (B^t)' alpha^t + beta^t - gamma^t, one vector per fold.
  std::vector<Vec> reconstruct_w(const Vec& v) const {
    check_len(v);
    std::vector<Vec> w;
    w.reserve(static_cast<size_t>(dims_.K));
    for (Eigen::Index t = 0; t < dims_.K; ++t) {
      Vec at = v.segment(off_alpha() + t * dims_.m2, dims_.m2);
      Vec bt = v.segment(off_beta() + t * dims_.n, dims_.n);
      Vec gt = v.segment(off_gamma() + t * dims_.n, dims_.n);
      w.push_back(B(t).transpose() * at + bt - gt);
    }
    return w;
  }

  Vec eval_G(const Vec& v) const {
    check_len(v);
    const auto& d = dims_;
    Vec out(d.m_bar());
    const std::vector<Vec> w = reconstruct_w(v);
    const double C = v[0];
    Vec wbar = v.segment(off_wbar(), d.n);
    for (Eigen::Index t = 0; t < d.K; ++t) {
      Vec zt = v.segment(off_z() + t * d.m1, d.m1);
      Vec zetat = v.segment(off_zeta() + t * d.m1, d.m1);
      Vec at = v.segment(off_alpha() + t * d.m2, d.m2);
      Vec xit = v.segment(off_xi() + t * d.m2, d.m2);
      out.segment(row_zeta() + t * d.m1, d.m1) = A(t) * w[static_cast<size_t>(t)] + zt;
      out.segment(row_z() + t * d.m1, d.m1) = (1.0 - zetat.array()).matrix();
      out.segment(row_alpha() + t * d.m2, d.m2) =
          (B(t) * w[static_cast<size_t>(t)]).array() - 1.0 + xit.array();
      out.segment(row_xi() + t * d.m2, d.m2) = (C - at.array()).matrix();
      out.segment(row_beta() + t * d.n, d.n) = w[static_cast<size_t>(t)] + wbar;
      out.segment(row_gamma() + t * d.n, d.n) = wbar - w[static_cast<size_t>(t)];
    }
    return out;
  }

  // H(v) is exactly the tail of v: [zeta, z, alpha, xi, beta, gamma].
  Vec eval_H(const Vec& v) const {
    check_len(v);
    return v.tail(dims_.m_bar());
  }

  Vec eval_g(const Vec& v) const {
    check_len(v);
    const auto& d = dims_;
    Vec out(2 * d.n_bar());
    Vec wbar = v.segment(off_wbar(), d.n);
    out[0] = bounds_.c_ub - v[0];
    out[1] = v[0] - bounds_.c_lb;
    out.segment(2, d.n) = bounds_.wbar_ub - wbar;
    out.segment(2 + d.n, d.n) = wbar - bounds_.wbar_lb;
    return out;
  }

  // ---- compact sparse form ----------------------------------------------

  AffineMpec compact() const {
    const auto& d = dims_;
    AffineMpec c;
    c.M = Vec::Zero(d.n_v());
    c.M.segment(off_zeta(), d.K * d.m1) =
        Vec::Constant(d.K * d.m1, 1.0 / static_cast<double>(d.K * d.m1));
    c.a = Vec::Zero(d.m_bar());
    c.a.segment(row_z(), d.K * d.m1).setConstant(1.0);
    c.a.segment(row_alpha(), d.K * d.m2).setConstant(-1.0);

    std::vector<Triplet> tp;
    for (Eigen::Index t = 0; t < d.K; ++t) {
      const Mat abt = A(t) * B(t).transpose();  // m1 x m2
      const Mat bbt = B(t) * B(t).transpose();  // m2 x m2
      for (Eigen::Index i = 0; i < d.m1; ++i) {
        const Eigen::Index r = row_zeta() + t * d.m1 + i;
        tp.emplace_back(r, off_z() + t * d.m1 + i, 1.0);
        for (Eigen::Index k = 0; k < d.m2; ++k)
          tp.emplace_back(r, off_alpha() + t * d.m2 + k, abt(i, k));
        for (Eigen::Index j = 0; j < d.n; ++j) {
          tp.emplace_back(r, off_beta() + t * d.n + j, A(t)(i, j));
          tp.emplace_back(r, off_gamma() + t * d.n + j, -A(t)(i, j));
        }
        tp.emplace_back(row_z() + t * d.m1 + i, off_zeta() + t * d.m1 + i, -1.0);
      }
      for (Eigen::Index i = 0; i < d.m2; ++i) {
        const Eigen::Index r = row_alpha() + t * d.m2 + i;
        for (Eigen::Index k = 0; k < d.m2; ++k)
          tp.emplace_back(r, off_alpha() + t * d.m2 + k, bbt(i, k));
        tp.emplace_back(r, off_xi() + t * d.m2 + i, 1.0);
        for (Eigen::Index j = 0; j < d.n; ++j) {
          tp.emplace_back(r, off_beta() + t * d.n + j, B(t)(i, j));
          tp.emplace_back(r, off_gamma() + t * d.n + j, -B(t)(i, j));
        }
        const Eigen::Index rx = row_xi() + t * d.m2 + i;
        tp.emplace_back(rx, 0, 1.0);
        tp.emplace_back(rx, off_alpha() + t * d.m2 + i, -1.0);
      }
      for (Eigen::Index j = 0; j < d.n; ++j) {
        const Eigen::Index rb = row_beta() + t * d.n + j;
        const Eigen::Index rg = row_gamma() + t * d.n + j;
        tp.emplace_back(rb, off_wbar() + j, 1.0);
        tp.emplace_back(rg, off_wbar() + j, 1.0);
        for (Eigen::Index k = 0; k < d.m2; ++k) {
          tp.emplace_back(rb, off_alpha() + t * d.m2 + k, B(t)(k, j));
          tp.emplace_back(rg, off_alpha() + t * d.m2 + k, -B(t)(k, j));
        }
        tp.emplace_back(rb, off_beta() + t * d.n + j, 1.0);
        tp.emplace_back(rb, off_gamma() + t * d.n + j, -1.0);
        tp.emplace_back(rg, off_beta() + t * d.n + j, -1.0);
        tp.emplace_back(rg, off_gamma() + t * d.n + j, 1.0);
      }
    }
    c.P.resize(d.m_bar(), d.n_v());
    c.P.setFromTriplets(tp.begin(), tp.end());

    tp.clear();
    for (Eigen::Index i = 0; i < d.m_bar(); ++i)
      tp.emplace_back(i, d.n_bar() + i, 1.0);
    c.Q.resize(d.m_bar(), d.n_v());
    c.Q.setFromTriplets(tp.begin(), tp.end());

    tp.clear();
    c.b.resize(2 * d.n_bar());
    tp.emplace_back(0, 0, -1.0);
    c.b[0] = bounds_.c_ub;
    tp.emplace_back(1, 0, 1.0);
    c.b[1] = -bounds_.c_lb;
    for (Eigen::Index j = 0; j < d.n; ++j) {
      tp.emplace_back(2 + j, off_wbar() + j, -1.0);
      c.b[2 + j] = bounds_.wbar_ub[j];
      tp.emplace_back(2 + d.n + j, off_wbar() + j, 1.0);
      c.b[2 + d.n + j] = -bounds_.wbar_lb[j];
    }
    c.R.resize(2 * d.n_bar(), d.n_v());
    c.R.setFromTriplets(tp.begin(), tp.end());
    return c;
  }

  // ---- index-set classification ------------------------------------------

  IndexSets classify_index_sets(const Vec& v, double tol = 1e-6) const {
    check_len(v);
    const auto& d = dims_;
    IndexSets s;
    s.tol = tol;
    const Vec G = eval_G(v);
    const Vec H = eval_H(v);
    for (Eigen::Index i = 0; i < d.m_bar(); ++i) {
      const bool g0 = std::abs(G[i]) <= tol;
      const bool h0 = std::abs(H[i]) <= tol;
      if (g0 && h0) s.i_gh.push_back(i);
      else if (g0) s.i_g.push_back(i);
      else if (h0) s.i_h.push_back(i);
    }
    const Vec gv = eval_g(v);
    for (Eigen::Index i = 0; i < gv.size(); ++i)
      if (std::abs(gv[i]) <= tol) s.g_active.push_back(i);

    const double C = v[0];
    // Validation rows: zeta against (AB'alpha + A beta - A gamma + z).
    for (Eigen::Index i = 0; i < d.K * d.m1; ++i) {
      const double zeta = v[off_zeta() + i];
      const double zi = v[off_z() + i];
      const double gi = G[row_zeta() + i];
      if (zi > tol) {
        s.psi3.push_back(i);
      } else if (std::abs(gi) <= tol) {
        s.psi1.push_back(i);
        if (zeta <= tol) s.psi1_zero.push_back(i);
        else s.psi1_plus.push_back(i);
      } else {
        s.psi2.push_back(i);
      }
    }
    // Training rows: alpha against the margin residual, with xi.
    for (Eigen::Index i = 0; i < d.K * d.m2; ++i) {
      const double ai = v[off_alpha() + i];
      const double xii = v[off_xi() + i];
      const double gi = G[row_alpha() + i];
      if (std::abs(gi) <= tol) {
        if (xii > tol) {
          s.lambda_u.push_back(i);
        } else if (ai <= tol) {
          s.lambda1.push_back(i);
        } else {
          s.lambda3.push_back(i);
          if (ai >= C - tol) s.lambda3_c.push_back(i);
          else s.lambda3_plus.push_back(i);
        }
      } else {
        s.lambda2.push_back(i);
      }
    }
    // Bound rows: w^t against the faces of [-wbar, wbar].
    const std::vector<Vec> w = reconstruct_w(v);
    for (Eigen::Index i = 0; i < d.K * d.n; ++i) {
      const Eigen::Index t = i / d.n, j = i % d.n;
      const double wj = w[static_cast<size_t>(t)][j];
      const double wb = v[off_wbar() + j];
      const double bi = v[off_beta() + i];
      const double gi = v[off_gamma() + i];
      if (std::abs(wj + wb) <= tol) {
        s.pi1.push_back(i);
        if (bi > tol) s.pi1_plus.push_back(i);
        else s.pi1_zero.push_back(i);
      } else if (std::abs(wb - wj) <= tol) {
        s.pi3.push_back(i);
        if (gi > tol) s.pi3_plus.push_back(i);
        else s.pi3_zero.push_back(i);
      } else {
        s.pi2.push_back(i);
      }
    }
    return s;
  }

  // Rows of the stacked training matrix selected by lambda1 U lambda3, laid
  // out over the K*n block-diagonal columns (fold t's row occupies columns
  // [t*n, (t+1)*n)).
  Mat b_submatrix(const std::vector<Eigen::Index>& rows) const {
    const auto& d = dims_;
    Mat sub = Mat::Zero(static_cast<Eigen::Index>(rows.size()), d.K * d.n);
    for (size_t r = 0; r < rows.size(); ++r) {
      const Eigen::Index t = rows[r] / d.m2, i = rows[r] % d.m2;
      sub.block(static_cast<Eigen::Index>(r), t * d.n, 1, d.n) = B(t).row(i);
    }
    return sub;
  }

  MfcqReport mfcq_diagnostic(const Vec& v, double tol = 1e-6) const {
    check_len(v);
    const auto& d = dims_;
    MfcqReport rep;
    const std::vector<Vec> w = reconstruct_w(v);
    Vec wbar = v.segment(off_wbar(), d.n);
    for (Eigen::Index t = 0; t < d.K; ++t) {
      bool strict = true;
      for (Eigen::Index j = 0; j < d.n; ++j)
        strict = strict && (wbar[j] - std::abs(w[static_cast<size_t>(t)][j]) > tol);
      rep.strict_interior.push_back(strict);
    }

    IndexSets s = classify_index_sets(v, tol);
    std::vector<Eigen::Index> rows = s.lambda1;
    rows.insert(rows.end(), s.lambda3.begin(), s.lambda3.end());
    std::sort(rows.begin(), rows.end());
    rep.n_active_rows = static_cast<Eigen::Index>(rows.size());
    if (rows.empty()) return rep;  // vacuously well-conditioned

    const Mat sub = b_submatrix(rows);
    Eigen::JacobiSVD<Mat> svd(sub);
    const Vec sv = svd.singularValues();
    const double thresh = tol * (sv.size() > 0 ? sv[0] : 0.0);
    rep.rank_b_sub = (sv.array() > thresh).count();
    rep.full_row_rank = rep.rank_b_sub == sub.rows();

    Mat bbar = sub * sub.transpose();  // equals (BB')_(L,L) blockwise
    Eigen::SelfAdjointEigenSolver<Mat> eig(bbar);
    rep.min_eigenvalue = eig.eigenvalues().minCoeff();
    rep.positive_definite = rep.min_eigenvalue > tol;
    return rep;
  }

  // ---- serialization -----------------------------------------------------

  void dump(std::ostream& os) const {
    const auto& d = dims_;
    os << "svctune-problem v1\n";
    os << "dims " << d.K << ' ' << d.m1 << ' ' << d.m2 << ' ' << d.n << '\n';
    os << "c_bounds " << num_str(bounds_.c_lb) << ' ' << num_str(bounds_.c_ub)
       << '\n';
    auto put_vec = [&os](const char* tag, const Vec& x) {
      os << tag;
      for (Eigen::Index j = 0; j < x.size(); ++j) os << ' ' << num_str(x[j]);
      os << '\n';
    };
    put_vec("wbar_lb", bounds_.wbar_lb);
    put_vec("wbar_ub", bounds_.wbar_ub);
    for (Eigen::Index t = 0; t < d.K; ++t) {
      os << "A " << t << '\n';
      for (Eigen::Index i = 0; i < d.m1; ++i) {
        for (Eigen::Index j = 0; j < d.n; ++j)
          os << (j ? " " : "") << num_str(A(t)(i, j));
        os << '\n';
      }
      os << "B " << t << '\n';
      for (Eigen::Index i = 0; i < d.m2; ++i) {
        for (Eigen::Index j = 0; j < d.n; ++j)
          os << (j ? " " : "") << num_str(B(t)(i, j));
        os << '\n';
      }
    }
  }

  static MpecProblem load(std::istream& is) {
    auto fail = [](const std::string& what) {
      throw std::runtime_error("problem load: " + what);
    };
    std::string line;
    if (!std::getline(is, line) || line != "svctune-problem v1")
      fail("bad magic line");
    Eigen::Index K, m1, m2, n;
    std::string tag;
    is >> tag >> K >> m1 >> m2 >> n;
    if (!is || tag != "dims" || K <= 0 || m1 <= 0 || m2 <= 0 || n <= 0)
      fail("bad dims line");
    MpecBounds bd;
    is >> tag >> bd.c_lb >> bd.c_ub;
    if (!is || tag != "c_bounds") fail("bad c_bounds line");
    auto get_vec = [&](const char* want) {
      Vec x(n);
      is >> tag;
      if (!is || tag != want) fail(std::string("expected ") + want);
      for (Eigen::Index j = 0; j < n; ++j) is >> x[j];
      if (!is) fail(std::string("short ") + want);
      return x;
    };
    bd.wbar_lb = get_vec("wbar_lb");
    bd.wbar_ub = get_vec("wbar_ub");
    std::vector<Mat> ab(static_cast<size_t>(K)), bb(static_cast<size_t>(K));
    for (Eigen::Index t = 0; t < K; ++t) {
      Eigen::Index tt;
      is >> tag >> tt;
      if (!is || tag != "A" || tt != t) fail("expected block A " + std::to_string(t));
      Mat a(m1, n);
      for (Eigen::Index i = 0; i < m1; ++i)
        for (Eigen::Index j = 0; j < n; ++j) is >> a(i, j);
      is >> tag >> tt;
      if (!is || tag != "B" || tt != t) fail("expected block B " + std::to_string(t));
      Mat b(m2, n);
      for (Eigen::Index i = 0; i < m2; ++i)
        for (Eigen::Index j = 0; j < n; ++j) is >> b(i, j);
      if (!is) fail("short matrix block");
      ab[static_cast<size_t>(t)] = std::move(a);
      bb[static_cast<size_t>(t)] = std::move(b);
    }
    return MpecProblem(std::move(ab), std::move(bb), std::move(bd));
  }

 private:
  void check_len(const Vec& v) const {
    if (v.size() != dims_.n_v())
      throw std::invalid_argument("mpec: variable vector length mismatch");
  }

  std::vector<Mat> A_, B_;
  MpecBounds bounds_;
  MpecDims dims_;
};

// Builds the per-fold blocks from a cross-validation split: fold t's
// validation rows y_i x_i' form A^t and its training rows form B^t.
inline MpecProblem assemble(const CvSplit& split, const Dataset& data,
                            const MpecBounds& bounds) {
  if (split.K < 2) throw std::invalid_argument("mpec assembly: need K >= 2");
  const Eigen::Index n = data.n_features;
  std::vector<Mat> ab, bb;
  for (Eigen::Index t = 0; t < split.K; ++t) {
    const auto& val = split.folds.at(static_cast<size_t>(t));
    const auto train = split.training_indices(static_cast<int>(t));
    Mat at(static_cast<Eigen::Index>(val.size()), n);
    for (size_t i = 0; i < val.size(); ++i)
      at.row(static_cast<Eigen::Index>(i)) =
          data.y[val[i]] * data.x.row(static_cast<Eigen::Index>(val[i]));
    Mat bt(static_cast<Eigen::Index>(train.size()), n);
    for (size_t i = 0; i < train.size(); ++i)
      bt.row(static_cast<Eigen::Index>(i)) =
          data.y[train[i]] * data.x.row(static_cast<Eigen::Index>(train[i]));
    ab.push_back(std::move(at));
    bb.push_back(std::move(bt));
  }
  return MpecProblem(std::move(ab), std::move(bb), bounds);
}

}  // namespace svctune
