#pragma once

// Residual of the relaxed complementarity KKT system in slack-substituted
// form. For an affine MPEC (min M'v s.t. Rv+b >= 0, 0 <= Pv+a _|_ Qv >= 0)
// relaxed by G o H <= tau, the unknown is
//
//   z = (v, lambda_g, lambda_G, lambda_H, lambda_GH, u)
//
// and the residual stacks, in order: the Lagrangian gradient in v, the
// slack identity u + G o H - tau, and the four min-blocks pairing each
// multiplier with its function value. The min-blocks make the system
// piecewise smooth; a selection fixes one branch per row and yields an
// everywhere-defined Jacobian of that piece.

#include <cstdint>

#include "svctune/mpec.hpp"

namespace svctune {

struct IterateZ {
  Vec v;          // n_v
  Vec lambda_g;   // n_ineq
  Vec lambda_G;   // n_comp
  Vec lambda_H;   // n_comp
  Vec lambda_GH;  // n_comp
  Vec u;          // n_comp, slack for G o H <= tau

  Vec flatten() const {
    Vec z(v.size() + lambda_g.size() + 4 * lambda_G.size());
    Eigen::Index o = 0;
    for (const Vec* part : {&v, &lambda_g, &lambda_G, &lambda_H, &lambda_GH, &u}) {
      z.segment(o, part->size()) = *part;
      o += part->size();
    }
    return z;
  }

  static IterateZ split(const AffineMpec& p, const Vec& z) {
    if (z.size() != q_bar(p))
      throw std::invalid_argument("iterate: length mismatch");
    IterateZ r;
    Eigen::Index o = 0;
    auto take = [&](Eigen::Index len) {
      Vec s = z.segment(o, len);
      o += len;
      return s;
    };
    r.v = take(p.n_v());
    r.lambda_g = take(p.n_ineq());
    r.lambda_G = take(p.n_comp());
    r.lambda_H = take(p.n_comp());
    r.lambda_GH = take(p.n_comp());
    r.u = take(p.n_comp());
    return r;
  }

  static Eigen::Index q_bar(const AffineMpec& p) {
    return p.n_v() + p.n_ineq() + 4 * p.n_comp();
  }
};

// One branch per min-row: MULT when the multiplier argument is active
// (lambda <= function value; ties resolve to MULT for reproducibility),
// FUN when the function argument is strictly smaller.
enum class Branch : std::uint8_t { MULT, FUN };

struct ActiveSelection {
  std::vector<Branch> on_g, on_G, on_H, on_GH;
  Eigen::Index ties = 0;  // rows where both arguments coincided
};

// Largest violation of membership in the feasible set of the relaxed
// system: multipliers and slack nonnegative, g, G, H nonnegative at v.
inline double omega_violation(const AffineMpec& p, const IterateZ& z) {
  double r = 0.0;
  auto bump_nonneg = [&r](const Vec& x) {
    if (x.size() > 0) r = std::max(r, -x.minCoeff());
  };
  bump_nonneg(z.lambda_g);
  bump_nonneg(z.lambda_G);
  bump_nonneg(z.lambda_H);
  bump_nonneg(z.lambda_GH);
  bump_nonneg(z.u);
  bump_nonneg(p.eval_g(z.v));
  bump_nonneg(p.eval_G(z.v));
  bump_nonneg(p.eval_H(z.v));
  return std::max(r, 0.0);
}

// Gradient in v of L(v, lambda) = M'v - lambda_g'g - lambda_G'G
// - lambda_H'H + lambda_GH'(G o H - tau).
inline Vec lagrangian_grad(const AffineMpec& p, const IterateZ& z) {
  const Vec G = p.eval_G(z.v);
  const Vec H = p.eval_H(z.v);
  Vec grad = p.M - p.R.transpose() * z.lambda_g - p.P.transpose() * z.lambda_G -
             p.Q.transpose() * z.lambda_H +
             p.P.transpose() * z.lambda_GH.cwiseProduct(H) +
             p.Q.transpose() * z.lambda_GH.cwiseProduct(G);
  return grad;
}

inline Vec eval_residual(const AffineMpec& p, const IterateZ& z, double tau) {
  const Eigen::Index m = p.n_comp();
  const Vec G = p.eval_G(z.v);
  const Vec H = p.eval_H(z.v);
  const Vec g = p.eval_g(z.v);
  Vec F(IterateZ::q_bar(p));
  Eigen::Index o = 0;
  F.segment(o, p.n_v()) = lagrangian_grad(p, z);
  o += p.n_v();
  F.segment(o, m) = (z.u.array() + G.array() * H.array() - tau).matrix();
  o += m;
  F.segment(o, p.n_ineq()) = z.lambda_g.cwiseMin(g);
  o += p.n_ineq();
  F.segment(o, m) = z.lambda_G.cwiseMin(G);
  o += m;
  F.segment(o, m) = z.lambda_H.cwiseMin(H);
  o += m;
  F.segment(o, m) = z.lambda_GH.cwiseMin(z.u);
  return F;
}

inline ActiveSelection select_active(const AffineMpec& p, const IterateZ& z,
                                     double /*tau*/ = 0.0) {
  ActiveSelection s;
  auto pick = [&s](const Vec& lam, const Vec& fun, std::vector<Branch>& out) {
    out.resize(static_cast<size_t>(lam.size()));
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam[i] == fun[i]) ++s.ties;
      out[static_cast<size_t>(i)] = lam[i] <= fun[i] ? Branch::MULT : Branch::FUN;
    }
  };
  pick(z.lambda_g, p.eval_g(z.v), s.on_g);
  pick(z.lambda_G, p.eval_G(z.v), s.on_G);
  pick(z.lambda_H, p.eval_H(z.v), s.on_H);
  pick(z.lambda_GH, z.u, s.on_GH);
  return s;
}

// Evaluates the smooth piece named by `sel`: identical to eval_residual
// except each min-row reports its selected argument. Used by the Jacobian
// finite-difference checks; agrees with eval_residual at the selecting
// point itself.
inline Vec eval_piece(const AffineMpec& p, const IterateZ& z, double tau,
                      const ActiveSelection& sel) {
  const Eigen::Index m = p.n_comp();
  const Vec G = p.eval_G(z.v);
  const Vec H = p.eval_H(z.v);
  const Vec g = p.eval_g(z.v);
  Vec F(IterateZ::q_bar(p));
  Eigen::Index o = 0;
  F.segment(o, p.n_v()) = lagrangian_grad(p, z);
  o += p.n_v();
  F.segment(o, m) = (z.u.array() + G.array() * H.array() - tau).matrix();
  o += m;
  auto emit = [&](const Vec& lam, const Vec& fun, const std::vector<Branch>& br) {
    for (Eigen::Index i = 0; i < lam.size(); ++i, ++o)
      F[o] = br[static_cast<size_t>(i)] == Branch::MULT ? lam[i] : fun[i];
  };
  emit(z.lambda_g, g, sel.on_g);
  emit(z.lambda_G, G, sel.on_G);
  emit(z.lambda_H, H, sel.on_H);
  emit(z.lambda_GH, z.u, sel.on_GH);
  return F;
}

// Jacobian of the selected piece, assembled sparsely. Column layout matches
// IterateZ: [v | lambda_g | lambda_G | lambda_H | lambda_GH | u].
inline SpMat jacobian(const AffineMpec& p, const IterateZ& z, double /*tau*/,
                      const ActiveSelection& sel) {
  const Eigen::Index nv = p.n_v(), ng = p.n_ineq(), m = p.n_comp();
  const Eigen::Index q = IterateZ::q_bar(p);
  const Eigen::Index col_lg = nv, col_lG = nv + ng, col_lH = col_lG + m,
                     col_lGH = col_lH + m, col_u = col_lGH + m;
  const Eigen::Index row_slack = nv, row_g = nv + m, row_G = row_g + ng,
                     row_H = row_G + m, row_GH = row_H + m;
  const Vec G = p.eval_G(z.v);
  const Vec H = p.eval_H(z.v);

  std::vector<Triplet> tp;
  tp.reserve(static_cast<size_t>(4 * (p.P.nonZeros() + p.Q.nonZeros()) +
                                 2 * p.R.nonZeros() + 3 * m + ng));

  // Hessian of the Lagrangian: sum_i lambda_GH_i (P_i'Q_i + Q_i'P_i).
  // With Q sparse this stays a sum of sparse outer products.
  Eigen::SparseMatrix<double, Eigen::RowMajor> Pr(p.P), Qr(p.Q), Rr(p.R);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lam = z.lambda_GH[i];
    if (lam == 0.0) continue;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator pi(Pr, i);
         pi; ++pi)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator qi(Qr, i);
           qi; ++qi) {
        tp.emplace_back(pi.col(), qi.col(), lam * pi.value() * qi.value());
        tp.emplace_back(qi.col(), pi.col(), lam * pi.value() * qi.value());
      }
  }
  // d(grad L)/d lambda and the lambda_GH coupling columns
  // (S column i = G_i grad H_i + H_i grad G_i).
  for (Eigen::Index k = 0; k < p.R.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.R, k); it; ++it)
      tp.emplace_back(it.col(), col_lg + it.row(), -it.value());
  for (Eigen::Index k = 0; k < p.P.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.P, k); it; ++it) {
      tp.emplace_back(it.col(), col_lG + it.row(), -it.value());
      tp.emplace_back(it.col(), col_lGH + it.row(), H[it.row()] * it.value());
      // slack row i: H_i P_i over v columns
      tp.emplace_back(row_slack + it.row(), it.col(), H[it.row()] * it.value());
    }
  for (Eigen::Index k = 0; k < p.Q.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.Q, k); it; ++it) {
      tp.emplace_back(it.col(), col_lH + it.row(), -it.value());
      tp.emplace_back(it.col(), col_lGH + it.row(), G[it.row()] * it.value());
      tp.emplace_back(row_slack + it.row(), it.col(), G[it.row()] * it.value());
    }
  for (Eigen::Index i = 0; i < m; ++i)
    tp.emplace_back(row_slack + i, col_u + i, 1.0);

  // Min-rows: unit row on the multiplier (MULT) or the function's gradient
  // row (FUN).
  for (Eigen::Index i = 0; i < ng; ++i) {
    if (sel.on_g[static_cast<size_t>(i)] == Branch::MULT) {
      tp.emplace_back(row_g + i, col_lg + i, 1.0);
    } else {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Rr, i);
           it; ++it)
        tp.emplace_back(row_g + i, it.col(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (sel.on_G[static_cast<size_t>(i)] == Branch::MULT) {
      tp.emplace_back(row_G + i, col_lG + i, 1.0);
    } else {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Pr, i);
           it; ++it)
        tp.emplace_back(row_G + i, it.col(), it.value());
    }
    if (sel.on_H[static_cast<size_t>(i)] == Branch::MULT) {
      tp.emplace_back(row_H + i, col_lH + i, 1.0);
    } else {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Qr, i);
           it; ++it)
        tp.emplace_back(row_H + i, it.col(), it.value());
    }
    tp.emplace_back(row_GH + i,
                    (sel.on_GH[static_cast<size_t>(i)] == Branch::MULT
                         ? col_lGH
                         : col_u) +
                        i,
                    1.0);
  }

  SpMat J(q, q);
  J.setFromTriplets(tp.begin(), tp.end());
  return J;
}

// Per-block infinity norms of a residual vector, for tracing.
struct ResidualBlockNorms {
  double grad = 0, slack = 0, min_g = 0, min_G = 0, min_H = 0, min_GH = 0;
};

inline ResidualBlockNorms block_norms(const AffineMpec& p, const Vec& F) {
  const Eigen::Index nv = p.n_v(), ng = p.n_ineq(), m = p.n_comp();
  auto seg_norm = [&F](Eigen::Index o, Eigen::Index len) {
    return len > 0 ? F.segment(o, len).cwiseAbs().maxCoeff() : 0.0;
  };
  ResidualBlockNorms b;
  b.grad = seg_norm(0, nv);
  b.slack = seg_norm(nv, m);
  b.min_g = seg_norm(nv + m, ng);
  b.min_G = seg_norm(nv + m + ng, m);
  b.min_H = seg_norm(nv + 2 * m + ng, m);
  b.min_GH = seg_norm(nv + 3 * m + ng, m);
  return b;
}

}  // namespace svctune
