#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "svctune/lpnewton.hpp"
#include "svctune/mpec.hpp"

using namespace svctune;

namespace {

// Same three-variable problem as the residual tests: min v1 + v2 - v3 with
// -v3 >= 0 and the pair (v1, v2), relaxed at tau = 0.02. Root:
// (0, 0, 0, 1, 1, 1, 0, 0.02).
AffineMpec relaxed_sign_problem() {
  AffineMpec p;
  p.M = Vec(3);
  p.M << 1, 1, -1;
  p.P.resize(1, 3);
  p.P.insert(0, 0) = 1.0;
  p.a = Vec::Zero(1);
  p.Q.resize(1, 3);
  p.Q.insert(0, 1) = 1.0;
  p.R.resize(1, 3);
  p.R.insert(0, 2) = -1.0;
  p.b = Vec::Zero(1);
  p.P.makeCompressed();
  p.Q.makeCompressed();
  p.R.makeCompressed();
  return p;
}

IterateZ sign_problem_start(const AffineMpec& p) {
  Vec z(8);
  z << 0.1, 0.1, -0.1, 1, 1, 1, 0.1, 0.02;
  return IterateZ::split(p, z);
}

Vec sign_problem_root() {
  Vec z(8);
  z << 0, 0, 0, 1, 1, 1, 0, 0.02;
  return z;
}

// All maps constant: J of the selected piece is zero in the only row with a
// nonzero residual, so no direction can improve and the model decrease
// vanishes.
AffineMpec frozen_gradient_problem() {
  AffineMpec p;
  p.M = Vec::Constant(1, 1.0);
  p.P.resize(1, 1);
  p.a = Vec::Constant(1, 3.0);
  p.Q.resize(1, 1);
  p.R.resize(1, 1);
  p.b = Vec::Constant(1, 2.0);
  return p;
}

MpecProblem random_cv_problem(Rng& rng, int m1, int m2, int n) {
  std::uniform_real_distribution<double> xd(-2.0, 2.0);
  auto block = [&](int rows) {
    Mat b(rows, n);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = xd(rng);
    return b;
  };
  std::vector<Mat> ab{block(m1), block(m1)};
  std::vector<Mat> bb{block(m2), block(m2)};
  MpecBounds bounds;
  bounds.c_lb = 0.1;
  bounds.c_ub = 10.0;
  bounds.wbar_lb = Vec::Constant(n, 0.2);
  bounds.wbar_ub = Vec::Constant(n, 2.0);
  return MpecProblem(std::move(ab), std::move(bb), std::move(bounds));
}

// A point of the cross-validation compact form that sits inside the feasible
// set: w = 0 (alpha = beta = gamma = 0) with slacks padded to keep every
// constraint value nonnegative.
IterateZ interior_cv_iterate(const MpecProblem& prob, Rng& rng) {
  const MpecDims& d = prob.dims();
  VariableVector vv;
  vv.C = 1.0;
  vv.w_bar = Vec::Constant(d.n, 1.0);
  vv.zeta = Vec::Constant(d.K * d.m1, 0.5);
  vv.z = Vec::Constant(d.K * d.m1, 1.0);
  vv.alpha = Vec::Zero(d.K * d.m2);
  vv.xi = Vec::Constant(d.K * d.m2, 1.5);
  vv.beta = Vec::Zero(d.K * d.n);
  vv.gamma = Vec::Zero(d.K * d.n);
  const AffineMpec p = prob.compact();
  std::uniform_real_distribution<double> ld(0.0, 1.0);
  IterateZ z;
  z.v = vv.flatten();
  z.lambda_g = Vec::NullaryExpr(p.n_ineq(), [&] { return ld(rng); });
  z.lambda_G = Vec::NullaryExpr(p.n_comp(), [&] { return ld(rng); });
  z.lambda_H = Vec::NullaryExpr(p.n_comp(), [&] { return ld(rng); });
  z.lambda_GH = Vec::NullaryExpr(p.n_comp(), [&] { return ld(rng); });
  z.u = Vec::NullaryExpr(p.n_comp(), [&] { return ld(rng); });
  return z;
}

}  // namespace

TEST_CASE("step subproblem has the documented shape and bounds") {
  const AffineMpec p = relaxed_sign_problem();
  const IterateZ z = sign_problem_start(p);
  const Vec F = eval_residual(p, z, 0.02);
  const SpMat J = jacobian(p, z, 0.02, select_active(p, z, 0.02));
  const SparseLp lp = build_subproblem(p, z, F, J);

  REQUIRE(lp.n == 9);  // eta + 8 step components
  REQUIRE(lp.n_rows() == 4 * 8 + 1 + 2);
  REQUIRE(lp.c[0] == 1.0);
  REQUIRE(lp.c.tail(8).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(lp.lb[0] == 0.0);
  for (int j = 1; j <= 3; ++j) REQUIRE(lp.lb[j] == -kInf);  // v steps free
  REQUIRE(lp.lb[4] == -1.0);    // lambda_g may drop to zero
  REQUIRE(lp.lb[8] == -0.02);   // slack u likewise
  REQUIRE(lp.ub.maxCoeff() == kInf);
}

TEST_CASE("subproblem optimum obeys the eta bound and its own constraints") {
  const AffineMpec p = relaxed_sign_problem();
  const IterateZ z = sign_problem_start(p);
  const Vec F = eval_residual(p, z, 0.02);
  const double nf = inf_norm(F);
  const SpMat J = jacobian(p, z, 0.02, select_active(p, z, 0.02));
  const LpSolution sol = solve_lp(build_subproblem(p, z, F, J));

  REQUIRE(sol.status == LpStatus::Optimal);
  // (1/|F|, 0) is feasible, so the optimum can never exceed 1/|F|.
  REQUIRE(sol.objective <= 1.0 / nf + 1e-9);
  const double eta = sol.x[0];
  const Vec d = sol.x.tail(8);
  REQUIRE(inf_norm(Vec(F + J * d)) <= eta * nf * nf + 1e-9);
  REQUIRE(inf_norm(d) <= eta * nf + 1e-9);
  const IterateZ znew = IterateZ::split(p, Vec(z.flatten() + d));
  REQUIRE(omega_violation(p, znew) <= 1e-9);
}

TEST_CASE("subproblem cannot be posed at a root") {
  const AffineMpec p = relaxed_sign_problem();
  const IterateZ z = IterateZ::split(p, sign_problem_root());
  const Vec F = eval_residual(p, z, 0.02);
  const SpMat J = jacobian(p, z, 0.02, select_active(p, z, 0.02));
  REQUIRE_THROWS_AS(build_subproblem(p, z, F, J), std::invalid_argument);
}

TEST_CASE("inner solver drives the sign problem to its root") {
  const AffineMpec p = relaxed_sign_problem();
  const InnerResult r = inner_solve(p, sign_problem_start(p), 0.02, 1e-10);

  REQUIRE((r.status == InnerStatus::ToleranceMet ||
           r.status == InnerStatus::ResidualZero));
  REQUIRE(r.resid_inf <= 1e-10);
  REQUIRE(r.iters <= 30);
  REQUIRE(inf_norm(Vec(r.z.flatten() - sign_problem_root())) < 1e-6);

  // Trace is internally consistent: residuals decrease and every accepted
  // step replays its own Armijo inequality (next resid <= bound).
  REQUIRE_FALSE(r.trace.empty());
  LpNewtonOptions defaults;
  for (size_t k = 0; k + 1 < r.trace.size(); ++k) {
    const InnerTraceRow& row = r.trace[k];
    const double bound =
        row.resid_inf + defaults.sigma1 *
                            std::pow(defaults.theta, row.backtracks) *
                            row.delta;
    REQUIRE(r.trace[k + 1].resid_inf <= bound + 1e-12);
    REQUIRE(r.trace[k + 1].resid_inf < row.resid_inf);
    REQUIRE(row.eta >= 0.0);
    REQUIRE(row.eta <= 1.0 / row.resid_inf + 1e-9);
    REQUIRE(row.delta < 0.0);
  }
}

TEST_CASE("iterates stay feasible after every accepted step") {
  const AffineMpec p = relaxed_sign_problem();
  for (int cap = 1; cap <= 6; ++cap) {
    LpNewtonOptions opts;
    opts.max_inner = cap;
    const InnerResult r = inner_solve(p, sign_problem_start(p), 0.02, 1e-16, opts);
    REQUIRE(omega_violation(p, r.z) <= 1e-9);
  }
}

TEST_CASE("iteration cap reports IterCap with a full trace") {
  const AffineMpec p = relaxed_sign_problem();
  LpNewtonOptions opts;
  opts.max_inner = 1;
  const InnerResult r = inner_solve(p, sign_problem_start(p), 0.02, 1e-16, opts);
  REQUIRE(r.status == InnerStatus::IterCap);
  REQUIRE(r.iters == 1);
  REQUIRE(r.trace.size() == 1);
  REQUIRE(r.resid_inf < 0.1);  // one step still made progress
}

TEST_CASE("loose tolerance returns immediately") {
  const AffineMpec p = relaxed_sign_problem();
  const InnerResult r = inner_solve(p, sign_problem_start(p), 0.02, 0.15);
  REQUIRE(r.status == InnerStatus::ToleranceMet);
  REQUIRE(r.iters == 0);
  REQUIRE(r.trace.empty());
  REQUIRE(r.resid_inf == Catch::Approx(0.1));
}

TEST_CASE("starting at the root reports ResidualZero") {
  const AffineMpec p = relaxed_sign_problem();
  const InnerResult r =
      inner_solve(p, IterateZ::split(p, sign_problem_root()), 0.02, 1e-10);
  REQUIRE(r.status == InnerStatus::ResidualZero);
  REQUIRE(r.iters == 0);
  REQUIRE(r.resid_inf == 0.0);
}

TEST_CASE("a stationary residual yields DeltaZero, not an infinite loop") {
  const AffineMpec p = frozen_gradient_problem();
  IterateZ z;
  z.v = Vec::Constant(1, 0.5);
  z.lambda_g = Vec::Zero(1);
  z.lambda_G = Vec::Zero(1);
  z.lambda_H = Vec::Zero(1);
  z.lambda_GH = Vec::Zero(1);
  z.u = Vec::Constant(1, 0.1);
  const double tau = 0.1;
  REQUIRE(inf_norm(eval_residual(p, z, tau)) == 1.0);  // the frozen gradient

  const InnerResult r = inner_solve(p, z, tau, 1e-10);
  REQUIRE(r.status == InnerStatus::DeltaZero);
  REQUIRE(r.resid_inf == 1.0);
  REQUIRE(r.trace.size() == 1);
  REQUIRE(std::abs(r.trace[0].delta) <= 1e-14 * 2.0);
}

TEST_CASE("line search accepts a perfect direction at full step") {
  const AffineMpec p = relaxed_sign_problem();
  const IterateZ z = sign_problem_start(p);
  const Vec d = sign_problem_root() - z.flatten();
  const LineSearchResult ls = line_search(p, z, 0.02, d, -0.05);
  REQUIRE(ls.accepted);
  REQUIRE(ls.backtracks == 0);
  REQUIRE(ls.resid_inf == 0.0);
}

TEST_CASE("line search reports failure on an ascent direction") {
  const AffineMpec p = relaxed_sign_problem();
  const IterateZ z = sign_problem_start(p);
  Vec d = Vec::Zero(8);
  d[1] = 10.0;  // drives v2, and with it |F|, sharply up
  LpNewtonOptions opts;
  opts.max_backtracks = 3;
  const LineSearchResult ls = line_search(p, z, 0.02, d, -0.05, opts);
  REQUIRE_FALSE(ls.accepted);
}

TEST_CASE("warm-started subproblems reach the same root") {
  const AffineMpec p = relaxed_sign_problem();
  LpNewtonOptions opts;
  opts.lp_warm_start = true;
  const InnerResult r = inner_solve(p, sign_problem_start(p), 0.02, 1e-10, opts);
  REQUIRE((r.status == InnerStatus::ToleranceMet ||
           r.status == InnerStatus::ResidualZero));
  REQUIRE(r.resid_inf <= 1e-10);
  REQUIRE(inf_norm(Vec(r.z.flatten() - sign_problem_root())) < 1e-6);
}

TEST_CASE("inner solver is deterministic") {
  const AffineMpec p = relaxed_sign_problem();
  const InnerResult a = inner_solve(p, sign_problem_start(p), 0.02, 1e-10);
  const InnerResult b = inner_solve(p, sign_problem_start(p), 0.02, 1e-10);
  REQUIRE(a.z.flatten() == b.z.flatten());
  REQUIRE(a.iters == b.iters);
  REQUIRE(a.trace.size() == b.trace.size());
}

TEST_CASE("residual tail contracts quadratically on the sign problem") {
  const AffineMpec p = relaxed_sign_problem();
  const InnerResult r = inner_solve(p, sign_problem_start(p), 0.02, 1e-12);
  REQUIRE(r.resid_inf <= 1e-12);
  // Once inside the quadratic basin the next residual is O(previous^2).
  bool saw_tail = false;
  for (size_t k = 0; k + 1 < r.trace.size(); ++k) {
    if (r.trace[k].resid_inf > 1e-2) continue;
    saw_tail = true;
    REQUIRE(r.trace[k + 1].resid_inf <=
            100.0 * r.trace[k].resid_inf * r.trace[k].resid_inf + 1e-15);
  }
  REQUIRE(saw_tail);
}

TEST_CASE("inner solver handles a cross-validation instance feasibly") {
  Rng rng(515);
  const MpecProblem prob = random_cv_problem(rng, 2, 3, 2);
  const AffineMpec p = prob.compact();
  const IterateZ z0 = interior_cv_iterate(prob, rng);
  REQUIRE(omega_violation(p, z0) == 0.0);

  LpNewtonOptions opts;
  opts.max_inner = 4;
  const InnerResult r = inner_solve(p, z0, 0.1, 1e-8, opts);
  REQUIRE(omega_violation(p, r.z) <= 1e-9);
  REQUIRE(r.resid_inf < inf_norm(eval_residual(p, z0, 0.1)));
  for (const InnerTraceRow& row : r.trace) {
    REQUIRE(row.eta >= 0.0);
    REQUIRE(row.eta <= 1.0 / row.resid_inf + 1e-9);
  }
}
