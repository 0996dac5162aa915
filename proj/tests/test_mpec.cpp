#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"
#include "svctune/mpec.hpp"

using namespace svctune;

namespace {

// One validation and one training point per fold in one dimension:
// fold-1 validation (x=2, y=+1), fold-2 validation (x=3, y=-1), and each
// fold trains on the other's point. Every block entry is hand-checkable.
MpecProblem tiny_problem() {
  std::vector<Mat> a(2), b(2);
  a[0] = Mat::Constant(1, 1, 2.0);
  b[0] = Mat::Constant(1, 1, -3.0);
  a[1] = Mat::Constant(1, 1, -3.0);
  b[1] = Mat::Constant(1, 1, 2.0);
  MpecBounds bd;
  bd.c_lb = 0.1;
  bd.c_ub = 10.0;
  bd.wbar_lb = Vec::Constant(1, 0.2);
  bd.wbar_ub = Vec::Constant(1, 2.0);
  return MpecProblem(std::move(a), std::move(b), std::move(bd));
}

Vec tiny_point() {
  VariableVector vv;
  vv.C = 1.0;
  vv.w_bar = Vec::Constant(1, 0.5);
  vv.zeta = Vec(2);
  vv.zeta << 0.2, 0.4;
  vv.z = Vec(2);
  vv.z << 0.1, 0.3;
  vv.alpha = Vec(2);
  vv.alpha << 0.5, 0.25;
  vv.xi = Vec(2);
  vv.xi << 0.05, 0.15;
  vv.beta = Vec(2);
  vv.beta << 0.01, 0.02;
  vv.gamma = Vec(2);
  vv.gamma << 0.03, 0.04;
  return vv.flatten();
}

// Two-fold, two-dimensional-plus-bias fixture whose classifier w=[1,-1,0]
// puts exactly half the points on the margins.
MpecProblem two_fold_csv_problem() {
  Mat b1(4, 3), b2(4, 3);
  // fold 1: negatives [0,1,1], [-1,1,1]; positives [1,0,1], [2,-1,1]
  b1 << 0, -1, -1, 1, -1, -1, 1, 0, 1, 2, -1, 1;
  // fold 2: negatives [-1,0,1], [1,3,1]; positives [0,-1,1], [1,-2,1]
  b2 << 1, 0, -1, -1, -3, -1, 0, -1, 1, 1, -2, 1;
  MpecBounds bd;
  bd.c_lb = 0.1;
  bd.c_ub = 1.0;
  bd.wbar_lb = Vec::Constant(3, 0.1);
  bd.wbar_ub = Vec::Constant(3, 2.0);
  // Validation rows are immaterial for the training-side diagnostics.
  std::vector<Mat> a = {b2, b1}, b = {b1, b2};
  return MpecProblem(std::move(a), std::move(b), std::move(bd));
}

Vec random_point(const MpecDims& d, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(d.n_v());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST_CASE("hand-checked evaluation of the one-dimensional fixture") {
  MpecProblem p = tiny_problem();
  CHECK(p.dims().m_bar() == 12);
  CHECK(p.dims().n_bar() == 2);
  CHECK(p.dims().n_v() == 14);

  const Vec v = tiny_point();
  CHECK(p.eval_f(v) == Catch::Approx(0.3).margin(1e-15));

  const auto w = p.reconstruct_w(v);
  REQUIRE(w.size() == 2);
  CHECK(w[0][0] == Catch::Approx(-1.52).margin(1e-15));
  CHECK(w[1][0] == Catch::Approx(0.48).margin(1e-15));

  Vec g_expect(12);
  g_expect << -2.94, -1.14, 0.8, 0.6, 3.61, 0.11, 0.5, 0.75, -1.02, 0.98,
      2.02, 0.02;
  const Vec G = p.eval_G(v);
  REQUIRE(G.size() == 12);
  for (Eigen::Index i = 0; i < 12; ++i)
    CHECK(G[i] == Catch::Approx(g_expect[i]).margin(1e-12));

  const Vec H = p.eval_H(v);
  REQUIRE(H.size() == 12);
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(H[i] == v[2 + i]);

  Vec g_rows(4);
  g_rows << 9.0, 0.9, 1.5, 0.3;
  const Vec g = p.eval_g(v);
  REQUIRE(g.size() == 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK(g[i] == Catch::Approx(g_rows[i]).margin(1e-12));
}

TEST_CASE("dimension formulas") {
  std::vector<Mat> a(2), b(2);
  a[0] = Mat::Ones(1, 2);
  a[1] = Mat::Ones(1, 2);
  b[0] = Mat::Ones(2, 2);
  b[1] = Mat::Ones(2, 2);
  MpecBounds bd;
  bd.c_lb = 0.1;
  bd.c_ub = 1.0;
  bd.wbar_lb = Vec::Constant(2, 0.1);
  bd.wbar_ub = Vec::Constant(2, 1.0);
  MpecProblem p(std::move(a), std::move(b), std::move(bd));
  CHECK(p.dims().m_bar() == 20);
  CHECK(p.dims().n_v() == 23);
}

TEST_CASE("compact sparse form agrees with blockwise evaluation") {
  MpecProblem p = tiny_problem();
  AffineMpec c = p.compact();
  c.validate();
  CHECK(c.n_v() == p.dims().n_v());
  CHECK(c.n_comp() == p.dims().m_bar());
  CHECK(c.n_ineq() == 2 * p.dims().n_bar());

  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const Vec v = random_point(p.dims(), rng);
    const Vec gb = p.eval_G(v), gc = c.eval_G(v);
    CHECK((gb - gc).cwiseAbs().maxCoeff() <=
          1e-12 * (1.0 + gb.cwiseAbs().maxCoeff()));
    CHECK((p.eval_H(v) - c.eval_H(v)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.eval_g(v) - c.eval_g(v)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(p.eval_f(v) == Catch::Approx(c.eval_f(v)).margin(1e-12));
  }

  // At the origin the affine parts are exposed directly.
  const Vec zero = Vec::Zero(p.dims().n_v());
  CHECK((p.eval_G(zero) - c.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.eval_H(zero).cwiseAbs().maxCoeff() == 0.0);
  CHECK((p.eval_g(zero) - c.b).cwiseAbs().maxCoeff() == 0.0);

  // All-ones validation errors average to one.
  Vec ones_zeta = zero;
  ones_zeta.segment(p.off_zeta(), 2).setOnes();
  CHECK(p.eval_f(ones_zeta) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("evaluators are affine and reject wrong lengths") {
  MpecProblem p = tiny_problem();
  Rng rng(55);
  const Vec v1 = random_point(p.dims(), rng);
  const Vec v2 = random_point(p.dims(), rng);
  for (double s : {0.0, 0.25, 0.5, 1.0}) {
    const Vec mix = s * v1 + (1.0 - s) * v2;
    const Vec lhs = p.eval_G(mix);
    const Vec rhs = s * p.eval_G(v1) + (1.0 - s) * p.eval_G(v2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <=
          1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff()));
  }
  CHECK_THROWS_AS(p.eval_G(Vec::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(p.eval_g(Vec::Zero(15)), std::invalid_argument);
}

TEST_CASE("variable vector round-trips through its flat layout") {
  MpecProblem p = tiny_problem();
  const Vec v = tiny_point();
  VariableVector vv = VariableVector::split(p.dims(), v);
  CHECK(vv.C == 1.0);
  CHECK(vv.alpha[1] == 0.25);
  CHECK(vv.gamma[0] == 0.03);
  const Vec back = vv.flatten();
  REQUIRE(back.size() == v.size());
  CHECK((back - v).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(VariableVector::split(p.dims(), Vec::Zero(5)),
                  std::invalid_argument);
}

TEST_CASE("margin points land in the active training sets") {
  MpecProblem p = two_fold_csv_problem();
  const auto& d = p.dims();
  REQUIRE(d.m2 == 4);
  REQUIRE(d.n == 3);

  // Point with w = [1,-1,0] in both folds, reached through beta/gamma.
  VariableVector vv;
  vv.C = 0.5;
  vv.w_bar = Vec::Constant(3, 2.0);
  vv.zeta = Vec::Zero(d.K * d.m1);
  vv.z = Vec::Zero(d.K * d.m1);
  vv.alpha = Vec::Zero(d.K * d.m2);
  vv.xi = Vec::Zero(d.K * d.m2);
  Vec b1(3), g1(3);
  b1 << 1, 0, 0;
  g1 << 0, 1, 0;
  vv.beta = Vec(6);
  vv.beta << b1, b1;
  vv.gamma = Vec(6);
  vv.gamma << g1, g1;
  const Vec v = vv.flatten();

  const auto w = p.reconstruct_w(v);
  for (const Vec& wt : w) {
    CHECK(wt[0] == 1.0);
    CHECK(wt[1] == -1.0);
    CHECK(wt[2] == 0.0);
  }

  IndexSets s = p.classify_index_sets(v, 1e-6);
  std::vector<Eigen::Index> on = s.lambda1;
  on.insert(on.end(), s.lambda3.begin(), s.lambda3.end());
  std::sort(on.begin(), on.end());
  CHECK(on == std::vector<Eigen::Index>{0, 2, 4, 6});
  CHECK(s.lambda2 == std::vector<Eigen::Index>{1, 3, 5, 7});

  Mat expect(4, 6);
  expect << 0, -1, -1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, -1, 0, 0, 0,
      0, -1, 1;
  const Mat sub = p.b_submatrix(on);
  REQUIRE(sub.rows() == 4);
  REQUIRE(sub.cols() == 6);
  CHECK((sub - expect).cwiseAbs().maxCoeff() == 0.0);

  MfcqReport rep = p.mfcq_diagnostic(v, 1e-6);
  CHECK(rep.strict_interior == std::vector<bool>{true, true});
  CHECK(rep.n_active_rows == 4);
  CHECK(rep.rank_b_sub == 4);
  CHECK(rep.full_row_rank);
  CHECK(rep.positive_definite);
  CHECK(rep.min_eigenvalue > 1e-6);
}

TEST_CASE("duplicated margin rows are flagged as rank deficient") {
  Mat b1(4, 3), b2(4, 3);
  b1 << 0, -1, -1, 1, -1, -1, 0, -1, -1, 2, -1, 1;  // row 3 duplicates row 1
  b2 << 1, 0, -1, -1, -3, -1, 0, -1, 1, 1, -2, 1;
  MpecBounds bd;
  bd.c_lb = 0.1;
  bd.c_ub = 1.0;
  bd.wbar_lb = Vec::Constant(3, 0.1);
  bd.wbar_ub = Vec::Constant(3, 2.0);
  std::vector<Mat> a = {b2, b1}, b = {b1, b2};
  MpecProblem p(std::move(a), std::move(b), std::move(bd));

  VariableVector vv;
  vv.C = 0.5;
  vv.w_bar = Vec::Constant(3, 2.0);
  vv.zeta = Vec::Zero(8);
  vv.z = Vec::Zero(8);
  vv.alpha = Vec::Zero(8);
  vv.xi = Vec::Zero(8);
  Vec b1v(3), g1v(3);
  b1v << 1, 0, 0;
  g1v << 0, 1, 0;
  vv.beta = Vec(6);
  vv.beta << b1v, b1v;
  vv.gamma = Vec(6);
  vv.gamma << g1v, g1v;

  MfcqReport rep = p.mfcq_diagnostic(vv.flatten(), 1e-6);
  CHECK(rep.n_active_rows == 4);  // both copies sit on the margin
  CHECK(rep.rank_b_sub < rep.n_active_rows);
  CHECK_FALSE(rep.full_row_rank);
  CHECK_FALSE(rep.positive_definite);
}

TEST_CASE("biactive, single-active and inactive rows are told apart") {
  MpecProblem p = tiny_problem();
  // Zero tail: every H component is 0; the z-rows of G equal 1 and the
  // alpha-rows equal -1, while the zeta-rows vanish.
  Vec v = Vec::Zero(p.dims().n_v());
  v[0] = 0.5;                     // C
  v[p.off_wbar()] = 0.3;          // wbar
  IndexSets s = p.classify_index_sets(v, 1e-6);
  CHECK(s.i_gh == std::vector<Eigen::Index>{0, 1});  // zeta rows: G=0, H=0
  CHECK(s.i_g.empty());
  CHECK(s.i_h.size() == 10);

  // A strictly complementary point: every pair has exactly one zero side.
  Vec v2 = tiny_point();
  const Vec G2 = p.eval_G(v2);
  // Make H strictly positive everywhere (it already is at the fixture
  // point) and G strictly nonzero, then verify the partition property.
  IndexSets s2 = p.classify_index_sets(v2, 1e-9);
  size_t covered = s2.i_g.size() + s2.i_h.size() + s2.i_gh.size();
  Eigen::Index both_positive = 0;
  const Vec H2 = p.eval_H(v2);
  for (Eigen::Index i = 0; i < p.dims().m_bar(); ++i)
    if (std::abs(G2[i]) > 1e-9 && std::abs(H2[i]) > 1e-9) ++both_positive;
  CHECK(static_cast<Eigen::Index>(covered) + both_positive ==
        p.dims().m_bar());
  CHECK(s2.i_gh.empty());
}

TEST_CASE("validation and bound rows classify into their partitions") {
  MpecProblem p = tiny_problem();
  VariableVector vv = VariableVector::split(p.dims(), tiny_point());
  // Fold-1 validation: z > 0 puts it in psi3; fold-2: z = 0 with nonzero
  // residual puts it in psi2.
  vv.z << 0.5, 0.0;
  Vec v = vv.flatten();
  IndexSets s = p.classify_index_sets(v, 1e-6);
  CHECK(s.psi3 == std::vector<Eigen::Index>{0});
  CHECK(s.psi2 == std::vector<Eigen::Index>{1});
  CHECK(s.psi1.empty());

  // Drive fold-1's w onto the upper face and fold-2's onto the lower face.
  vv.alpha << 0.0, 0.0;
  vv.beta = Vec(2);
  vv.beta << 0.0, 0.0;
  vv.gamma = Vec(2);
  vv.gamma << 0.0, 0.0;
  vv.w_bar = Vec::Constant(1, 0.5);
  vv.beta[0] = 0.5;   // w^1 = +0.5 = +wbar
  vv.gamma[1] = 0.5;  // w^2 = -0.5 = -wbar
  v = vv.flatten();
  s = p.classify_index_sets(v, 1e-6);
  CHECK(s.pi3 == std::vector<Eigen::Index>{0});
  CHECK(s.pi1 == std::vector<Eigen::Index>{1});
  // beta/gamma live on the "wrong" sides here, so the refinements are the
  // zero branches.
  CHECK(s.pi3_zero == std::vector<Eigen::Index>{0});
  CHECK(s.pi1_zero == std::vector<Eigen::Index>{1});
}

TEST_CASE("assembly from a cross-validation split places y_i x_i rows") {
  Dataset ds;
  ds.x = Mat(6, 2);
  ds.x << 1, 0, 0, 1, -1, 0, 0, -1, 1, 1, -1, -1;
  ds.y = IVec(6);
  ds.y << 1, 1, -1, -1, 1, -1;
  ds.n_features = 2;
  CvSplit sp = kfold_split(ds, 2, 6, /*seed=*/3);

  MpecBounds bd;
  bd.c_lb = 1e-4;
  bd.c_ub = 1e4;
  bd.wbar_lb = Vec::Constant(2, 1e-6);
  bd.wbar_ub = Vec::Constant(2, 1.5);
  MpecProblem p = assemble(sp, ds, bd);
  CHECK(p.dims().K == 2);
  CHECK(p.dims().m1 == 3);
  CHECK(p.dims().m2 == 3);
  CHECK(p.dims().m_bar() == 2 * 2 * (3 + 3 + 2));

  for (Eigen::Index t = 0; t < 2; ++t) {
    const auto& fold = sp.folds[static_cast<size_t>(t)];
    const auto train = sp.training_indices(static_cast<int>(t));
    for (size_t i = 0; i < fold.size(); ++i)
      CHECK((p.A(t).row(static_cast<Eigen::Index>(i)) -
             static_cast<double>(ds.y[fold[i]]) * ds.x.row(fold[i]))
                .cwiseAbs()
                .maxCoeff() == 0.0);
    for (size_t i = 0; i < train.size(); ++i)
      CHECK((p.B(t).row(static_cast<Eigen::Index>(i)) -
             static_cast<double>(ds.y[train[i]]) * ds.x.row(train[i]))
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }

  MpecBounds bad = bd;
  bad.c_lb = 2e4;  // above c_ub
  CHECK_THROWS_AS(assemble(sp, ds, bad), std::invalid_argument);
  bad = bd;
  bad.wbar_lb = Vec::Constant(2, 0.0);
  CHECK_THROWS_AS(assemble(sp, ds, bad), std::invalid_argument);
  bad = bd;
  bad.wbar_ub = Vec::Constant(3, 1.5);
  CHECK_THROWS_AS(assemble(sp, ds, bad), std::invalid_argument);
}

TEST_CASE("problems survive a dump/load round trip") {
  MpecProblem p = tiny_problem();
  std::stringstream ss;
  p.dump(ss);
  MpecProblem q = MpecProblem::load(ss);
  CHECK(q.dims().K == p.dims().K);
  CHECK(q.dims().m1 == p.dims().m1);
  CHECK(q.dims().m2 == p.dims().m2);
  CHECK(q.dims().n == p.dims().n);
  CHECK(q.bounds().c_lb == p.bounds().c_lb);
  CHECK(q.bounds().c_ub == p.bounds().c_ub);
  CHECK((q.bounds().wbar_lb - p.bounds().wbar_lb).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index t = 0; t < 2; ++t) {
    CHECK((q.A(t) - p.A(t)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((q.B(t) - p.B(t)).cwiseAbs().maxCoeff() == 0.0);
  }
  const Vec v = tiny_point();
  CHECK((q.eval_G(v) - p.eval_G(v)).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream bad("not-a-problem\n");
  CHECK_THROWS_AS(MpecProblem::load(bad), std::runtime_error);
}
