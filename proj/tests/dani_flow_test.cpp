#include <cmath>

#include <gtest/gtest.h>

#include "qdioph/dani_flow.hpp"

using namespace qdioph;

namespace {

// 2 y1 y3 + y2^2 and 2 y1 y4 + y2^2 + y3^2.
QuadraticForm circle_good() { return QuadraticForm({{0, 0, 1}, {0, 1, 0}, {1, 0, 0}}); }
QuadraticForm sphere_good() { return QuadraticForm({{0, 0, 0, 1}, {0, 1, 0, 0}, {0, 0, 1, 0}, {1, 0, 0, 0}}); }

Eigen::VectorXd vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(DaniConstants, CircleGoodForm) {
  const auto c = constants(circle_good());
  EXPECT_DOUBLE_EQ(c.c0, 2);
  EXPECT_NEAR(c.c1, 1, 1e-12);
  EXPECT_DOUBLE_EQ(c.c_big, 6);
  EXPECT_NEAR(c.c_small, 1 / (6 * std::sqrt(5.0)), 1e-12);
  EXPECT_NEAR(c.c_small, 0.07454, 1e-5);
}

TEST(DaniConstants, ResidualNormAndFloor) {
  const auto c = constants(QuadraticForm({{0, 0, 1}, {0, 3, 0}, {1, 0, 0}}));
  EXPECT_NEAR(c.c0, 3, 1e-12);
  EXPECT_NEAR(c.c_big, 9, 1e-12);
  const auto plane = constants(QuadraticForm({{0, 1}, {1, 0}}));
  EXPECT_DOUBLE_EQ(plane.c0, 2);
  try {
    constants(QuadraticForm::diagonal({1, 1, -1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotGoodForm);
  }
}

TEST(DaniConstants, FromHyperbolicBasis) {
  const auto c = working_constants(QuadraticForm::diagonal({1, 1, -1}));
  EXPECT_DOUBLE_EQ(c.c0, 2);
  EXPECT_NEAR(c.c_small, 1 / (6 * std::sqrt(5.0)), 1e-12);
}

TEST(FlowContext, IdentityAtReferencePoint) {
  const auto ctx = build_context(circle_good(), RealProjectivePoint({1, 0, 0}));
  EXPECT_EQ(ctx.mode, FlowMode::ExactOrthogonal);
  EXPECT_LE((ctx.u - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-12);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(0, 0) = std::exp(-1.5);
  a(2, 2) = std::exp(1.5);
  EXPECT_LE(rel_diff(ctx.flow(1.5), a), 1e-12);
}

TEST(FlowContext, ModeSelection) {
  Rng rng(1);
  const auto sphere = QuadraticForm::diagonal({1, 1, 1, -1});
  EXPECT_EQ(build_context(sphere, sample_point(sphere, rng)).mode, FlowMode::ExactOrthogonal);
  const auto skew = QuadraticForm::diagonal({1, 2, -1});
  EXPECT_EQ(build_context(skew, sample_point(skew, rng)).mode, FlowMode::Conjugated);
}

TEST(FlowContext, Errors) {
  const auto deg = QuadraticForm::diagonal({1, 0, -1});
  try {
    build_context(deg, RealProjectivePoint({0, 1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::KernelPoint);
  }
  EXPECT_THROW(build_context(circle_good(), RealProjectivePoint({1, 1, 1})), Error);
}

TEST(FlowContext, InvariantsOfU) {
  Rng rng(2);
  for (const auto& f : {circle_good(), sphere_good(), QuadraticForm::diagonal({1, 1, 1, -1}),
                        QuadraticForm::antidiagonal(4)}) {
    for (int i = 0; i < 200; ++i) {
      const auto x = sample_point(f, rng);
      const auto ctx = build_context(f, x);
      const auto m = static_cast<Eigen::Index>(f.size());
      const Eigen::VectorXd ux = ctx.u * vec(x.coords());
      EXPECT_NEAR(std::abs(ux[0]), 1, 1e-9);
      EXPECT_LE(ux.tail(m - 1).norm(), 1e-9);
      EXPECT_LE((ctx.u * ctx.u.transpose() - Eigen::MatrixXd::Identity(m, m)).norm(), 1e-9);
      EXPECT_LE((ctx.u * to_eigen(f) * ctx.u.transpose() - ctx.reference).norm(), 1e-9);
    }
  }
}

// With spectrum {+1,-1}, u_x^{-1} e_1 = x and u_x^{-1} e_{n+1} = A x, so
// g_t^x = I + (e^{-t} - 1) x x^T + (e^t - 1) (Ax)(Ax)^T.
TEST(FlowContext, MatchesClosedForm) {
  Rng rng(3);
  for (const auto& f : {circle_good(), sphere_good(), QuadraticForm::diagonal({1, 1, -1})}) {
    const Eigen::MatrixXd a = to_eigen(f);
    for (int i = 0; i < 200; ++i) {
      const auto x = sample_point(f, rng);
      const Eigen::VectorXd xv = vec(x.coords());
      const Eigen::VectorXd ax = a * xv;
      const double t = rng.uniform(-6, 6);
      const auto m = static_cast<Eigen::Index>(f.size());
      const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(m, m) + (std::exp(-t) - 1) * xv * xv.transpose() +
                                (std::exp(t) - 1) * ax * ax.transpose();
      EXPECT_LE(rel_diff(build_context(f, x).flow(t), g), 1e-9);
    }
  }
}

TEST(FlowContext, PreservesQ) {
  Rng rng(4);
  for (const auto& f : {circle_good(), sphere_good(), QuadraticForm::diagonal({1, 2, -1}),
                        QuadraticForm({{2, 1, 0}, {1, -3, 0}, {0, 0, 5}})}) {
    const Eigen::MatrixXd a = to_eigen(f);
    for (int i = 0; i < 300; ++i) {
      const auto ctx = build_context(f, sample_point(f, rng));
      const double t = rng.uniform(-10, 10);
      const Eigen::MatrixXd g = ctx.flow(t);
      const auto wv = rng.unit_vector(f.size());
      const Eigen::VectorXd w = vec(wv);
      const Eigen::VectorXd gw = g * w;
      const double gnorm = g.operatorNorm();
      EXPECT_LE(std::abs(gw.dot(a * gw) - w.dot(a * w)), 1e-6 * gnorm * gnorm);
    }
  }
}

TEST(FlowContext, GroupLaw) {
  Rng rng(5);
  for (const auto& f : {circle_good(), sphere_good(), QuadraticForm::diagonal({1, 2, -1})}) {
    for (int i = 0; i < 200; ++i) {
      const auto ctx = build_context(f, sample_point(f, rng));
      const double s = rng.uniform(-5, 5), t = rng.uniform(-5, 5);
      EXPECT_LE(rel_diff(ctx.flow(s) * ctx.flow(t), ctx.flow(s + t)), 1e-9);
    }
  }
}

TEST(FlowNorm, Examples) {
  const auto ctx = build_context(circle_good(), RealProjectivePoint({1, 0, 0}));
  EXPECT_NEAR(flow_norm(ctx, canonicalize({1, 0, 0}), 2), std::exp(-2.0), 1e-14);
  EXPECT_NEAR(flow_norm(ctx, canonicalize({0, 0, 1}), 2), std::exp(2.0), 1e-12);
  Rng rng(6);
  const auto f = sphere_good();
  const auto ctx2 = build_context(f, sample_point(f, rng));
  const auto v = canonicalize({1, 1, 1, -1});
  EXPECT_EQ(evaluate(f, v.coords()), 0);
  EXPECT_NEAR(flow_norm(ctx2, v, 0), 2.0, 1e-12);
}

TEST(VerifyDani, RatioAtReferencePoint) {
  const auto ctx = build_context(circle_good(), RealProjectivePoint({1, 0, 0}));
  for (double t : {0.0, 1.0, 7.5}) {
    const auto r = verify_dani(ctx, constants(circle_good()), canonicalize({1, 0, 0}), t);
    EXPECT_NEAR(r.ratio, 1.0 / 6.0, 1e-12);
  }
}

TEST(VerifyDani, SweepOnGoodForms) {
  for (const auto& f : {circle_good(), sphere_good()}) {
    const auto sw = dani_sweep(f, constants(f), 1000, 6000, 11);
    EXPECT_EQ(sw.summary.samples, 6000u);
    EXPECT_EQ(sw.summary.violations, 0u) << "max ratio " << sw.summary.max_ratio;
    EXPECT_LE(sw.summary.max_ratio, 1 + 1e-9);
    EXPECT_GT(sw.summary.dual_rows, 500u);
    EXPECT_EQ(sw.summary.dual_violations, 0u);
    for (const auto& r : sw.rows) {
      ASSERT_LE(r.h, 1000);
      ASSERT_GE(r.t, 0);
    }
  }
}

TEST(VerifyDani, ConjugatedModeReportsEmpiricalConstant) {
  const auto f = QuadraticForm::diagonal({1, 2, -1});
  const auto sw = dani_sweep(f, working_constants(f), 500, 3000, 12);
  for (const auto& r : sw.rows) ASSERT_EQ(r.mode, FlowMode::Conjugated);
  EXPECT_TRUE(std::isfinite(sw.summary.c_emp));
  EXPECT_GT(sw.summary.c_emp, 0);
}

TEST(VerifyDani, SweepIsDeterministic) {
  const auto f = sphere_good();
  const auto a = dani_sweep(f, constants(f), 100, 300, 5);
  const auto b = dani_sweep(f, constants(f), 100, 300, 5);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].lhs, b.rows[i].lhs);
    EXPECT_EQ(a.rows[i].dist, b.rows[i].dist);
  }
}
