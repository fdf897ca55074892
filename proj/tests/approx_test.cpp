#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qdioph/approx.hpp"

using namespace qdioph;

namespace {

QuadraticForm circle() { return QuadraticForm::diagonal({1, 1, -1}); }
QuadraticForm sphere() { return QuadraticForm::diagonal({1, 1, 1, -1}); }

std::vector<ApproxRecord> synthetic(double beta, double c) {
  std::vector<ApproxRecord> r;
  for (Int h = 2; h < 200000; h = h * 3 + 1) {
    const double d = c * std::pow(static_cast<double>(h), -beta);
    r.push_back({canonicalize({1, 0, 1}), h, d, static_cast<double>(h) * d});
  }
  return r;
}

}  // namespace

TEST(Records, RationalPointTerminates) {
  const auto x = RealProjectivePoint::from_int(IntVec{3, 4, 5});
  const auto rec = best_records(circle(), x, 100);
  ASSERT_FALSE(rec.empty());
  EXPECT_EQ(rec.back().h, 5);
  EXPECT_EQ(rec.back().d, 0.0);
  EXPECT_EQ(rec.back().v.coords(), (IntVec{3, 4, 5}));
  EXPECT_THROW(dirichlet_constant(rec), Error);
  EXPECT_TRUE(exponent(rec).infinite);
  try {
    dirichlet_constant(rec);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateRational);
  }
}

TEST(Records, IrrationalCirclePoint) {
  Rng rng(1);
  const auto x = sample_point(circle(), rng);
  const auto rec = best_records(circle(), x, 10000);
  ASSERT_GE(rec.size(), 5u);
  double min_q = 1e300;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    min_q = std::min(min_q, rec[i].quality);
    EXPECT_NEAR(rec[i].d, dist(x, rec[i].v.coords()), 1e-15);
    EXPECT_EQ(rec[i].h, rec[i].v.height());
    if (i > 0) {
      EXPECT_GT(rec[i].h, rec[i - 1].h);
      EXPECT_LT(rec[i].d, rec[i - 1].d);
    }
  }
  EXPECT_GT(min_q, 0);
  EXPECT_GT(dirichlet_constant(rec), 0);
}

TEST(Records, NoRationalPoints) {
  const QuadraticForm f = QuadraticForm::diagonal({1, 1, -3});
  try {
    best_records(f, sample_point(f, 1), 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoRationalPoints);
  }
}

// The windowed sphere search and a plain scan of the enumeration agree.
TEST(Records, SphereSearchMatchesTableScan) {
  Rng rng(2);
  const SliceSpec slice{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0.3, 1}}};
  for (const auto& f : {circle(), sphere(), QuadraticForm::diagonal({1, 1, 1, 1, -1})}) {
    const Int h = f.size() == 5 ? 40 : 300;
    const auto table = PointTable::build(f, h);
    for (int i = 0; i < 40; ++i) {
      const auto x = (f.size() == 4 && i % 2) ? sample_on_submanifold(f, slice, rng) : sample_point(f, rng);
      const auto fast = best_records(f, x, h);
      const auto slow = best_records(table, x);
      ASSERT_EQ(fast.size(), slow.size());
      for (std::size_t k = 0; k < fast.size(); ++k) {
        EXPECT_EQ(fast[k].v, slow[k].v);
        EXPECT_EQ(fast[k].d, slow[k].d);
      }
    }
  }
}

TEST(Records, TableScanOnGeneralForm) {
  const QuadraticForm f({{0, 0, 1}, {0, 1, 0}, {1, 0, 0}});
  Rng rng(3);
  const auto x = sample_point(f, rng);
  const auto rec = best_records(f, x, 200);
  ASSERT_FALSE(rec.empty());
  for (std::size_t i = 1; i < rec.size(); ++i) EXPECT_LT(rec[i].d, rec[i - 1].d);
}

TEST(Exponent, SyntheticPowerLaw) {
  const auto e = exponent(synthetic(1.5, 0.7), 200000);
  EXPECT_NEAR(e.beta_hat, 1.5, 1e-9);
  EXPECT_NEAR(e.intercept, -std::log(0.7), 1e-9);
  EXPECT_EQ(e.h_cap, 200000);
  EXPECT_FALSE(e.infinite);
  auto few = synthetic(1, 1);
  few.resize(4);
  EXPECT_THROW(exponent(few), Error);
}

TEST(Dirichlet, PredecessorScaleProducts) {
  std::vector<ApproxRecord> r{{canonicalize({1, 0, 1}), 1, 0.5, 0.5},
                              {canonicalize({3, 4, 5}), 5, 0.05, 0.25},
                              {canonicalize({20, 21, 29}), 29, 0.01, 0.29}};
  EXPECT_DOUBLE_EQ(dirichlet_constant(r), std::max(0.5 * 5, 0.05 * 29));
  r.resize(1);
  EXPECT_DOUBLE_EQ(dirichlet_constant(r), 0.5);
}

TEST(Simplex, CircleClustersAreSingletons) {
  const auto consts = working_constants(circle());
  const auto table = PointTable::build(circle(), 100);
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    const auto rep = simplex_verify(circle(), table, sample_point(circle(), rng), 0.01, consts);
    EXPECT_TRUE(rep.pass);
    EXPECT_LE(rep.members.size(), 1u);
  }
  EXPECT_THROW(simplex_verify(circle(), PointTable::build(circle(), 3), sample_point(circle(), 1), 0.01, consts),
               Error);
}

// With a height bound far beyond the lemma's constant the check can fail.
TEST(Simplex, OversizedConstantProducesCounterexample) {
  auto consts = working_constants(circle());
  consts.c_small = 40;
  const auto table = PointTable::build(circle(), 400);
  const auto rep = simplex_verify(circle(), table, RealProjectivePoint({7.01 / 25, 24.0 / 25, 1.00003}), 0.1, consts);
  EXPECT_FALSE(rep.pass);
  ASSERT_TRUE(rep.violation.has_value());
  EXPECT_NE(rep.violation->value, 0);
  EXPECT_GE(rep.members.size(), 2u);
}

TEST(Simplex, SplitFormPlaneCluster) {
  const auto f = QuadraticForm::antidiagonal(4);
  const auto consts = working_constants(f);
  const auto table = PointTable::build(f, 14);
  // Between (13,1,0,0) and (14,1,0,0) inside the isotropic plane span{e1,e2}.
  const RealProjectivePoint x({13.5, 1, 0, 0});
  const auto rep = simplex_verify(f, table, x, 0.005, consts);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.closure_dim, 2u);
  EXPECT_GE(rep.members.size(), 2u);
}

TEST(Simplex, SweepsHaveNoFailures) {
  SimplexSweepConfig cfg;
  cfg.samples = 300;
  cfg.rho_lo = 2e-3;
  for (const auto& f : {circle(), sphere(), QuadraticForm::antidiagonal(4)}) {
    const auto consts = working_constants(f);
    const auto table = PointTable::build(f, simplex_table_height(consts, cfg));
    for (bool strong : {false, true}) {
      cfg.strong = strong;
      const auto sw = simplex_sweep(f, table, consts, cfg);
      EXPECT_EQ(sw.summary.fail_count, 0u);
      EXPECT_EQ(sw.summary.pass_count, cfg.samples);
      EXPECT_EQ(sw.rows.size(), cfg.samples);
      for (const auto& row : sw.rows) {
        EXPECT_GE(row.rho, cfg.rho_lo);
        EXPECT_LE(row.rho, cfg.rho_hi);
      }
    }
  }
}

// Distinct rational points p1/q1, p2/q2 of the unit circle have squared chord
// >= 2/(q1 q2); projective distance is at least half the chord, so two points
// of height <= c/rho with c < 1/(2 sqrt 2) never share a ball of radius rho.
TEST(Simplex, CircleAgreesWithChordOracle) {
  const auto consts = working_constants(circle());
  SimplexSweepConfig cfg;
  cfg.samples = 500;
  const auto table = PointTable::build(circle(), simplex_table_height(consts, cfg));
  const auto sw = simplex_sweep(circle(), table, consts, cfg);
  std::size_t nonempty = 0;
  for (const auto& row : sw.rows) {
    // Oracle: every pair below the height cap is more than 4 rho apart in chord.
    const Int cap = static_cast<Int>(std::floor(consts.c_small / row.rho));
    const Rational bound = Rational(16) * Rational(row.rho) * Rational(row.rho);
    bool singleton = true;
    for (const auto& v : table.points())
      for (const auto& w : table.points())
        if (v < w && v.height() <= cap && w.height() <= cap)
          singleton = singleton && oracle::affine_sphere_gap_sq(v.coords(), w.coords()) > bound;
    EXPECT_TRUE(singleton);
    if (singleton) {
      EXPECT_LE(row.report.members.size(), 1u);
      EXPECT_TRUE(row.report.pass);
    }
    nonempty += !row.report.members.empty();
  }
  EXPECT_GT(nonempty, 50u);
}

TEST(StrongSimplex, EmptyClusterIsVacuous) {
  const auto consts = working_constants(sphere());
  const auto table = PointTable::build(sphere(), 80);
  const auto rep = strong_simplex_verify(sphere(), table, RealProjectivePoint({0.6, 0.1, std::sqrt(0.63), 1}), 0.001,
                                         consts);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.members.empty());
}

TEST(CoverCount, CircleDiagnosticFollowsInverseBeta) {
  const auto table = PointTable::build(circle(), 2047);
  const auto two = cover_diagnostic(circle(), table, 2.0, 5, 10, 1u << 20);
  EXPECT_LE(two.slope, 0.7);
  EXPECT_GT(two.slope, 0.3);
  const auto one = cover_diagnostic(circle(), table, 1.0, 5, 10, 1u << 20);
  EXPECT_NEAR(one.slope, 1.0, 0.2);
  const auto three = cover_diagnostic(circle(), table, 3.0, 5, 10, 1u << 20);
  EXPECT_LE(three.slope, two.slope);
  for (const auto& c : two.levels) EXPECT_FALSE(c.truncated);
}

TEST(CoverCount, BudgetAndEmptyForm) {
  const auto table = PointTable::build(circle(), 255);
  const auto c = cover_count(circle(), table, 2.0, 7, 10);
  EXPECT_TRUE(c.truncated);
  EXPECT_EQ(c.points, 10u);
  const auto f = QuadraticForm::diagonal({1, 1, -3});
  EXPECT_EQ(cover_count(f, PointTable::build(f, 63), 2.0, 5, 1000).count, 0u);
  EXPECT_THROW(cover_count(circle(), table, 0.5, 5, 10), Error);
  EXPECT_THROW(cover_count(circle(), table, 2.0, 8, 10), Error);
}

TEST(CoverCount, GridHashOnSphere) {
  const auto table = PointTable::build(sphere(), 63);
  const auto c = cover_count(sphere(), table, 1.5, 5, 1u << 20);
  EXPECT_GT(c.count, 0u);
  EXPECT_LE(c.count, c.points);
}
