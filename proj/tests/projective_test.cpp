#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qdioph/projective.hpp"
#include "qdioph/rational_points.hpp"

using namespace qdioph;

namespace {

RealProjectivePoint pt(std::vector<double> v) { return RealProjectivePoint(std::move(v)); }

RealProjectivePoint random_point(Rng& rng, std::size_t m) { return RealProjectivePoint(rng.unit_vector(m)); }

}  // namespace

TEST(RealPoint, NormalizedAndSignCanonical) {
  const auto x = pt({-3, -4, -5});
  EXPECT_NEAR(x[0], 0.6 / std::sqrt(2.0), 1e-15);
  EXPECT_GT(x[2], 0);
  const auto y = pt({1, -1, 0});
  EXPECT_GT(y[1], 0);
  EXPECT_LT(y[0], 0);
  EXPECT_THROW(pt({0, 0, 0}), Error);
}

TEST(Dist, Examples) {
  EXPECT_EQ(dist(pt({1, 0, 0}), pt({1, 0, 0})), 0.0);
  EXPECT_NEAR(dist(pt({1, 0}), pt({0, 1})), 1.0, 1e-15);
  EXPECT_NEAR(dist(pt({3, 4, 5}), pt({4, 3, 5})), std::sqrt(99.0) / 50.0, 1e-15);
  EXPECT_NEAR(dist(pt({3, 4, 5}), pt({4, 3, 5})), 0.1989975, 1e-7);
  EXPECT_NEAR(dist(pt({1, 2, 3}), pt({-2, -4, -6})), 0.0, 1e-15);
}

TEST(Dist, MatchesSineOfAngle) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto x = random_point(rng, 4), y = random_point(rng, 4);
    double dot = 0;
    for (std::size_t k = 0; k < 4; ++k) dot += x[k] * y[k];
    EXPECT_NEAR(dist(x, y), std::sqrt(std::max(0.0, 1 - dot * dot)), 1e-12);
    EXPECT_EQ(dist(x, y), dist(y, x));
  }
}

TEST(Dist, TriangleInequality) {
  Rng rng(2);
  for (int i = 0; i < 100000; ++i) {
    const std::size_t m = 2 + i % 4;
    const auto x = random_point(rng, m), y = random_point(rng, m), z = random_point(rng, m);
    ASSERT_LE(dist(x, z), dist(x, y) + dist(y, z) + 1e-12);
  }
}

// In the chart x_{n+1} != 0 the projective and affine metrics are comparable.
TEST(Dist, AffineChartComparability) {
  Rng rng(3);
  int checked = 0;
  double lo = 1e9, hi = 0;
  while (checked < 20000) {
    const std::size_t n = 1 + checked % 3;
    std::vector<double> p(n), q(n);
    for (auto& c : p) c = rng.uniform(-2, 2);
    double np = 0;
    for (double c : p) np += c * c;
    if (np > 4) continue;
    for (std::size_t k = 0; k < n; ++k) q[k] = p[k] + rng.uniform(-0.06, 0.06);
    double nq = 0, gap = 0;
    for (std::size_t k = 0; k < n; ++k) {
      nq += q[k] * q[k];
      gap += (p[k] - q[k]) * (p[k] - q[k]);
    }
    gap = std::sqrt(gap);
    if (nq > 4 || gap > 0.1 || gap == 0) continue;
    p.push_back(1);
    q.push_back(1);
    const double r = dist(pt(p), pt(q)) / gap;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    ++checked;
  }
  EXPECT_GE(lo, 0.1);
  EXPECT_LE(hi, 10.0);
}

TEST(DistToSubspace, Examples) {
  EXPECT_NEAR(dist_to_subspace(pt({1, 1, 0}), {IntVec{1, 0, 0}}), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(dist_to_subspace(pt({0, 0, 1}), {IntVec{1, 0, 0}, IntVec{0, 1, 0}}), 1.0, 1e-15);
  EXPECT_NEAR(dist_to_subspace(pt({2, 3, 0}), {IntVec{1, 1, 0}, IntVec{1, -1, 0}}), 0.0, 1e-15);
  EXPECT_NEAR(dist_to_subspace(pt({3, 4, 5}), {IntVec{3, 4, 5}}), 0.0, 1e-15);
}

TEST(DistToSubspace, AtMostDistanceToBasisVectors) {
  Rng rng(4);
  for (int i = 0; i < 5000; ++i) {
    const std::size_t m = 3 + i % 3;
    const auto x = random_point(rng, m);
    std::vector<IntVec> basis(1 + i % (m - 1), IntVec(m));
    for (auto& b : basis)
      for (auto& c : b) c = rng.integer(-5, 5);
    if (rank_of_int(basis) < basis.size()) continue;
    const double d = dist_to_subspace(x, basis);
    for (const auto& b : basis) EXPECT_LE(d, dist(x, b) + 1e-12);
  }
}

// ||p1/q1 - p2/q2||^2 = 2 - 2<p1,p2>/(q1 q2) >= 2/(q1 q2) for distinct rational
// points on the unit circle.
TEST(SphereIdentity, ExactGapOnCircle) {
  EXPECT_EQ(oracle::affine_sphere_gap_sq({3, 4, 5}, {4, 3, 5}), Rational(2, 25));
  EXPECT_GE(oracle::affine_sphere_gap_sq({3, 4, 5}, {4, 3, 5}), Rational(1, 25));
  const auto pts = enumerate_bruteforce(QuadraticForm::diagonal({1, 1, -1}), 60);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const auto& a = pts[i].coords();
      const auto& b = pts[j].coords();
      Rational direct = 0;
      for (int k = 0; k < 2; ++k) {
        const Rational d = Rational(a[k], a[2]) - Rational(b[k], b[2]);
        direct += d * d;
      }
      const auto gap = oracle::affine_sphere_gap_sq(a, b);
      ASSERT_EQ(direct, gap);
      ASSERT_GE(gap, Rational(2, a[2] * b[2]));
    }
}

TEST(Sampler, CirclePointsLieOnX) {
  const auto f = QuadraticForm::diagonal({1, 1, -1});
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = sample_point(f, rng);
    EXPECT_NEAR(x[0] * x[0] + x[1] * x[1], x[2] * x[2], 1e-12);
    EXPECT_NEAR(x[0] * x[0] + x[1] * x[1] + x[2] * x[2], 1.0, 1e-12);
  }
}

TEST(Sampler, GeneralFormsAndErrors) {
  Rng rng(6);
  const QuadraticForm f({{2, 1, 0, 0}, {1, -3, 0, 1}, {0, 0, 1, 0}, {0, 1, 0, -5}});
  for (int i = 0; i < 1000; ++i) EXPECT_LE(std::abs(evaluate_real(f, sample_point(f, rng).coords())), 1e-9);
  try {
    sample_point(QuadraticForm::diagonal({1, 1, 1}), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DefiniteForm);
  }
  try {
    sample_point(QuadraticForm::diagonal({1, 0, -1}), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularForm);
  }
}

TEST(Sampler, DeterministicPerSeed) {
  const auto f = QuadraticForm::diagonal({1, 1, 1, -1});
  EXPECT_EQ(sample_point(f, 42), sample_point(f, 42));
  EXPECT_NE(sample_point(f, 42), sample_point(f, 43));
}

// The angle of the circle sampler is uniform on (-pi, pi].
TEST(Sampler, CircleAngleKolmogorovSmirnov) {
  const auto f = QuadraticForm::diagonal({1, 1, -1});
  Rng rng(7);
  std::vector<double> u;
  for (int i = 0; i < 10000; ++i) {
    const auto x = sample_point(f, rng);
    u.push_back((std::atan2(x[1], x[0]) + std::numbers::pi) / (2 * std::numbers::pi));
  }
  std::sort(u.begin(), u.end());
  double ks = 0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    ks = std::max({ks, (i + 1) / n - u[i], u[i] - i / n});
  EXPECT_LT(ks, 0.02);
}

TEST(Slice, SphereCoordinatePlane) {
  const auto f = QuadraticForm::diagonal({1, 1, 1, -1});
  const SliceSpec s{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}}};
  Rng rng(8);
  for (int i = 0; i < 200; ++i) EXPECT_NEAR(sample_on_submanifold(f, s, rng)[2], 0.0, 1e-15);
}

TEST(Slice, SamplesSatisfyInvariants) {
  const auto f = QuadraticForm::diagonal({1, 1, 1, -1});
  const SliceSpec s{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0.3, 1}}};
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto x = sample_on_submanifold(f, s, rng);
    EXPECT_LE(std::abs(evaluate_real(f, x.coords())), 1e-9);
    EXPECT_LE(s.distance(x), 1e-12);
  }
}

TEST(Slice, EmptyIntersection) {
  const auto f = QuadraticForm::diagonal({1, 1, 1, -1});
  const SliceSpec spacelike{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};
  try {
    sample_on_submanifold(f, spacelike, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyIntersection);
  }
  // Tangent to the cone: Q restricted is degenerate and meets X in one point only.
  const SliceSpec tangent{{{1, 0, 0, 1}, {0, 1, 0, 0}, {0, 0, 1, 0}}};
  EXPECT_THROW(sample_on_submanifold(f, tangent, 1), Error);
}
