#include <cmath>

#include <gtest/gtest.h>

#include "qdioph/game.hpp"

using namespace qdioph;

namespace {

QuadraticForm circle() { return QuadraticForm::diagonal({1, 1, -1}); }
QuadraticForm sphere() { return QuadraticForm::diagonal({1, 1, 1, -1}); }

const PointTable& circle_table() {
  static const PointTable t = PointTable::build(circle(), 1000);
  return t;
}

const PointTable& sphere_table() {
  static const PointTable t = PointTable::build(sphere(), 120);
  return t;
}

// Ball state with the center pushed onto X at working precision.
GameState state_at(const QuadraticForm& f, const std::vector<double>& x, double rho, double beta = 0.1) {
  GameState s;
  s.center = *detail::retract(detail::make_domain(f, std::nullopt), RealVec(x.begin(), x.end()));
  s.z = s.center;
  s.radius = rho;
  s.beta = beta;
  return s;
}

bool admissible(const GameState& s, const Deletion& del, const RealVec& z) {
  return detail::close_dist(s.z, z) <= (1 - Real(s.beta)) * s.radius &&
         detail::deletion_dist(del, z) >= 2 * Real(s.beta) * s.radius;
}

}  // namespace

TEST(Alice, BallFallbackWithoutRationalPoints) {
  const auto consts = working_constants(circle());
  const auto x = sample_point(circle(), 3);
  const auto s = state_at(circle(), x.coords(), 1e-7);
  const auto del = alice_move(s, circle(), circle_table(), consts);
  EXPECT_TRUE(del.ball);
  EXPECT_TRUE(del.cluster.empty());
  EXPECT_EQ(del.epsilon, Real(1e-7) * Real(0.1));
}

TEST(Alice, SinglePointDeletion) {
  const auto consts = working_constants(circle());
  const auto s = state_at(circle(), {3, 4.001, 5}, 0.01);
  const auto del = alice_move(s, circle(), circle_table(), consts);
  ASSERT_FALSE(del.ball);
  ASSERT_EQ(del.cluster.size(), 1u);
  EXPECT_EQ(del.cluster[0].coords(), (IntVec{3, 4, 5}));
  ASSERT_EQ(del.basis.size(), 1u);
}

TEST(Alice, SplitFormCoplanarCluster) {
  const auto f = QuadraticForm::antidiagonal(4);
  const auto consts = working_constants(f);
  const auto table = PointTable::build(f, 40);
  const double rho = consts.c_small / 28;
  const auto del = alice_move(state_at(f, {13.5, 1, 0, 0}, rho), f, table, consts);
  ASSERT_FALSE(del.ball);
  EXPECT_GE(del.cluster.size(), 3u);
  EXPECT_EQ(del.basis.size(), 2u);
  const IsotropicSubspace l(del.basis);
  for (const auto& v : {IntVec{13, 1, 0, 0}, IntVec{14, 1, 0, 0}, IntVec{27, 2, 0, 0}}) EXPECT_TRUE(l.contains(v));
  for (const auto& v : del.cluster) EXPECT_TRUE(l.contains(v.coords()));
}

TEST(Alice, OversizedConstantIsClosureFailure) {
  auto consts = working_constants(circle());
  consts.c_small = 40;
  const auto table = PointTable::build(circle(), 400);
  try {
    alice_move(state_at(circle(), {7.01 / 25, 24.0 / 25, 1.00003}, 0.05), circle(), table, consts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ClosureFailure);
  }
}

TEST(Bob, StubbornKeepsCenterWhenDeletionIsFar) {
  const auto consts = working_constants(circle());
  const auto domain = detail::make_domain(circle(), std::nullopt);
  const detail::BobContext ctx{domain, circle_table(), consts};
  const auto s = state_at(circle(), {0.6, 0.8, 1}, 1e-3);
  Deletion del;
  del.basis = {{0, 1, 1}};
  del.onb = orthonormalize<Real>({RealVec{0, 1, 1}}, Real(1e-30));
  del.epsilon = Real(1e-4);
  Rng rng(1);
  EXPECT_EQ(bob_move(s, del, BobStrategy::Stubborn, ctx, rng), s.z);
}

TEST(Bob, DeletionThroughCenterForcesMove) {
  const auto consts = working_constants(sphere());
  const auto domain = detail::make_domain(sphere(), std::nullopt);
  const detail::BobContext ctx{domain, sphere_table(), consts};
  const auto x = sample_point(sphere(), 5);
  for (double rho : {1e-2, 1e-12, 1e-35}) {
    const auto s = state_at(sphere(), x.coords(), rho);
    Deletion del;
    del.ball = true;
    del.center = s.center;
    del.epsilon = s.radius * Real(s.beta);
    for (auto strategy : {BobStrategy::Stubborn, BobStrategy::Random, BobStrategy::Greedy}) {
      Rng rng(2);
      const auto z = bob_move(s, del, strategy, ctx, rng);
      EXPECT_TRUE(admissible(s, del, z)) << to_string(strategy) << " rho=" << rho;
      EXPECT_GT(detail::close_dist(s.z, z), del.epsilon);
      // Stays on X to working precision.
      Real q = 0;
      for (std::size_t i = 0; i < 3; ++i) q += z[i] * z[i];
      EXPECT_LT(boost::multiprecision::abs(q - z[3] * z[3]), Real(1e-45));
    }
  }
}

TEST(Bob, RandomIsReproducible) {
  const auto consts = working_constants(circle());
  const auto domain = detail::make_domain(circle(), std::nullopt);
  const detail::BobContext ctx{domain, circle_table(), consts};
  const auto s = state_at(circle(), sample_point(circle(), 9).coords(), 0.01);
  Deletion del;
  del.ball = true;
  del.center = s.center;
  del.epsilon = s.radius * Real(s.beta);
  Rng a(4), b(4);
  EXPECT_EQ(bob_move(s, del, BobStrategy::Random, ctx, a), bob_move(s, del, BobStrategy::Random, ctx, b));
}

TEST(Game, RejectsBadParameters) {
  GameConfig cfg;
  cfg.beta = 0.34;
  const auto consts = working_constants(circle());
  EXPECT_THROW(play(circle(), circle_table(), consts, cfg), Error);
  cfg.beta = 0.1;
  cfg.rounds = 0;
  EXPECT_THROW(play(circle(), circle_table(), consts, cfg), Error);
  EXPECT_THROW(bob_strategy_from_string("lazy"), Error);
  EXPECT_EQ(bob_strategy_from_string("greedy"), BobStrategy::Greedy);
}

TEST(Game, SameSeedSameTranscript) {
  const auto consts = working_constants(circle());
  GameConfig cfg;
  cfg.seed = 17;
  for (auto strategy : {BobStrategy::Stubborn, BobStrategy::Random, BobStrategy::Greedy}) {
    cfg.strategy = strategy;
    const auto a = play(circle(), circle_table(), consts, cfg);
    const auto b = play(circle(), circle_table(), consts, cfg);
    EXPECT_EQ(transcript_to_json(a.transcript).dump(), transcript_to_json(b.transcript).dump());
    EXPECT_EQ(a.x_final, b.x_final);
  }
  cfg.seed = 18;
  const auto c = play(circle(), circle_table(), consts, cfg);
  cfg.seed = 17;
  EXPECT_NE(play(circle(), circle_table(), consts, cfg).x_final, c.x_final);
}

TEST(Game, TranscriptJsonRoundTripsCenters) {
  const auto consts = working_constants(sphere());
  GameConfig cfg;
  cfg.seed = 3;
  const auto g = play(sphere(), sphere_table(), consts, cfg);
  const auto j = transcript_to_json(g.transcript);
  ASSERT_EQ(j.size(), 2u * 40 + 1);
  EXPECT_EQ(j.back()["actor"], "bob");
  EXPECT_EQ(j[1]["actor"], "alice");
  EXPECT_TRUE(j[1].contains("epsilon"));
  const auto centers = transcript_centers(j);
  EXPECT_EQ(centers.back(), g.x_final);
}

TEST(Game, FortyRoundsShrinkGeometrically) {
  const auto consts = working_constants(circle());
  GameConfig cfg;
  const auto g = play(circle(), circle_table(), consts, cfg);
  const double ratio = (g.rho_final / Real(cfg.rho0)).convert_to<double>();
  EXPECT_NEAR(std::log10(ratio), -40, 1e-9);
  EXPECT_EQ(g.subspace_deletions + g.ball_deletions, 40u);
}

TEST(Game, CircleCertificatesAndBranches) {
  const auto consts = working_constants(circle());
  for (auto strategy : {BobStrategy::Stubborn, BobStrategy::Random, BobStrategy::Greedy}) {
    GameConfig cfg;
    cfg.strategy = strategy;
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 15; ++s) seeds.push_back(s);
    for (const auto& g : play_fleet(circle(), circle_table(), consts, cfg, seeds)) {
      const auto cert = certify_ba(g, circle_table(), cfg.beta, consts);
      EXPECT_TRUE(cert.valid) << to_string(strategy) << " min_quality " << cert.min_quality;
      EXPECT_FALSE(cert.heights_excluded);
      const auto chk = check_transcript(g, circle_table(), consts, cfg.beta);
      EXPECT_TRUE(chk.ok()) << chk.branch_violations << " " << chk.nesting_violations << " "
                            << chk.avoidance_violations;
      EXPECT_GT(chk.branch_checked, 0u);
    }
  }
}

TEST(Game, SphereCertificates) {
  const auto consts = working_constants(sphere());
  for (auto strategy : {BobStrategy::Stubborn, BobStrategy::Random, BobStrategy::Greedy}) {
    GameConfig cfg;
    cfg.strategy = strategy;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      cfg.seed = seed;
      const auto g = play(sphere(), sphere_table(), consts, cfg);
      EXPECT_TRUE(certify_ba(g, sphere_table(), cfg.beta, consts).valid);
      EXPECT_TRUE(check_transcript(g, sphere_table(), consts, cfg.beta).ok());
    }
  }
}

// Greedy Bob steers toward rational points, so Alice meets more of them and
// the final point ends up closer to one than under random play.
TEST(Game, GreedyBobIsMoreAdversarialThanRandom) {
  const auto consts = working_constants(circle());
  auto tally = [&](BobStrategy strategy) {
    GameConfig cfg;
    cfg.strategy = strategy;
    std::size_t subspace = 0;
    double min_quality = 1e300;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      cfg.seed = seed;
      const auto g = play(circle(), circle_table(), consts, cfg);
      subspace += g.subspace_deletions;
      min_quality = std::min(min_quality, certify_ba(g, circle_table(), cfg.beta, consts).min_quality);
    }
    return std::make_pair(subspace, min_quality);
  };
  const auto greedy = tally(BobStrategy::Greedy);
  const auto random = tally(BobStrategy::Random);
  EXPECT_GT(greedy.first, random.first);
  EXPECT_LT(greedy.second, random.second);
}

TEST(Game, BobRestrictedToSlice) {
  const auto consts = working_constants(sphere());
  GameConfig cfg;
  cfg.slice = SliceSpec{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0.3, 1}}};
  for (auto strategy : {BobStrategy::Stubborn, BobStrategy::Random, BobStrategy::Greedy}) {
    cfg.strategy = strategy;
    cfg.seed = 7;
    const auto g = play(sphere(), sphere_table(), consts, cfg);
    for (const auto& mv : g.transcript) EXPECT_LT(cfg.slice->distance(detail::to_point(mv.center)), 1e-14);
    EXPECT_TRUE(certify_ba(g, sphere_table(), cfg.beta, consts).valid);
    EXPECT_TRUE(check_transcript(g, sphere_table(), consts, cfg.beta).ok());
  }
}

TEST(Certificate, RationalPointIsInvalid) {
  const auto consts = working_constants(circle());
  const auto c = certify_ba(RealProjectivePoint::from_int(IntVec{3, 4, 5}), circle_table(), 0.1, consts);
  EXPECT_FALSE(c.valid);
  EXPECT_EQ(c.min_quality, 0);
  ASSERT_TRUE(c.argmin.has_value());
  EXPECT_EQ(c.argmin->coords(), (IntVec{3, 4, 5}));
}

TEST(Certificate, HeightsBeyondRangeAreExcluded) {
  const auto consts = working_constants(circle());
  const auto x = sample_point(circle(), 2);
  const auto c = certify_ba(x, circle_table(), 0.1, consts, 1e-3);
  EXPECT_TRUE(c.heights_excluded);
  EXPECT_EQ(c.h_used, static_cast<Int>(std::floor(consts.c_small / 1e-3)));
  EXPECT_EQ(c.h_cap, 1000);
  const auto j = to_json(c);
  EXPECT_EQ(j["h_cap"], 1000);
  EXPECT_TRUE(j.contains("min_quality"));
}
