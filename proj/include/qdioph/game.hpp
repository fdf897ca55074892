#pragma once

// The isotropic Schmidt game. Bob plays nested balls B_0 ⊃ B_1 ⊃ ... on X with
// rho_{i+1} = beta rho_i; in each ball Alice deletes the beta rho_i
// neighbourhood of the totally isotropic closure of the rational points in
// 2B_i of height <= c rho_i^{-1}, or a ball around the center when there are
// none. Centers are carried in 50-digit floating point so that forty rounds at
// beta = 0.1 remain resolvable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ios>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "json.hpp"
#include "qdioph/approx.hpp"
#include "qdioph/dani_flow.hpp"
#include "qdioph/errors.hpp"
#include "qdioph/projective.hpp"
#include "qdioph/quadratic_form.hpp"
#include "qdioph/rational_points.hpp"

namespace qdioph {

using Real = boost::multiprecision::cpp_bin_float_50;
using RealVec = std::vector<Real>;

enum class BobStrategy { Stubborn, Random, Greedy };

inline const char* to_string(BobStrategy s) {
  switch (s) {
    case BobStrategy::Stubborn: return "stubborn";
    case BobStrategy::Random: return "random";
    case BobStrategy::Greedy: return "greedy";
  }
  return "unknown";
}

inline BobStrategy bob_strategy_from_string(const std::string& s) {
  if (s == "stubborn") return BobStrategy::Stubborn;
  if (s == "random") return BobStrategy::Random;
  if (s == "greedy") return BobStrategy::Greedy;
  throw Error(ErrorKind::InvalidArgument, "unknown Bob strategy '" + s + "'");
}

/// Attempts Bob makes before declaring the remaining region empty.
inline constexpr int kBobAttempts = 10000;

/// Alice's move: either the eps-neighbourhood of a totally isotropic rational
/// subspace or, when no rational point qualifies, the eps-ball at the center.
struct Deletion {
  bool ball = false;
  std::vector<IntVec> basis;
  PointSet cluster;
  RealVec center;  // ambient; the deleted ball's center when ball
  Real epsilon = 0;
  std::vector<RealVec> onb;  // orthonormal basis of span(basis)
};

struct Move {
  enum class Actor { Alice, Bob };
  Int round = 0;
  Actor actor = Actor::Bob;
  RealVec center;  // ambient unit vector
  Real radius = 0;
  std::optional<Deletion> deletion;
};

struct GameConfig {
  double beta = 0.1;
  Int rounds = 40;
  double rho0 = 0.25;
  BobStrategy strategy = BobStrategy::Random;
  std::uint64_t seed = 1;
  std::optional<SliceSpec> slice;  // restrict Bob's centers to a conic of X
};

struct GameState {
  RealVec z;       // center in domain coordinates
  RealVec center;  // ambient
  Real radius = 0;
  double beta = 0;
  Int round = 0;
  std::optional<Deletion> deleted;
  std::vector<Move> transcript;
};

namespace detail {

inline Real rdot(const RealVec& a, const RealVec& b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Real rnorm(const RealVec& a) {
  using boost::multiprecision::sqrt;
  return sqrt(rdot(a, a));
}

inline RealVec normalized(RealVec v) {
  const Real n = rnorm(v);
  for (auto& x : v) x /= n;
  return v;
}

inline RealVec to_real(std::span<const double> v) { return RealVec(v.begin(), v.end()); }

inline std::vector<double> to_double(const RealVec& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(x.convert_to<double>());
  return out;
}

/// Distance between nearby points, computed from the difference b - a so that
/// radii far below 1e-16 keep their relative accuracy.
inline Real close_dist(const RealVec& a, const RealVec& b) {
  using boost::multiprecision::sqrt;
  RealVec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  Real w = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const Real t = a[i] * d[j] - a[j] * d[i];
      w += t * t;
    }
  const Real r = sqrt(w / (rdot(a, a) * rdot(b, b)));
  return r > 1 ? Real(1) : r;
}

/// Where Bob's centers live: span of an orthonormal basis with the restricted
/// Gram matrix. The full space uses the identity basis.
struct Domain {
  std::vector<RealVec> basis;  // k rows of length m
  std::vector<RealVec> gram;   // k x k
  bool full = true;

  std::size_t k() const { return basis.size(); }
  std::size_t manifold_dim() const { return k() - 2; }

  RealVec ambient(const RealVec& z) const {
    if (full) return z;
    RealVec x(basis[0].size(), Real(0));
    for (std::size_t j = 0; j < k(); ++j)
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += z[j] * basis[j][i];
    return x;
  }

  RealVec coords(const RealVec& x) const {
    if (full) return x;
    RealVec z(k());
    for (std::size_t j = 0; j < k(); ++j) z[j] = rdot(basis[j], x);
    return z;
  }

  RealVec apply(const RealVec& z) const {
    RealVec out(k(), Real(0));
    for (std::size_t i = 0; i < k(); ++i) out[i] = rdot(gram[i], z);
    return out;
  }
};

inline Domain make_domain(const QuadraticForm& form, const std::optional<SliceSpec>& slice) {
  const std::size_t m = form.size();
  Domain d;
  if (!slice) {
    for (std::size_t i = 0; i < m; ++i) {
      RealVec e(m, Real(0));
      e[i] = 1;
      d.basis.push_back(std::move(e));
    }
  } else {
    SliceConic::of(form, *slice);  // rejects slices missing X
    std::vector<RealVec> rows;
    for (const auto& b : slice->orthonormal()) rows.push_back(to_real(b));
    d.basis = orthonormalize<Real>(std::move(rows), Real(1e-30));
    d.full = false;
  }
  d.gram.assign(d.k(), RealVec(d.k(), Real(0)));
  for (std::size_t i = 0; i < d.k(); ++i)
    for (std::size_t j = 0; j < d.k(); ++j)
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
          if (form(a, b) != 0) d.gram[i][j] += d.basis[i][a] * Real(form(a, b)) * d.basis[j][b];
  return d;
}

/// Q(y + mu G y) = 0 for the root of least |mu|, then normalized.
inline std::optional<RealVec> retract(const Domain& d, const RealVec& y) {
  using boost::multiprecision::abs;
  using boost::multiprecision::sqrt;
  const RealVec gy = d.apply(y);
  const Real qa = rdot(gy, d.apply(gy)), qb = 2 * rdot(gy, gy), qc = rdot(y, gy);
  Real mu = 0;
  if (qc != 0) {
    if (abs(qa) < Real(1e-60) * qb) {
      if (qb == 0) return std::nullopt;
      mu = -qc / qb;
    } else {
      const Real disc = qb * qb - 4 * qa * qc;
      if (disc < 0) return std::nullopt;
      mu = -2 * qc / (qb + sqrt(disc));
    }
  }
  RealVec z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = y[i] + mu * gy[i];
  if (!(rdot(z, z) > 0)) return std::nullopt;
  return normalized(std::move(z));
}

/// Steps from z by s along a random unit tangent direction and retracts.
class TangentSampler {
 public:
  TangentSampler(const Domain& d, const RealVec& z) : d_(d), z_(z) {
    onb_ = orthonormalize<Real>({z, d.apply(z)}, Real(1e-30));
  }

  std::optional<RealVec> step(Real s, Rng& rng) const {
    RealVec w(d_.k());
    for (int attempt = 0; attempt < 8; ++attempt) {
      for (auto& x : w) x = rng.normal();
      for (const auto& q : onb_) {
        const Real t = rdot(q, w);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= t * q[i];
      }
      const Real n = rnorm(w);
      if (n > Real(1e-6)) {
        RealVec y(z_.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = z_[i] + s * w[i] / n;
        return retract(d_, y);
      }
    }
    return std::nullopt;
  }

 private:
  const Domain& d_;
  RealVec z_;
  std::vector<RealVec> onb_;
};

inline Real deletion_dist(const Deletion& del, const RealVec& x) {
  if (del.ball) return close_dist(del.center, x);
  return dist_to_orthonormal<Real>(x, del.onb);
}

inline RealProjectivePoint to_point(const RealVec& x) { return RealProjectivePoint(to_double(x)); }

}  // namespace detail

/// Alice's height cap min(c rho^{-1}, table height).
inline Int alice_height_cap(const DaniConstants& consts, const Real& rho, Int table_h) {
  const double q = consts.c_small / rho.convert_to<double>();
  return q >= static_cast<double>(table_h) ? table_h : static_cast<Int>(std::floor(q));
}

/// Alice's explicit strategy. Throws ClosureFailure when the qualifying points
/// in 2B_i do not span a totally isotropic subspace.
inline Deletion alice_move(const GameState& state, const QuadraticForm& form, const PointTable& table,
                           const DaniConstants& consts) {
  const Int cap = alice_height_cap(consts, state.radius, table.h_max());
  const double two_rho = 2 * state.radius.convert_to<double>();
  Deletion del;
  del.epsilon = state.radius * Real(state.beta);
  del.center = state.center;
  if (cap >= 1)
    for (std::size_t i : table.within(detail::to_point(state.center), two_rho, cap))
      del.cluster.push_back(table.points()[i]);
  if (del.cluster.empty()) {
    del.ball = true;
    return del;
  }
  const auto closure = totally_isotropic_closure(del.cluster, form);
  if (!closure.ok()) {
    const auto& v = *closure.violation;
    throw Error(ErrorKind::ClosureFailure, "round " + std::to_string(state.round) + ": B(v_" +
                                               std::to_string(v.i) + ", v_" + std::to_string(v.j) +
                                               ") = " + std::to_string(v.value));
  }
  del.basis = closure.subspace->basis();
  std::vector<RealVec> rows;
  for (const auto& b : del.basis) rows.emplace_back(b.begin(), b.end());
  del.onb = orthonormalize<Real>(std::move(rows), Real(1e-30));
  return del;
}

namespace detail {

struct BobContext {
  const Domain& domain;
  const PointTable& table;
  const DaniConstants& consts;
};

inline bool feasible(const GameState& s, const Deletion& del, const Domain& d, const RealVec& z) {
  const Real rho = s.radius, beta = Real(s.beta);
  if (close_dist(s.z, z) > (1 - beta) * rho) return false;
  return deletion_dist(del, d.ambient(z)) >= 2 * beta * rho;
}

// Uniform in the geodesic ball to first order: radius (1-beta) rho U^{1/dim}.
inline std::optional<RealVec> random_feasible(const GameState& s, const Deletion& del, const Domain& d,
                                              const TangentSampler& ts, Rng& rng, int attempts) {
  const Real reach = (1 - Real(s.beta)) * s.radius;
  const double inv_dim = 1.0 / static_cast<double>(d.manifold_dim());
  for (int a = 0; a < attempts; ++a) {
    const Real r = reach * Real(std::pow(rng.uniform(), inv_dim));
    const auto z = ts.step(r, rng);
    if (z && feasible(s, del, d, *z)) return z;
  }
  return std::nullopt;
}

inline RealVec bob_stubborn(const GameState& s, const Deletion& del, const Domain& d, const TangentSampler& ts,
                            Rng& rng) {
  if (feasible(s, del, d, s.z)) return s.z;
  constexpr int kSteps = 32, kDirections = 16;
  const Real reach = (1 - Real(s.beta)) * s.radius;
  for (int j = 1; j <= kSteps; ++j) {
    const Real r = reach * j / kSteps;
    for (int k = 0; k < kDirections; ++k) {
      const auto z = ts.step(r, rng);
      if (z && feasible(s, del, d, *z)) return *z;
    }
  }
  if (auto z = random_feasible(s, del, d, ts, rng, kBobAttempts)) return *z;
  throw Error(ErrorKind::NoFeasibleBall, "stubborn Bob found no admissible center");
}

inline RealVec bob_random(const GameState& s, const Deletion& del, const Domain& d, const TangentSampler& ts,
                          Rng& rng) {
  if (auto z = random_feasible(s, del, d, ts, rng, kBobAttempts)) return *z;
  throw Error(ErrorKind::NoFeasibleBall, "no admissible center after 10^4 attempts");
}

// Aim at the nearest rational point that becomes visible to Alice next round.
inline RealVec bob_greedy(const GameState& s, const Deletion& del, const BobContext& ctx, const TangentSampler& ts,
                          Rng& rng) {
  const Real reach = (1 - Real(s.beta)) * s.radius;
  const Int cap_now = alice_height_cap(ctx.consts, s.radius, ctx.table.h_max());
  const Int cap_next = alice_height_cap(ctx.consts, s.radius * Real(s.beta), ctx.table.h_max());
  const auto here = to_point(s.center);
  std::optional<RationalProjectivePoint> target;
  double best = std::numeric_limits<double>::infinity();
  if (cap_next > cap_now)
    for (std::size_t i : ctx.table.within(here, reach.convert_to<double>(), cap_next)) {
      const auto& v = ctx.table.points()[i];
      if (v.height() <= cap_now) continue;
      const double dv = dist(here, v.coords());
      if (dv < best) {
        best = dv;
        target = v;
      }
    }
  if (!target) return bob_random(s, del, ctx.domain, ts, rng);
  const RealVec tv(target->coords().begin(), target->coords().end());
  if (const auto zv = retract(ctx.domain, ctx.domain.coords(normalized(tv)));
      zv && feasible(s, del, ctx.domain, *zv))
    return *zv;
  std::optional<RealVec> pick;
  Real pick_d = 2;
  for (int a = 0; a < 48; ++a) {
    const auto z = random_feasible(s, del, ctx.domain, ts, rng, kBobAttempts / 48);
    if (!z) continue;
    const Real dz = wedge_dist<Real, Real>(ctx.domain.ambient(*z), tv);
    if (dz < pick_d) {
      pick_d = dz;
      pick = z;
    }
  }
  if (pick) return *pick;
  return bob_random(s, del, ctx.domain, ts, rng);
}

}  // namespace detail

/// Bob's reply inside B_i minus the deleted neighbourhood; returns the new
/// center in domain coordinates. Containment B_{i+1} ⊆ B_i \ L^(eps) is
/// enforced through dist(y, x_i) <= (1-beta) rho_i and dist(y, L) >= 2 beta rho_i.
inline RealVec bob_move(const GameState& state, const Deletion& del, BobStrategy strategy,
                        const detail::BobContext& ctx, Rng& rng) {
  const detail::TangentSampler ts(ctx.domain, state.z);
  switch (strategy) {
    case BobStrategy::Stubborn: return detail::bob_stubborn(state, del, ctx.domain, ts, rng);
    case BobStrategy::Random: return detail::bob_random(state, del, ctx.domain, ts, rng);
    case BobStrategy::Greedy: return detail::bob_greedy(state, del, ctx, ts, rng);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown Bob strategy");
}

struct GameResult {
  RealVec x_final;  // ambient unit vector, center of the last ball
  Real rho_final = 0;
  Real rho_last_alice = 0;  // radius of the last ball Alice played in
  std::vector<Move> transcript;
  std::size_t subspace_deletions = 0;
  std::size_t ball_deletions = 0;
  std::size_t max_closure_dim = 0;

  RealProjectivePoint x_final_point() const { return detail::to_point(x_final); }
};

inline void validate(const GameConfig& cfg) {
  if (!(cfg.beta > 0 && cfg.beta < 1.0 / 3)) throw Error(ErrorKind::InvalidArgument, "beta must lie in (0, 1/3)");
  if (cfg.rounds < 1) throw Error(ErrorKind::InvalidArgument, "rounds must be >= 1");
  if (!(cfg.rho0 > 0 && cfg.rho0 < 1)) throw Error(ErrorKind::InvalidArgument, "rho0 must lie in (0, 1)");
}

/// Plays the alternating game: Bob opens with B_0 at a seeded random point,
/// then for i < rounds Alice deletes inside B_i and Bob answers with B_{i+1}.
inline GameResult play(const QuadraticForm& form, const PointTable& table, const DaniConstants& consts,
                       const GameConfig& cfg) {
  validate(cfg);
  const auto domain = detail::make_domain(form, cfg.slice);
  Rng start(cfg.seed, 0), rng(cfg.seed, 1);
  const auto x0 = cfg.slice ? sample_on_submanifold(form, *cfg.slice, start) : sample_point(form, start);
  const auto z0 = detail::retract(domain, domain.coords(detail::to_real(x0.coords())));
  if (!z0) throw Error(ErrorKind::EmptyIntersection, "could not place the opening ball on X");

  GameState s;
  s.z = *z0;
  s.center = domain.ambient(s.z);
  s.radius = Real(cfg.rho0);
  s.beta = cfg.beta;
  s.transcript.push_back({0, Move::Actor::Bob, s.center, s.radius, std::nullopt});

  GameResult out;
  const detail::BobContext ctx{domain, table, consts};
  for (Int i = 0; i < cfg.rounds; ++i) {
    s.round = i;
    auto del = alice_move(s, form, table, consts);
    if (del.ball) {
      ++out.ball_deletions;
    } else {
      ++out.subspace_deletions;
      out.max_closure_dim = std::max(out.max_closure_dim, del.basis.size());
    }
    s.transcript.push_back({i, Move::Actor::Alice, s.center, s.radius, del});
    out.rho_last_alice = s.radius;
    s.z = bob_move(s, del, cfg.strategy, ctx, rng);
    s.center = domain.ambient(s.z);
    s.radius *= Real(cfg.beta);
    s.deleted = std::move(del);
    s.transcript.push_back({i + 1, Move::Actor::Bob, s.center, s.radius, std::nullopt});
  }
  out.x_final = s.center;
  out.rho_final = s.radius;
  out.transcript = std::move(s.transcript);
  return out;
}

/// Convenience overload that enumerates X(Q) to h_cap and derives the constants.
inline GameResult play(const QuadraticForm& form, double beta, Int rounds, BobStrategy strategy, std::uint64_t seed,
                       Int h_cap = 1000) {
  GameConfig cfg;
  cfg.beta = beta;
  cfg.rounds = rounds;
  cfg.strategy = strategy;
  cfg.seed = seed;
  return play(form, PointTable::build(form, h_cap), working_constants(form), cfg);
}

/// Seeds played independently; results are indexed like seeds.
inline std::vector<GameResult> play_fleet(const QuadraticForm& form, const PointTable& table,
                                          const DaniConstants& consts, GameConfig cfg,
                                          const std::vector<std::uint64_t>& seeds, unsigned threads = 0) {
  validate(cfg);
  std::vector<GameResult> out(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, seeds.size())));
  auto worker = [&](unsigned t) {
    for (std::size_t i = t; i < seeds.size(); i += threads) {
      auto c = cfg;
      c.seed = seeds[i];
      try {
        out[i] = play(form, table, consts, c);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

struct BACertificate {
  RealProjectivePoint x;
  double c0 = 0;
  Int h_cap = 0;   // requested
  Int h_used = 0;  // heights actually certified
  bool heights_excluded = false;
  double min_quality = std::numeric_limits<double>::infinity();
  std::optional<RationalProjectivePoint> argmin;
  bool valid = true;
};

inline constexpr double kCertificateSlack = 1e-9;

/// min H(v) dist(x, v) over the table up to h_cap, further limited to
/// c rho_last^{-1} when the game's last radius is given.
inline BACertificate certify_ba(const RealProjectivePoint& x, const PointTable& table, double beta,
                                const DaniConstants& consts, std::optional<double> rho_last = std::nullopt) {
  BACertificate c;
  c.x = x;
  c.c0 = consts.c_small * beta * beta;
  c.h_cap = table.h_max();
  c.h_used = rho_last ? alice_height_cap(consts, Real(*rho_last), table.h_max()) : table.h_max();
  c.heights_excluded = c.h_used < c.h_cap;
  for (const auto& v : table.points()) {
    if (v.height() > c.h_used) break;
    const double d = dist(x, v.coords());
    const double q = static_cast<double>(v.height()) * (d <= kRationalTol ? 0.0 : d);
    if (q < c.min_quality) {
      c.min_quality = q;
      c.argmin = v;
    }
  }
  c.valid = c.min_quality >= c.c0 - kCertificateSlack;
  return c;
}

inline BACertificate certify_ba(const GameResult& g, const PointTable& table, double beta,
                                const DaniConstants& consts) {
  return certify_ba(g.x_final_point(), table, beta, consts, g.rho_last_alice.convert_to<double>());
}

struct TranscriptCheck {
  std::size_t branch_checked = 0;
  std::size_t branch_violations = 0;
  std::size_t nesting_violations = 0;
  std::size_t avoidance_violations = 0;
  bool ok() const { return branch_violations == 0 && nesting_violations == 0 && avoidance_violations == 0; }
};

/// Replays the proof on a transcript. For each Alice round i and each v with
/// c rho_{i-1}^{-1} < H(v) <= c rho_i^{-1} (rho_{-1} = rho_0): either v lies
/// outside 2B_i and dist(x, v) >= beta rho_{i-1}, or v lies in L_i and
/// dist(x, v) >= beta^2 rho_{i-1}. Also checks nesting and that x avoids every
/// deleted neighbourhood.
inline TranscriptCheck check_transcript(const GameResult& g, const PointTable& table, const DaniConstants& consts,
                                        double beta) {
  TranscriptCheck out;
  const Real b = Real(beta);
  const auto xf = g.x_final_point();
  const Move* prev_bob = nullptr;
  std::optional<Real> rho_prev;
  Int cap_prev = 0;
  for (const auto& mv : g.transcript) {
    if (mv.actor == Move::Actor::Bob) {
      if (prev_bob) {
        if (detail::close_dist(prev_bob->center, mv.center) > prev_bob->radius - mv.radius) ++out.nesting_violations;
        if (mv.radius < b * prev_bob->radius * (1 - Real(1e-30))) ++out.nesting_violations;
      }
      prev_bob = &mv;
      continue;
    }
    const auto& del = *mv.deletion;
    if (detail::deletion_dist(del, g.x_final) < del.epsilon) ++out.avoidance_violations;
    const double rho_im1 = (rho_prev ? *rho_prev : mv.radius).convert_to<double>();
    const Int cap = alice_height_cap(consts, mv.radius, table.h_max());
    const auto center = detail::to_point(mv.center);
    const double two_rho = 2 * mv.radius.convert_to<double>();
    for (const auto& v : table.points()) {
      if (v.height() > cap) break;
      if (v.height() <= cap_prev) continue;
      ++out.branch_checked;
      const double dx = dist(xf, v.coords());
      const bool inside = dist(center, v.coords()) <= two_rho;
      if (!inside) {
        if (dx < beta * rho_im1) ++out.branch_violations;
      } else {
        IsotropicSubspace l(del.basis);
        if (del.ball || !l.contains(v.coords()) || dx < beta * beta * rho_im1) ++out.branch_violations;
      }
    }
    cap_prev = std::max(cap_prev, cap);
    rho_prev = mv.radius;
  }
  return out;
}

namespace detail {

inline std::string real_str(const Real& r) {
  return r.str(std::numeric_limits<Real>::max_digits10, std::ios_base::scientific);
}

}  // namespace detail

inline nlohmann::json transcript_to_json(const std::vector<Move>& moves) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& mv : moves) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& x : mv.center) c.push_back(detail::real_str(x));
    nlohmann::json j{{"round", mv.round},
                     {"actor", mv.actor == Move::Actor::Alice ? "alice" : "bob"},
                     {"center", c},
                     {"radius", detail::real_str(mv.radius)},
                     {"deleted_basis", nullptr},
                     {"epsilon", nullptr}};
    if (mv.deletion) {
      j["kind"] = mv.deletion->ball ? "ball" : "subspace";
      if (!mv.deletion->ball) j["deleted_basis"] = mv.deletion->basis;
      j["epsilon"] = detail::real_str(mv.deletion->epsilon);
    }
    out.push_back(std::move(j));
  }
  return out;
}

/// Centers stored in a transcript, parsed back at full precision.
inline std::vector<RealVec> transcript_centers(const nlohmann::json& transcript) {
  std::vector<RealVec> out;
  for (const auto& mv : transcript) {
    RealVec c;
    for (const auto& s : mv.at("center")) c.emplace_back(s.get<std::string>());
    out.push_back(std::move(c));
  }
  return out;
}

inline nlohmann::json to_json(const BACertificate& c) {
  nlohmann::json j{{"c0", c.c0},
                   {"min_quality", c.min_quality},
                   {"valid", c.valid},
                   {"h_cap", c.h_cap},
                   {"h_used", c.h_used},
                   {"heights_excluded", c.heights_excluded}};
  if (c.argmin) j["argmin"] = c.argmin->coords();
  return j;
}

}  // namespace qdioph
