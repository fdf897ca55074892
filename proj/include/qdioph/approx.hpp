#pragma once

// Intrinsic approximation experiments: best-approximation records, Dirichlet
// constants, exponent estimates, simplex-lemma verifiers and cover counts for
// the sets of points close to rational points of a fixed height scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "qdioph/dani_flow.hpp"
#include "qdioph/errors.hpp"
#include "qdioph/exact.hpp"
#include "qdioph/projective.hpp"
#include "qdioph/quadratic_form.hpp"
#include "qdioph/rational_points.hpp"

namespace qdioph {

/// Distances at or below this are treated as x being the rational point itself.
inline constexpr double kRationalTol = 1e-13;

/// Enumerated X(Q) up to h_max with unit representatives for fast screening.
class PointTable {
 public:
  PointTable() = default;
  PointTable(PointSet points, Int h_max) : points_(std::move(points)), h_max_(h_max) {
    if (!points_.empty()) m_ = points_.front().size();
    unit_.reserve(points_.size() * m_);
    for (const auto& p : points_) {
      double n2 = 0;
      for (Int c : p.coords()) n2 += static_cast<double>(c) * static_cast<double>(c);
      const double inv = 1 / std::sqrt(n2);
      for (Int c : p.coords()) unit_.push_back(static_cast<double>(c) * inv);
    }
  }

  static PointTable build(const QuadraticForm& form, Int h_max) {
    return PointTable(enumerate_bruteforce(form, h_max), h_max);
  }

  const PointSet& points() const { return points_; }
  Int h_max() const { return h_max_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// |<x, v/|v|>| for the i-th point.
  double abs_cos(std::size_t i, const RealProjectivePoint& x) const {
    const double* u = &unit_[i * m_];
    double dot = 0;
    for (std::size_t k = 0; k < m_; ++k) dot += u[k] * x[k];
    return std::abs(dot);
  }

  /// Indices of points with H(v) <= h_cap and dist(x, v) <= r (exact check on
  /// candidates that pass a cosine screen).
  std::vector<std::size_t> within(const RealProjectivePoint& x, double r, Int h_cap) const {
    std::vector<std::size_t> out;
    const double slack = r * (1 + 1e-6) + 1e-12;
    const double cos_min = slack >= 1 ? 0 : std::sqrt(1 - slack * slack);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].height() > h_cap) break;
      if (abs_cos(i, x) < cos_min) continue;
      if (dist(x, points_[i].coords()) <= r) out.push_back(i);
    }
    return out;
  }

 private:
  PointSet points_;
  Int h_max_ = 0;
  std::size_t m_ = 0;
  std::vector<double> unit_;
};

struct ApproxRecord {
  RationalProjectivePoint v;
  Int h = 0;
  double d = 0;
  double quality = 0;  // h * d
};

/// Scans the table in increasing height and keeps the closest point of each
/// height whenever it beats every earlier distance. Stops at a point with d = 0.
inline std::vector<ApproxRecord> best_records(const PointTable& table, const RealProjectivePoint& x) {
  std::vector<ApproxRecord> out;
  double best = std::numeric_limits<double>::infinity();
  const auto& pts = table.points();
  for (std::size_t i = 0; i < pts.size();) {
    const Int h = pts[i].height();
    std::size_t arg = i;
    double dmin = std::numeric_limits<double>::infinity();
    for (; i < pts.size() && pts[i].height() == h; ++i) {
      const double d = dist(x, pts[i].coords());
      if (d < dmin) {
        dmin = d;
        arg = i;
      }
    }
    if (dmin < best) {
      best = dmin <= kRationalTol ? 0 : dmin;
      out.push_back({pts[arg], h, best, static_cast<double>(h) * best});
      if (best == 0) break;
    }
  }
  return out;
}

namespace detail {

// Record search on x_1^2 + ... + x_k^2 = x_{k+1}^2, where H(v) = x_{k+1} = q.
// With y = x/x_{k+1} and e = |y - p/q|^2 the projective distance satisfies
// dist^2 = e/2 - e^2/16, so dist < d* iff e < 4(1 - sqrt(1 - d*^2)); the
// candidates of height q lie in the cube of half-width q sqrt(e*) around q y.
class SphereRecordSearch {
 public:
  SphereRecordSearch(const RealProjectivePoint& x) : x_(x), k_(x.size() - 1), y_(k_), p_(k_ + 1) {
    for (std::size_t i = 0; i < k_; ++i) y_[i] = x[i] / x[k_];
  }

  std::vector<ApproxRecord> run(Int h_max) {
    std::vector<ApproxRecord> out;
    double best = std::numeric_limits<double>::infinity();
    for (Int q = 1; q <= h_max; ++q) {
      const double e_star = std::isinf(best) ? 4.0 : 4 * best * best / (1 + std::sqrt(1 - best * best));
      q_ = q;
      rad_ = static_cast<double>(q) * std::sqrt(e_star) + 1;
      best_e_ = std::numeric_limits<double>::infinity();
      found_ = false;
      p_[k_] = q;
      descend(0, static_cast<Wide>(q) * q, 0.0);
      if (!found_) continue;
      const double d = dist(x_, std::span<const Int>(arg_));
      if (d < best) {
        best = d <= kRationalTol ? 0 : d;
        out.push_back({canonicalize(arg_), q, best, static_cast<double>(q) * best});
        if (best == 0) break;
      }
    }
    return out;
  }

 private:
  void descend(std::size_t i, Wide rem, double e_acc) {
    const double qd = static_cast<double>(q_);
    if (i + 1 == k_) {
      Wide r;
      if (!exact_sqrt(rem, r)) return;
      for (Wide z : {r, -r}) {
        const double dz = static_cast<double>(z) / qd - y_[i];
        const double e = e_acc + dz * dz;
        if (e < best_e_) {
          p_[i] = static_cast<Int>(z);
          if (gcd_of(p_) == 1) {
            best_e_ = e;
            arg_ = p_;
            found_ = true;
          }
        }
        if (r == 0) break;
      }
      return;
    }
    const double c = qd * y_[i];
    const Int lim = static_cast<Int>(isqrt(rem));
    const Int lo = std::max<Int>(-lim, static_cast<Int>(std::floor(c - rad_)));
    const Int hi = std::min<Int>(lim, static_cast<Int>(std::ceil(c + rad_)));
    for (Int a = lo; a <= hi; ++a) {
      const double da = static_cast<double>(a) / qd - y_[i];
      p_[i] = a;
      descend(i + 1, rem - static_cast<Wide>(a) * a, e_acc + da * da);
    }
  }

  const RealProjectivePoint& x_;
  std::size_t k_;
  std::vector<double> y_;
  IntVec p_, arg_;
  Int q_ = 0;
  double rad_ = 0, best_e_ = 0;
  bool found_ = false;
};

}  // namespace detail

/// Record sequence of x up to height h_max. Unit-sphere forms use a windowed
/// search by height; other forms scan a full enumeration.
inline std::vector<ApproxRecord> best_records(const QuadraticForm& form, const RealProjectivePoint& x, Int h_max) {
  if (x.size() != form.size()) throw Error(ErrorKind::DimensionMismatch, "best_records: size mismatch");
  if (local_obstruction(form, default_obstruction_moduli(form)))
    throw Error(ErrorKind::NoRationalPoints, "X(Q) is empty (local obstruction)");
  std::vector<ApproxRecord> out;
  if (detail::is_unit_sphere(form) && std::abs(x[x.size() - 1]) > 0) {
    out = detail::SphereRecordSearch(x).run(h_max);
  } else {
    out = best_records(PointTable::build(form, h_max), x);
  }
  if (out.empty()) throw Error(ErrorKind::NoRationalPoints, "no rational points up to h_max");
  return out;
}

/// max_k d_k h_{k+1} along the record sequence (h_1 d_1 for a single record).
inline double dirichlet_constant(const std::vector<ApproxRecord>& records) {
  if (records.empty()) throw Error(ErrorKind::InvalidArgument, "dirichlet_constant needs records");
  for (const auto& r : records)
    if (r.d == 0) throw Error(ErrorKind::DegenerateRational, "x is a rational point");
  if (records.size() == 1) return records[0].quality;
  double c = 0;
  for (std::size_t k = 0; k + 1 < records.size(); ++k)
    c = std::max(c, records[k].d * static_cast<double>(records[k + 1].h));
  return c;
}

struct ExponentEstimate {
  double beta_hat = 0;
  double intercept = 0;
  std::size_t sample_count = 0;
  Int h_cap = 0;
  bool infinite = false;
};

/// Least-squares slope of -log d against log h over records with h >= 10,
/// clamped at 0. A record with d = 0 flags an infinite exponent.
inline ExponentEstimate exponent(const std::vector<ApproxRecord>& records, Int h_cap = 0) {
  ExponentEstimate est;
  est.h_cap = h_cap;
  for (const auto& r : records)
    if (r.d == 0) {
      est.infinite = true;
      est.beta_hat = std::numeric_limits<double>::infinity();
      est.sample_count = records.size();
      return est;
    }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.h < 10) continue;
    const double lx = std::log(static_cast<double>(r.h)), ly = -std::log(r.d);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 5) throw Error(ErrorKind::TooFewRecords, "exponent needs at least 5 records with h >= 10");
  const double nn = static_cast<double>(n);
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  est.beta_hat = std::max(0.0, slope);
  est.intercept = (sy - slope * sx) / nn;
  est.sample_count = n;
  return est;
}

struct SimplexReport {
  bool pass = true;
  PointSet members;
  std::size_t closure_dim = 0;
  std::optional<IsotropicPairViolation> violation;
};

namespace detail {

inline Int height_cap(double c_small, double rho) { return static_cast<Int>(std::floor(c_small / rho)); }

inline SimplexReport close_cluster(const QuadraticForm& form, PointSet members) {
  SimplexReport r;
  r.members = std::move(members);
  if (r.members.empty()) return r;
  const auto outcome = totally_isotropic_closure(r.members, form);
  if (outcome.ok()) {
    r.closure_dim = outcome.subspace->dimension();
  } else {
    r.pass = r.members.size() <= 1;
    r.violation = outcome.violation;
  }
  return r;
}

inline void require_rho(double rho, const PointTable& table, Int cap) {
  if (!(rho > 0 && rho < 1)) throw Error(ErrorKind::InvalidArgument, "rho must lie in (0,1)");
  if (table.h_max() < cap) throw Error(ErrorKind::InvalidArgument, "point table does not reach c*rho^-1");
}

}  // namespace detail

/// S = {v : dist(x,v) <= rho, H(v) <= c_small/rho} must span a totally isotropic subspace.
inline SimplexReport simplex_verify(const QuadraticForm& form, const PointTable& table, const RealProjectivePoint& x,
                                    double rho, const DaniConstants& consts) {
  const Int cap = detail::height_cap(consts.c_small, rho);
  detail::require_rho(rho, table, cap);
  PointSet s;
  for (std::size_t i : table.within(x, rho, cap)) s.push_back(table.points()[i]);
  return detail::close_cluster(form, std::move(s));
}

/// As simplex_verify with the extra membership rule dist(x,v) <= sqrt(rho/H(v)).
inline SimplexReport strong_simplex_verify(const QuadraticForm& form, const PointTable& table,
                                           const RealProjectivePoint& x, double rho, const DaniConstants& consts) {
  const Int cap = detail::height_cap(consts.c_small, rho);
  detail::require_rho(rho, table, cap);
  PointSet s;
  for (std::size_t i : table.within(x, 1.0, cap)) {
    const auto& v = table.points()[i];
    if (dist(x, v.coords()) <= std::sqrt(rho / static_cast<double>(v.height()))) s.push_back(v);
  }
  return detail::close_cluster(form, std::move(s));
}

struct SimplexSweepConfig {
  std::size_t samples = 1000;
  double rho_lo = 1e-3;
  double rho_hi = 1e-1;
  std::uint64_t seed = 1;
  bool strong = false;
};

struct SimplexSweepRow {
  std::size_t index = 0;
  RealProjectivePoint x;
  double rho = 0;
  SimplexReport report;
};

struct SimplexSweepSummary {
  std::size_t pass_count = 0;
  std::size_t fail_count = 0;
  std::size_t max_cluster = 0;
  std::size_t max_closure_dim = 0;
  std::size_t resampled = 0;
};

struct SimplexSweep {
  std::vector<SimplexSweepRow> rows;
  SimplexSweepSummary summary;
};

/// Height needed in the point table for a sweep with this configuration.
inline Int simplex_table_height(const DaniConstants& consts, const SimplexSweepConfig& cfg) {
  return std::max<Int>(1, detail::height_cap(consts.c_small, cfg.rho_lo));
}

/// rho log-uniform in [rho_lo, rho_hi]; x uniform on X for even indices and at
/// distance about rho from a random rational point for odd ones. Draws with x
/// within 1e-6 of a table point, or with a membership inequality within a
/// relative 1e-6 of equality, are redrawn.
inline SimplexSweep simplex_sweep(const QuadraticForm& form, const PointTable& table, const DaniConstants& consts,
                                  const SimplexSweepConfig& cfg) {
  if (table.h_max() < simplex_table_height(consts, cfg))
    throw Error(ErrorKind::InvalidArgument, "point table too small for rho_lo");
  const Eigen::MatrixXd a = to_eigen(form);
  SimplexSweep out;
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    Rng rng(cfg.seed, i);
    while (true) {
      const double rho = std::exp(rng.uniform(std::log(cfg.rho_lo), std::log(cfg.rho_hi)));
      const Int cap = detail::height_cap(consts.c_small, rho);
      std::optional<RealProjectivePoint> x;
      if (i % 2 == 1 && !table.empty() && cap >= 1) {
        std::size_t top = 0;
        while (top < table.size() && table.points()[top].height() <= cap) ++top;
        if (top > 0) {
          const auto& v = table.points()[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(top) - 1))];
          Eigen::VectorXd y(static_cast<Eigen::Index>(v.size()));
          for (std::size_t k = 0; k < v.size(); ++k) y[static_cast<Eigen::Index>(k)] = static_cast<double>(v[k]);
          y.normalize();
          const auto z = rng.unit_vector(v.size());
          x = retract_to_quadric(a, y + rho * rng.uniform(0, 1.5) * Eigen::Map<const Eigen::VectorXd>(z.data(), y.size()));
        }
      }
      if (!x) x = sample_point(form, rng);

      bool redraw = false;
      for (std::size_t j : table.within(*x, 1.0, cap)) {
        const auto& v = table.points()[j];
        const double d = dist(*x, v.coords());
        const double strong_r = std::sqrt(rho / static_cast<double>(v.height()));
        if (d < 1e-6 || std::abs(d - rho) <= 1e-6 * rho || (cfg.strong && std::abs(d - strong_r) <= 1e-6 * strong_r)) {
          redraw = true;
          break;
        }
      }
      if (redraw) {
        ++out.summary.resampled;
        continue;
      }
      auto rep = cfg.strong ? strong_simplex_verify(form, table, *x, rho, consts)
                            : simplex_verify(form, table, *x, rho, consts);
      auto& s = out.summary;
      (rep.pass ? s.pass_count : s.fail_count) += 1;
      s.max_cluster = std::max(s.max_cluster, rep.members.size());
      s.max_closure_dim = std::max(s.max_closure_dim, rep.closure_dim);
      out.rows.push_back({i, *x, rho, std::move(rep)});
      break;
    }
  }
  return out;
}

struct CoverCount {
  Int p = 0;
  double beta = 0;
  std::size_t points = 0;  // rational points with 2^p <= H < 2^{p+1} processed
  std::size_t count = 0;   // balls of radius 2^{-beta p}
  bool truncated = false;  // sample_budget reached
};

namespace detail {

// Angle in [0, pi) of a point of a conic, read in the 2-dimensional eigenspace.
class ConicAngle {
 public:
  explicit ConicAngle(const QuadraticForm& form) {
    const auto frame = SpectralFrame::of(to_eigen(form));
    const auto& idx = frame.positive.size() == 2 ? frame.positive : frame.negative;
    if (idx.size() != 2) throw Error(ErrorKind::InvalidArgument, "conic needs a 2-dimensional eigenspace");
    b0_ = frame.vectors.col(idx[0]);
    b1_ = frame.vectors.col(idx[1]);
  }

  double operator()(const RationalProjectivePoint& v) const {
    double c0 = 0, c1 = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      c0 += b0_[static_cast<Eigen::Index>(k)] * static_cast<double>(v[k]);
      c1 += b1_[static_cast<Eigen::Index>(k)] * static_cast<double>(v[k]);
    }
    double t = std::atan2(c1, c0);
    if (t < 0) t += std::numbers::pi;
    if (t >= std::numbers::pi) t -= std::numbers::pi;
    return t;
  }

 private:
  Eigen::VectorXd b0_, b1_;
};

}  // namespace detail

/// Number of radius-r balls, r = 2^{-beta p}, covering the r-neighbourhoods of
/// the rational points with 2^p <= H(v) < 2^{p+1}: a greedy sweep in angle on
/// conics (a ball absorbs the following points within 2r of its first one),
/// occupied cells of side r in the ambient unit sphere otherwise.
inline CoverCount cover_count(const QuadraticForm& form, const PointTable& table, double beta, Int p,
                              std::size_t sample_budget) {
  if (!(beta >= 1)) throw Error(ErrorKind::InvalidArgument, "cover_count needs beta >= 1");
  if (p < 0 || p > 40) throw Error(ErrorKind::InvalidArgument, "p out of range");
  const Int lo = Int(1) << p, hi = (Int(1) << (p + 1)) - 1;
  if (table.h_max() < hi) throw Error(ErrorKind::InvalidArgument, "point table does not reach 2^{p+1}");
  CoverCount out;
  out.p = p;
  out.beta = beta;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const Int h = table.points()[i].height();
    if (h < lo) continue;
    if (h > hi) break;
    if (idx.size() == sample_budget) {
      out.truncated = true;
      break;
    }
    idx.push_back(i);
  }
  out.points = idx.size();
  if (idx.empty()) return out;
  const double r = std::exp2(-beta * static_cast<double>(p));

  if (form.size() == 3) {
    const detail::ConicAngle angle(form);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i : idx) order.emplace_back(angle(table.points()[i]), i);
    std::sort(order.begin(), order.end());
    std::optional<RealProjectivePoint> start;
    for (const auto& [theta, i] : order) {
      const auto& v = table.points()[i];
      if (start && dist(*start, v.coords()) <= 2 * r) continue;
      start = RealProjectivePoint::from_int(v.coords());
      ++out.count;
    }
    return out;
  }

  struct KeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& k) const {
      std::size_t h = 1469598103934665603ull;
      for (auto c : k) h = (h ^ static_cast<std::size_t>(c)) * 1099511628211ull;
      return h;
    }
  };
  std::unordered_set<std::vector<std::int64_t>, KeyHash> cells;
  for (std::size_t i : idx) {
    const auto x = RealProjectivePoint::from_int(table.points()[i].coords());
    std::vector<std::int64_t> key(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) key[k] = static_cast<std::int64_t>(std::floor(x[k] / r));
    cells.insert(std::move(key));
  }
  out.count = cells.size();
  return out;
}

struct CoverDiagnostic {
  double beta = 0;
  std::vector<CoverCount> levels;
  std::vector<double> ratios;  // log2(count) / (beta p)
  double slope = 0;            // regression slope of log2(count) against beta p
};

/// Box-counting diagnostic over p in [p_lo, p_hi]; its expected value is the
/// dimension of the set of x with exponent >= beta, 1/beta on a circle.
inline CoverDiagnostic cover_diagnostic(const QuadraticForm& form, const PointTable& table, double beta, Int p_lo,
                                        Int p_hi, std::size_t sample_budget) {
  CoverDiagnostic out;
  out.beta = beta;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (Int p = p_lo; p <= p_hi; ++p) {
    const auto c = cover_count(form, table, beta, p, sample_budget);
    out.levels.push_back(c);
    const double xs = beta * static_cast<double>(p);
    const double ys = c.count > 0 ? std::log2(static_cast<double>(c.count)) : 0.0;
    out.ratios.push_back(ys / xs);
    if (c.count == 0) continue;
    sx += xs;
    sy += ys;
    sxx += xs * xs;
    sxy += xs * ys;
    ++n;
  }
  const double nn = static_cast<double>(n);
  if (n >= 2) out.slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  return out;
}

}  // namespace qdioph
