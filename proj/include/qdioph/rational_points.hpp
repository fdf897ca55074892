#pragma once

// Rational points on X = [Q^{-1}(0)]: canonical form, enumeration by height,
// totally isotropic spans and Q-rank bounds.

#include <algorithm>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <thread>
#include <vector>

#include "qdioph/errors.hpp"
#include "qdioph/exact.hpp"
#include "qdioph/quadratic_form.hpp"

namespace qdioph {

/// Primitive integer vector, normalized so the last nonzero coordinate is positive.
class RationalProjectivePoint {
 public:
  RationalProjectivePoint() = default;

  const IntVec& coords() const { return coords_; }
  std::size_t size() const { return coords_.size(); }
  Int operator[](std::size_t i) const { return coords_[i]; }
  Int height() const { return max_abs(coords_); }

  auto operator<=>(const RationalProjectivePoint&) const = default;

 private:
  explicit RationalProjectivePoint(IntVec c) : coords_(std::move(c)) {}
  friend RationalProjectivePoint canonicalize(std::span<const Int> v);
  friend RationalProjectivePoint canonicalize_wide(std::span<const Wide> v);

  IntVec coords_;
};

inline RationalProjectivePoint canonicalize(std::span<const Int> v) {
  const Int g = gcd_of(v);
  if (g == 0) throw Error(ErrorKind::ZeroVector, "cannot canonicalize the zero vector");
  IntVec c(v.begin(), v.end());
  Int last = 0;
  for (auto it = c.rbegin(); it != c.rend(); ++it)
    if (*it != 0) {
      last = *it;
      break;
    }
  const Int s = last < 0 ? -g : g;
  for (auto& x : c) x /= s;
  return RationalProjectivePoint(std::move(c));
}

inline RationalProjectivePoint canonicalize_wide(std::span<const Wide> v) {
  Wide g = 0;
  for (Wide x : v) {
    Wide a = x < 0 ? -x : x;
    while (a != 0) {
      const Wide t = g % a;
      g = a;
      a = t;
    }
  }
  if (g == 0) throw Error(ErrorKind::ZeroVector, "cannot canonicalize the zero vector");
  Wide last = 0;
  for (auto it = v.rbegin(); it != v.rend(); ++it)
    if (*it != 0) {
      last = *it;
      break;
    }
  const Wide s = last < 0 ? -g : g;
  IntVec c;
  c.reserve(v.size());
  for (Wide x : v) c.push_back(narrow(x / s));
  return RationalProjectivePoint(std::move(c));
}

inline RationalProjectivePoint canonicalize(std::initializer_list<Int> v) {
  return canonicalize(std::span<const Int>(v.begin(), v.size()));
}

inline Int height(const RationalProjectivePoint& v) { return v.height(); }

inline bool is_canonical(std::span<const Int> v) {
  if (gcd_of(v) != 1) return false;
  for (auto it = v.rbegin(); it != v.rend(); ++it)
    if (*it != 0) return *it > 0;
  return false;
}

/// Orders points by height, then lexicographically.
struct HeightOrder {
  bool operator()(const RationalProjectivePoint& a, const RationalProjectivePoint& b) const {
    const Int ha = a.height(), hb = b.height();
    if (ha != hb) return ha < hb;
    return a.coords() < b.coords();
  }
};

using PointSet = std::vector<RationalProjectivePoint>;  // sorted by HeightOrder, unique

inline void sort_unique(PointSet& pts) {
  std::sort(pts.begin(), pts.end(), HeightOrder{});
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
}

namespace detail {

// Box scan over coordinates 0..m-2 with interval pruning; the last coordinate is
// solved from the remaining quadratic equation.
class BoxScanner {
 public:
  BoxScanner(const QuadraticForm& form, Int h_max, Int h_min_exclusive)
      : form_(form), m_(form.size()), h_(h_max), h_min_(h_min_exclusive), v_(m_, 0),
        lin_(m_, std::vector<Wide>(m_, 0)), qp_(m_, 0), rest_lo_(m_, 0), rest_hi_(m_, 0) {
    const Wide hh = static_cast<Wide>(h_) * h_;
    for (std::size_t k = 0; k < m_; ++k) {
      Wide lo = 0, hi = 0;
      for (std::size_t i = k; i < m_; ++i)
        for (std::size_t j = k; j < m_; ++j) {
          const Wide a = form_(i, j);
          if (i == j) {
            (a < 0 ? lo : hi) += a * hh;
          } else {
            lo -= (a < 0 ? -a : a) * hh;
            hi += (a < 0 ? -a : a) * hh;
          }
        }
      rest_lo_[k] = lo;
      rest_hi_[k] = hi;
    }
  }

  PointSet run(Int first_lo, Int first_hi) {
    out_.clear();
    if (m_ == 1) return out_;
    for (Int x = first_lo; x <= first_hi; ++x) {
      if (m_ == 2) {
        set(0, x);
        solve_last();
      } else {
        set(0, x);
        if (!pruned(1)) descend(1);
      }
    }
    return std::move(out_);
  }

 private:
  // Assign v[k] = x using the running state at depth k.
  void set(std::size_t k, Int x) {
    v_[k] = x;
    const Wide base_q = k == 0 ? 0 : qp_[k - 1];
    const auto& lin_prev = k == 0 ? zero_row() : lin_[k - 1];
    qp_[k] = base_q + 2 * lin_prev[k] * x + static_cast<Wide>(form_(k, k)) * x * x;
    for (std::size_t j = k + 1; j < m_; ++j) lin_[k][j] = lin_prev[j] + static_cast<Wide>(form_(k, j)) * x;
  }

  const std::vector<Wide>& zero_row() {
    if (zero_.size() != m_) zero_.assign(m_, 0);
    return zero_;
  }

  // True when no completion of v[0..k-1] can make Q vanish.
  bool pruned(std::size_t k) const {
    const auto& lin = lin_[k - 1];
    Wide spread = 0;
    for (std::size_t j = k; j < m_; ++j) spread += 2 * (lin[j] < 0 ? -lin[j] : lin[j]) * h_;
    const Wide q = qp_[k - 1];
    return q - spread + rest_lo_[k] > 0 || q + spread + rest_hi_[k] < 0;
  }

  void descend(std::size_t k) {
    const std::size_t last = m_ - 1;
    for (Int x = -h_; x <= h_; ++x) {
      set(k, x);
      if (k + 1 == last) {
        solve_last();
      } else if (!pruned(k + 1)) {
        descend(k + 1);
      }
    }
  }

  void solve_last() {
    const std::size_t last = m_ - 1;
    const Wide a = form_(last, last);
    const Wide b = lin_[last - 1][last];  // Q = a z^2 + 2 b z + c
    const Wide c = qp_[last - 1];
    if (a == 0) {
      if (b == 0) {
        if (c != 0) return;
        for (Int z = -h_; z <= h_; ++z) emit(z);
        return;
      }
      if (c % (2 * b) != 0) return;
      const Wide z = -c / (2 * b);
      if (z >= -h_ && z <= h_) emit(static_cast<Int>(z));
      return;
    }
    const Wide disc = b * b - a * c;
    Wide r;
    if (!exact_sqrt(disc, r)) return;
    for (Wide num : {-b + r, -b - r}) {
      if (num % a != 0) continue;
      const Wide z = num / a;
      if (z < -h_ || z > h_) continue;
      emit(static_cast<Int>(z));
      if (r == 0) break;
    }
  }

  void emit(Int z) {
    v_[m_ - 1] = z;
    const Int h = max_abs(v_);
    if (h == 0 || h <= h_min_) return;
    if (!is_canonical(v_)) return;
    out_.push_back(canonicalize(v_));
  }

  const QuadraticForm& form_;
  std::size_t m_;
  Int h_;
  Int h_min_;
  IntVec v_;
  std::vector<std::vector<Wide>> lin_;
  std::vector<Wide> qp_;
  std::vector<Wide> rest_lo_, rest_hi_;
  std::vector<Wide> zero_;
  PointSet out_;
};

// x_1^2 + ... + x_k^2 = x_{k+1}^2: H(v) = x_{k+1}, so scan by height q and
// solve the last spatial coordinate.
inline bool is_unit_sphere(const QuadraticForm& form) {
  const std::size_t m = form.size();
  if (m < 3) return false;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const Int want = i != j ? 0 : (i + 1 == m ? -1 : 1);
      if (form(i, j) != want) return false;
    }
  return true;
}

class SphereScanner {
 public:
  explicit SphereScanner(std::size_t m) : k_(m - 1), v_(m, 0) {}

  void scan_height(Int q, PointSet& out) {
    v_[k_] = q;
    descend(0, static_cast<Wide>(q) * q, q, out);
  }

 private:
  void descend(std::size_t i, Wide rem, Int q, PointSet& out) {
    if (i + 1 == k_) {
      Wide r;
      if (!exact_sqrt(rem, r)) return;
      for (Wide z : {r, -r}) {
        v_[i] = static_cast<Int>(z);
        if (gcd_of(v_) == 1) out.push_back(canonicalize(v_));
        if (r == 0) break;
      }
      return;
    }
    const Int lim = static_cast<Int>(isqrt(rem));
    for (Int x = -lim; x <= lim; ++x) {
      v_[i] = x;
      descend(i + 1, rem - static_cast<Wide>(x) * x, q, out);
    }
  }

  std::size_t k_;
  IntVec v_;
};

}  // namespace detail

/// All canonical v with Q(v) = 0 and h_min < H(v) <= h_max, sorted by height.
/// The leading coordinate range is split across worker threads; results are merged.
inline PointSet enumerate_bruteforce(const QuadraticForm& form, Int h_max, Int h_min_exclusive = 0,
                                     unsigned threads = 0) {
  if (h_max < 1) throw Error(ErrorKind::InvalidArgument, "h_max must be >= 1");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const Int span_len = 2 * h_max + 1;
  threads = static_cast<unsigned>(std::min<Int>(threads, span_len));
  PointSet all;
  if (detail::is_unit_sphere(form)) {
    std::vector<std::future<PointSet>> parts;
    for (unsigned t = 0; t < threads; ++t)
      parts.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                 [&form, h_max, h_min_exclusive, t, threads] {
                                   detail::SphereScanner scanner(form.size());
                                   PointSet out;
                                   for (Int q = std::max<Int>(1, h_min_exclusive + 1) + t; q <= h_max; q += threads)
                                     scanner.scan_height(q, out);
                                   return out;
                                 }));
    for (auto& p : parts) {
      auto chunk_pts = p.get();
      all.insert(all.end(), chunk_pts.begin(), chunk_pts.end());
    }
  } else if (threads <= 1) {
    detail::BoxScanner scanner(form, h_max, h_min_exclusive);
    all = scanner.run(-h_max, h_max);
  } else {
    std::vector<std::future<PointSet>> parts;
    const Int chunk = (span_len + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const Int lo = -h_max + static_cast<Int>(t) * chunk;
      const Int hi = std::min(h_max, lo + chunk - 1);
      if (lo > hi) break;
      parts.push_back(std::async(std::launch::async, [&form, h_max, h_min_exclusive, lo, hi] {
        detail::BoxScanner scanner(form, h_max, h_min_exclusive);
        return scanner.run(lo, hi);
      }));
    }
    for (auto& p : parts) {
      auto chunk_pts = p.get();
      all.insert(all.end(), chunk_pts.begin(), chunk_pts.end());
    }
  }
  sort_unique(all);
  return all;
}

/// Second intersection of the line base + s*w with X, or nullopt when the line
/// is degenerate (w proportional to base, or tangent and not contained in X).
/// A line contained in X yields w itself.
inline std::optional<RationalProjectivePoint> second_intersection(const QuadraticForm& form,
                                                                  std::span<const Int> base,
                                                                  std::span<const Int> w) {
  detail::check_size(form, w.size());
  if (rank_of_int({IntVec(base.begin(), base.end()), IntVec(w.begin(), w.end())}) < 2) return std::nullopt;
  const Wide b = detail::bilinear_wide(form, base, w);
  const Wide q = detail::bilinear_wide(form, w, w);
  if (b == 0) {
    if (q != 0) return std::nullopt;
    return canonicalize(w);
  }
  std::vector<Wide> v(base.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = q * base[i] - 2 * b * w[i];
  return canonicalize_wide(v);
}

/// Enumerates X(Q) up to height h_max by sweeping lines through a rational base
/// point. Directions have a zero in the base's pivot coordinate and lie in the
/// box |w_i| <= 2 h_max (1 + max|base_i|).
inline PointSet enumerate_parametrized(const QuadraticForm& form, std::span<const Int> base, Int h_max) {
  detail::check_size(form, base.size());
  if (h_max < 1) throw Error(ErrorKind::InvalidArgument, "h_max must be >= 1");
  if (gcd_of(base) == 0) throw Error(ErrorKind::BasePointInvalid, "base is the zero vector");
  if (evaluate(form, base) != 0) throw Error(ErrorKind::BasePointInvalid, "Q(base) != 0");
  if (in_kernel(form, base)) throw Error(ErrorKind::BasePointInvalid, "base lies in ker Q");
  if (!inertia(form).nonsingular()) throw Error(ErrorKind::BasePointInvalid, "form is singular");

  const std::size_t m = form.size();
  std::size_t pivot = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (std::abs(base[i]) > std::abs(base[pivot])) pivot = i;
  const Int bmax = max_abs(base);
  const Int box = checked_mul(2 * h_max, 1 + bmax);

  PointSet out;
  auto keep = [&](const RationalProjectivePoint& p) {
    if (p.height() <= h_max) out.push_back(p);
  };
  const RationalProjectivePoint bp = canonicalize(base);
  keep(bp);

  IntVec w(m, 0);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < m; ++i)
    if (i != pivot) free.push_back(i);

  // Lines inside X through base. Every integer point v on span(base, dir)
  // satisfies b_k v = v_k base + c dir, so scan (v_k, c) and divide by b_k.
  auto sweep_line = [&](const IntVec& dir) {
    std::size_t j = 0;
    while (dir[j] == 0) ++j;
    const Wide bk = base[pivot];
    const Wide lim = static_cast<Wide>(h_max) * (bk < 0 ? -bk : bk);
    for (Int a = -h_max; a <= h_max; ++a) {
      const Wide lo_num = -lim - static_cast<Wide>(a) * base[j];
      const Wide hi_num = lim - static_cast<Wide>(a) * base[j];
      const Wide c0 = dir[j] > 0 ? lo_num / dir[j] : hi_num / dir[j];
      const Wide c1 = dir[j] > 0 ? hi_num / dir[j] : lo_num / dir[j];
      for (Wide c = c0 - 1; c <= c1 + 1; ++c) {
        std::vector<Wide> v(m);
        bool ok = true;
        for (std::size_t i = 0; i < m && ok; ++i) {
          const Wide num = static_cast<Wide>(a) * base[i] + c * dir[i];
          ok = num % bk == 0;
          v[i] = ok ? num / bk : 0;
          ok = ok && v[i] <= h_max && v[i] >= -h_max;
        }
        bool nonzero = false;
        for (Wide x : v) nonzero = nonzero || x != 0;
        if (ok && nonzero) keep(canonicalize_wide(v));
      }
    }
  };

  // Odometer over the free coordinates of w.
  std::vector<Int> idx(free.size(), -box);
  while (true) {
    for (std::size_t k = 0; k < free.size(); ++k) w[free[k]] = idx[k];
    if (is_canonical(w)) {
      const Wide b = detail::bilinear_wide(form, base, w);
      const Wide q = detail::bilinear_wide(form, w, w);
      if (b != 0) {
        std::vector<Wide> v(m);
        for (std::size_t i = 0; i < m; ++i) v[i] = q * base[i] - 2 * b * w[i];
        keep(canonicalize_wide(v));
      } else if (q == 0) {
        sweep_line(w);
      }
    }
    std::size_t k = 0;
    while (k < idx.size() && idx[k] == box) idx[k++] = -box;
    if (k == idx.size()) break;
    ++idx[k];
  }
  sort_unique(out);
  return out;
}

/// Integer basis of a totally isotropic rational subspace.
class IsotropicSubspace {
 public:
  IsotropicSubspace() = default;
  explicit IsotropicSubspace(std::vector<IntVec> basis) : basis_(std::move(basis)) {}

  const std::vector<IntVec>& basis() const { return basis_; }
  std::size_t dimension() const { return basis_.size(); }

  bool contains(std::span<const Int> v) const {
    auto rows = basis_;
    rows.emplace_back(v.begin(), v.end());
    return rank_of_int(rows) == basis_.size();
  }

 private:
  std::vector<IntVec> basis_;
};

struct IsotropicPairViolation {
  std::size_t i = 0;
  std::size_t j = 0;
  Int value = 0;  // B(v_i, v_j)
};

struct ClosureOutcome {
  std::optional<IsotropicSubspace> subspace;
  std::optional<IsotropicPairViolation> violation;
  bool ok() const { return subspace.has_value(); }
};

/// Span of isotropic points if every pairwise bilinear value vanishes,
/// otherwise the first violating pair.
inline ClosureOutcome totally_isotropic_closure(std::span<const RationalProjectivePoint> points,
                                                const QuadraticForm& form) {
  for (const auto& p : points)
    if (evaluate(form, p.coords()) != 0) throw Error(ErrorKind::NotIsotropic, "closure input has Q(v) != 0");
  ClosureOutcome out;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const Int b = bilinear(form, points[i].coords(), points[j].coords());
      if (b != 0) {
        out.violation = IsotropicPairViolation{i, j, b};
        return out;
      }
    }
  std::vector<IntVec> basis;
  for (const auto& p : points) {
    auto trial = basis;
    trial.push_back(p.coords());
    if (rank_of_int(trial) == trial.size()) basis = std::move(trial);
  }
  out.subspace = IsotropicSubspace(std::move(basis));
  return out;
}

inline ClosureOutcome totally_isotropic_closure(const PointSet& points, const QuadraticForm& form) {
  return totally_isotropic_closure(std::span<const RationalProjectivePoint>(points), form);
}

inline BigInt determinant(const QuadraticForm& form) {
  // Bareiss fraction-free elimination.
  const std::size_t m = form.size();
  std::vector<std::vector<BigInt>> a(m, std::vector<BigInt>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) a[i][j] = form(i, j);
  BigInt prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    if (a[k][k] == 0) {
      std::size_t p = k + 1;
      while (p < m && a[p][k] == 0) ++p;
      if (p == m) return 0;
      std::swap(a[p], a[k]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < m; ++i)
      for (std::size_t j = k + 1; j < m; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
    prev = a[k][k];
  }
  return sign * a[m - 1][m - 1];
}

namespace detail {

inline Int smallest_prime_factor(Int m) {
  for (Int p = 2; p * p <= m; ++p)
    if (m % p == 0) return p;
  return m;
}

inline bool has_primitive_solution_mod(const QuadraticForm& form, Int m, Int p) {
  const std::size_t n = form.size();
  IntVec r(n, 0);
  // Odometer over residues; the all-divisible-by-p case is excluded.
  while (true) {
    bool primitive = false;
    for (Int x : r) primitive = primitive || x % p != 0;
    if (primitive) {
      Wide acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (r[i] == 0) continue;
        Wide row = 0;
        for (std::size_t j = 0; j < n; ++j) row += static_cast<Wide>(form(i, j)) * r[j];
        acc += static_cast<Wide>(r[i]) * row;
      }
      if (acc % m == 0) return true;
    }
    std::size_t k = 0;
    while (k < n && r[k] == m - 1) r[k++] = 0;
    if (k == n) return false;
    ++r[k];
  }
}

}  // namespace detail

/// Residue scans above this many vectors are skipped.
inline constexpr double kMaxResidueScan = 5e7;

/// First modulus m = p^k for which Q(v) = 0 (mod m) has no solution with some
/// coordinate prime to p. A returned modulus proves X(Q) is empty.
inline std::optional<Int> local_obstruction(const QuadraticForm& form, std::span<const Int> moduli) {
  for (Int m : moduli) {
    if (m < 2) continue;
    if (std::pow(static_cast<double>(m), static_cast<double>(form.size())) > kMaxResidueScan) continue;
    const Int p = detail::smallest_prime_factor(m);
    if (!detail::has_primitive_solution_mod(form, m, p)) return m;
  }
  return std::nullopt;
}

/// {4, 8, 9, 25, 49} together with p^2 for every prime p dividing det(A).
/// p^2 for every prime p | det first, then the classical moduli 4, 8, 9, 25, 49.
inline std::vector<Int> default_obstruction_moduli(const QuadraticForm& form) {
  std::vector<Int> mods;
  BigInt det = boost::multiprecision::abs(determinant(form));
  if (det > 1 && det < BigInt(1) << 62) {
    Int d = det.convert_to<Int>();
    for (Int p = 2; p * p <= d; ++p) {
      if (d % p != 0) continue;
      mods.push_back(p * p);
      while (d % p == 0) d /= p;
    }
    if (d > 1 && d < 3037000499LL) mods.push_back(d * d);
  }
  for (Int m : {4, 8, 9, 25, 49})
    if (std::find(mods.begin(), mods.end(), m) == mods.end()) mods.push_back(m);
  return mods;
}

struct QRankBounds {
  std::size_t lower = 0;
  std::size_t upper = 0;
  std::optional<IsotropicSubspace> witness;
  std::optional<Int> obstruction;

  bool exact() const { return lower == upper; }
};

namespace detail {

class RankSearch {
 public:
  RankSearch(const QuadraticForm& form, const PointSet& pts, std::size_t cap, std::size_t budget)
      : form_(form), pts_(pts), cap_(cap), budget_(budget) {}

  std::vector<IntVec> run() {
    std::vector<IntVec> chosen;
    dfs(0, chosen);
    return best_;
  }

 private:
  void dfs(std::size_t start, std::vector<IntVec>& chosen) {
    if (chosen.size() > best_.size()) best_ = chosen;
    if (best_.size() >= cap_ || visits_ >= budget_) return;
    for (std::size_t i = start; i < pts_.size(); ++i) {
      if (++visits_ >= budget_) return;
      const auto& v = pts_[i].coords();
      bool orthogonal = true;
      for (const auto& c : chosen) orthogonal = orthogonal && bilinear(form_, c, v) == 0;
      if (!orthogonal) continue;
      chosen.push_back(v);
      if (rank_of_int(chosen) == chosen.size()) dfs(i + 1, chosen);
      chosen.pop_back();
      if (best_.size() >= cap_) return;
    }
  }

  const QuadraticForm& form_;
  const PointSet& pts_;
  std::size_t cap_;
  std::size_t budget_;
  std::size_t visits_ = 0;
  std::vector<IntVec> best_;
};

}  // namespace detail

/// Lower bound from a depth-capped backtracking search over the enumerated
/// points; upper bound from the real signature (min(pos,neg) plus the kernel
/// dimension), dropped to 0 when a local obstruction is found.
inline QRankBounds qrank_bounds(const QuadraticForm& form, const PointSet& points,
                                std::size_t search_budget = 5'000'000) {
  const Inertia in = inertia(form);
  const std::size_t cap = std::min(in.pos, in.neg) + in.zero;
  QRankBounds out;
  out.upper = cap;
  const auto best = detail::RankSearch(form, points, cap, search_budget).run();
  out.lower = best.size();
  if (out.lower >= 1) out.witness = IsotropicSubspace(best);
  if (out.lower == 0) {
    const auto mods = default_obstruction_moduli(form);
    out.obstruction = local_obstruction(form, mods);
    if (out.obstruction) out.upper = 0;
  }
  return out;
}

inline QRankBounds qrank_bounds(const QuadraticForm& form, Int h_max) {
  return qrank_bounds(form, enumerate_bruteforce(form, h_max));
}

}  // namespace qdioph
