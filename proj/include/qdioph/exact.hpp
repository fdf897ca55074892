#pragma once

// Exact integer and rational helpers shared by the algebraic modules.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "qdioph/errors.hpp"

namespace qdioph {

using Int = std::int64_t;
using Wide = __int128;
using IntVec = std::vector<Int>;
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
using RatVec = std::vector<Rational>;
using RatMatrix = std::vector<RatVec>;  // row-major

inline Int checked_mul(Int a, Int b) {
  Int out;
  if (__builtin_mul_overflow(a, b, &out)) throw Error(ErrorKind::Overflow, "int64 multiplication");
  return out;
}

inline Int checked_add(Int a, Int b) {
  Int out;
  if (__builtin_add_overflow(a, b, &out)) throw Error(ErrorKind::Overflow, "int64 addition");
  return out;
}

inline Int narrow(Wide w) {
  if (w > static_cast<Wide>(INT64_MAX) || w < static_cast<Wide>(INT64_MIN))
    throw Error(ErrorKind::Overflow, "value exceeds int64");
  return static_cast<Int>(w);
}

/// floor(sqrt(n)) for n >= 0, exact.
inline Wide isqrt(Wide n) {
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "isqrt of negative value");
  if (n < 2) return n;
  Wide r = static_cast<Wide>(std::sqrt(static_cast<long double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

/// Returns true and sets root when n is a perfect square.
inline bool exact_sqrt(Wide n, Wide& root) {
  if (n < 0) return false;
  root = isqrt(n);
  return root * root == n;
}

inline Int gcd_of(std::span<const Int> v) {
  Int g = 0;
  for (Int x : v) g = std::gcd(g, x);
  return g;
}

inline Int max_abs(std::span<const Int> v) {
  Int m = 0;
  for (Int x : v) m = std::max(m, x < 0 ? -x : x);
  return m;
}

inline Rational to_rational(Int v) { return Rational(v); }

inline RatVec to_rational(std::span<const Int> v) {
  RatVec out;
  out.reserve(v.size());
  for (Int x : v) out.emplace_back(x);
  return out;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Scales a rational vector to a primitive integer vector pointing the same way.
inline std::vector<BigInt> clear_denominators(const RatVec& v) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  BigInt l = 1;
  for (const auto& x : v) l = boost::multiprecision::lcm(l, BigInt(denominator(x)));
  std::vector<BigInt> out;
  out.reserve(v.size());
  BigInt g = 0;
  for (const auto& x : v) {
    out.push_back(BigInt(numerator(x)) * (l / BigInt(denominator(x))));
    g = boost::multiprecision::gcd(g, out.back());
  }
  if (g > 1)
    for (auto& x : out) x /= g;
  return out;
}

/// Reduced row echelon form in place; returns the pivot columns.
inline std::vector<std::size_t> rref(RatMatrix& m) {
  std::vector<std::size_t> pivots;
  if (m.empty()) return pivots;
  const std::size_t rows = m.size(), cols = m[0].size();
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t p = r;
    while (p < rows && m[p][c] == 0) ++p;
    if (p == rows) continue;
    std::swap(m[p], m[r]);
    const Rational inv = 1 / m[r][c];
    for (auto& x : m[r]) x *= inv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || m[i][c] == 0) continue;
      const Rational f = m[i][c];
      for (std::size_t j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

/// Basis of {y : m y = 0}; one vector per free column, free entry set to 1.
inline std::vector<RatVec> nullspace(RatMatrix m, std::size_t cols) {
  if (m.empty()) {
    std::vector<RatVec> basis;
    for (std::size_t j = 0; j < cols; ++j) {
      RatVec e(cols, Rational(0));
      e[j] = 1;
      basis.push_back(std::move(e));
    }
    return basis;
  }
  const auto pivots = rref(m);
  std::vector<bool> is_pivot(cols, false);
  for (auto p : pivots) is_pivot[p] = true;
  std::vector<RatVec> basis;
  for (std::size_t free = 0; free < cols; ++free) {
    if (is_pivot[free]) continue;
    RatVec y(cols, Rational(0));
    y[free] = 1;
    for (std::size_t k = 0; k < pivots.size(); ++k) y[pivots[k]] = -m[k][free];
    basis.push_back(std::move(y));
  }
  return basis;
}

inline std::size_t rank_of(RatMatrix m) { return rref(m).size(); }

inline std::size_t rank_of_int(const std::vector<IntVec>& rows) {
  RatMatrix m;
  m.reserve(rows.size());
  for (const auto& r : rows) m.push_back(to_rational(r));
  return rank_of(std::move(m));
}

inline RatMatrix transpose(const RatMatrix& m) {
  if (m.empty()) return {};
  RatMatrix t(m[0].size(), RatVec(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) t[j][i] = m[i][j];
  return t;
}

inline RatMatrix multiply(const RatMatrix& a, const RatMatrix& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  RatMatrix out(n, RatVec(m, Rational(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      if (a[i][l] == 0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][l] * b[l][j];
    }
  return out;
}

}  // namespace qdioph
