#pragma once

// Independent reference computations used only by the tests. None of these
// share code paths with the library routines they check.

#include <cmath>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "qdioph/exact.hpp"
#include "qdioph/quadratic_form.hpp"

namespace qdioph::oracle {

/// Full (2h+1)^{n+1} box scan without pruning.
inline std::set<IntVec> raw_box_scan(const QuadraticForm& form, Int h) {
  const std::size_t m = form.size();
  std::set<IntVec> out;
  IntVec v(m, -h);
  while (true) {
    Int q = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) q += v[i] * form(i, j) * v[j];
    Int g = 0;
    for (Int x : v) g = std::gcd(g, x);
    if (q == 0 && g == 1) {
      Int last = 0;
      for (auto it = v.rbegin(); it != v.rend(); ++it)
        if (*it != 0) {
          last = *it;
          break;
        }
      if (last > 0) out.insert(v);
    }
    std::size_t k = 0;
    while (k < m && v[k] == h) v[k++] = -h;
    if (k == m) break;
    ++v[k];
  }
  return out;
}

/// Sign counts of the floating-point spectrum.
inline std::array<int, 3> numeric_signature(const QuadraticForm& form) {
  Eigen::MatrixXd a(form.size(), form.size());
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) a(i, j) = static_cast<double>(form(i, j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  std::array<int, 3> s{0, 0, 0};
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()[i];
    if (l > 1e-9) ++s[0];
    else if (l < -1e-9) ++s[1];
    else ++s[2];
  }
  return s;
}

/// Exact Q(v) for rational v by direct double sum.
inline Rational q_rational(const QuadraticForm& form, const RatVec& v) {
  Rational acc = 0;
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) acc += v[i] * Rational(form(i, j)) * v[j];
  return acc;
}

inline Rational b_rational(const QuadraticForm& form, const RatVec& v, const RatVec& w) {
  Rational acc = 0;
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) acc += v[i] * Rational(form(i, j)) * w[j];
  return acc;
}

/// Chordal distance of unit-circle points p/q in affine coordinates, squared,
/// as an exact rational: ||p1/q1 - p2/q2||^2 = 2 - 2 <p1,p2>/(q1 q2).
inline Rational affine_sphere_gap_sq(const IntVec& v1, const IntVec& v2) {
  const std::size_t n = v1.size() - 1;
  BigInt dot = 0;
  for (std::size_t i = 0; i < n; ++i) dot += BigInt(v1[i]) * v2[i];
  const BigInt qq = BigInt(v1[n]) * v2[n];
  return Rational(2) - Rational(2 * dot) / Rational(qq);
}

}  // namespace qdioph::oracle
