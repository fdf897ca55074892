#pragma once

// Real projective geometry on P^n: the sine-of-angle metric, distance to
// subspaces, and samplers on X and on planar slices of X.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qdioph/errors.hpp"
#include "qdioph/exact.hpp"
#include "qdioph/quadratic_form.hpp"

namespace qdioph {

inline constexpr double kUnitTol = 1e-12;
inline constexpr double kFeasibilityTol = 1e-9;

/// Unit vector with the last coordinate of magnitude above 1e-12 positive.
class RealProjectivePoint {
 public:
  RealProjectivePoint() = default;

  explicit RealProjectivePoint(std::vector<double> v) : coords_(std::move(v)) {
    double n2 = 0;
    for (double x : coords_) n2 += x * x;
    if (!(n2 > 0)) throw Error(ErrorKind::ZeroVector, "real projective point from zero vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : coords_) x *= inv;
    for (auto it = coords_.rbegin(); it != coords_.rend(); ++it) {
      if (std::abs(*it) <= kUnitTol) continue;
      if (*it < 0)
        for (double& x : coords_) x = -x;
      break;
    }
  }

  static RealProjectivePoint from_int(std::span<const Int> v) {
    return RealProjectivePoint(std::vector<double>(v.begin(), v.end()));
  }

  const std::vector<double>& coords() const { return coords_; }
  std::size_t size() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }

  bool operator==(const RealProjectivePoint&) const = default;

 private:
  std::vector<double> coords_;
};

/// ||x ^ y|| / (||x|| ||y||), summed over coordinate planes so that small
/// distances keep full relative precision.
template <class T, class U>
T wedge_dist(std::span<const T> x, std::span<const U> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "dist: size mismatch");
  T wedge = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T yi = static_cast<T>(y[i]);
    nx += x[i] * x[i];
    ny += yi * yi;
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const T t = x[i] * static_cast<T>(y[j]) - x[j] * yi;
      wedge += t * t;
    }
  }
  using std::sqrt;
  T d = sqrt(wedge / (nx * ny));
  return d > 1 ? T(1) : d;
}

inline double dist(const RealProjectivePoint& x, const RealProjectivePoint& y) {
  return wedge_dist<double, double>(x.coords(), y.coords());
}

inline double dist(const RealProjectivePoint& x, std::span<const Int> v) {
  return wedge_dist<double, Int>(x.coords(), v);
}

/// Orthonormal basis of span(rows) by modified Gram-Schmidt with column
/// pivoting (largest remaining norm first); near-dependent rows are dropped.
template <class T>
std::vector<std::vector<T>> orthonormalize(std::vector<std::vector<T>> rows, T drop_tol = T(1e-12)) {
  using std::sqrt;
  std::vector<std::vector<T>> out;
  std::vector<T> scale(rows.size(), T(0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    T s = 0;
    for (const auto& x : rows[i]) s += x * x;
    scale[i] = sqrt(s);
  }
  std::vector<bool> used(rows.size(), false);
  for (std::size_t step = 0; step < rows.size(); ++step) {
    std::size_t best = rows.size();
    T best_norm = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (used[i]) continue;
      T s = 0;
      for (const auto& x : rows[i]) s += x * x;
      if (best == rows.size() || s > best_norm) {
        best = i;
        best_norm = s;
      }
    }
    if (best == rows.size()) break;
    used[best] = true;
    const T norm = sqrt(best_norm);
    if (!(norm > drop_tol * (scale[best] > 0 ? scale[best] : T(1)))) continue;
    std::vector<T> q = rows[best];
    for (auto& x : q) x /= norm;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (used[i]) continue;
      T dot = 0;
      for (std::size_t k = 0; k < q.size(); ++k) dot += q[k] * rows[i][k];
      for (std::size_t k = 0; k < q.size(); ++k) rows[i][k] -= dot * q[k];
    }
    out.push_back(std::move(q));
  }
  return out;
}

/// sin of the angle between x and the span of an orthonormal set, computed as
/// the norm of the orthogonal residual.
template <class T>
T dist_to_orthonormal(std::span<const T> x, const std::vector<std::vector<T>>& onb) {
  using std::sqrt;
  std::vector<T> r(x.begin(), x.end());
  T nx = 0;
  for (const auto& v : r) nx += v * v;
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : onb) {
      T dot = 0;
      for (std::size_t k = 0; k < r.size(); ++k) dot += q[k] * r[k];
      for (std::size_t k = 0; k < r.size(); ++k) r[k] -= dot * q[k];
    }
  T rr = 0;
  for (const auto& v : r) rr += v * v;
  T d = sqrt(rr / nx);
  return d > 1 ? T(1) : d;
}

/// Distance from x to the projectivized real span of integer basis vectors.
inline double dist_to_subspace(const RealProjectivePoint& x, const std::vector<IntVec>& basis) {
  std::vector<std::vector<double>> rows;
  for (const auto& b : basis) rows.emplace_back(b.begin(), b.end());
  const auto onb = orthonormalize(std::move(rows));
  return dist_to_orthonormal<double>(x.coords(), onb);
}

/// Seeded random source; streams derived from (seed, stream) are independent
/// sequences, so concurrent samplers only need distinct keys.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x51ed2701u};
    engine_.seed(seq);
  }

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  std::uint64_t bits() { return engine_(); }

  /// Uniform point on the unit sphere of R^k.
  std::vector<double> unit_vector(std::size_t k) {
    std::vector<double> v(k);
    double n2 = 0;
    do {
      n2 = 0;
      for (auto& x : v) {
        x = normal();
        n2 += x * x;
      }
    } while (n2 < 1e-24);
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& x : v) x *= inv;
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

/// Real diagonalization A = V diag(lambda) V^T used by the samplers.
struct SpectralFrame {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  std::vector<int> positive, negative;

  static SpectralFrame of(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    SpectralFrame f;
    f.vectors = es.eigenvectors();
    f.values = es.eigenvalues();
    const double scale = std::max(1.0, f.values.cwiseAbs().maxCoeff());
    for (int i = 0; i < f.values.size(); ++i) {
      if (f.values[i] > 1e-12 * scale) f.positive.push_back(i);
      if (f.values[i] < -1e-12 * scale) f.negative.push_back(i);
    }
    return f;
  }
};

inline Eigen::MatrixXd to_eigen(const QuadraticForm& form) {
  Eigen::MatrixXd a(form.size(), form.size());
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) a(i, j) = static_cast<double>(form(i, j));
  return a;
}

inline double evaluate_real(const QuadraticForm& form, std::span<const double> x) {
  double acc = 0;
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) acc += x[i] * static_cast<double>(form(i, j)) * x[j];
  return acc;
}

/// Moves y onto X along the normal direction A y: solves Q(y + mu A y) = 0 for
/// the root of smallest |mu|. Returns nullopt when there is no real root.
inline std::optional<RealProjectivePoint> retract_to_quadric(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
  const Eigen::VectorXd ay = a * y;
  const double qa = ay.dot(a * ay), qb = 2 * ay.squaredNorm(), qc = y.dot(ay);
  double mu = 0;
  if (qc != 0) {
    if (std::abs(qa) < 1e-300) {
      if (qb == 0) return std::nullopt;
      mu = -qc / qb;
    } else {
      const double disc = qb * qb - 4 * qa * qc;
      if (disc < 0) return std::nullopt;
      // Stable form of the smaller root.
      const double s = qb + std::copysign(std::sqrt(disc), qb);
      mu = -2 * qc / s;
    }
  }
  const Eigen::VectorXd z = y + mu * ay;
  if (!(z.squaredNorm() > 0)) return std::nullopt;
  return RealProjectivePoint(std::vector<double>(z.data(), z.data() + z.size()));
}

namespace detail {

// Preimage of (u, w) on the unit spheres of the scaled E+ and E- coordinates.
inline std::vector<double> lift_scaled(const SpectralFrame& f, const std::vector<double>& u,
                                       const std::vector<double>& w) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(f.values.size());
  for (std::size_t k = 0; k < f.positive.size(); ++k)
    z[f.positive[k]] = u[k] / std::sqrt(f.values[f.positive[k]]);
  for (std::size_t k = 0; k < f.negative.size(); ++k)
    z[f.negative[k]] = w[k] / std::sqrt(-f.values[f.negative[k]]);
  const Eigen::VectorXd x = f.vectors * z;
  return std::vector<double>(x.data(), x.data() + x.size());
}

}  // namespace detail

/// Sample on X: u uniform on the unit sphere of E+, w uniform on that of E-,
/// in eigen-scaled coordinates, mapped back and normalized.
inline RealProjectivePoint sample_point(const QuadraticForm& form, Rng& rng) {
  const auto frame = SpectralFrame::of(to_eigen(form));
  if (frame.positive.empty() || frame.negative.empty())
    throw Error(ErrorKind::DefiniteForm, "form has no real isotropic vectors");
  if (frame.positive.size() + frame.negative.size() != form.size())
    throw Error(ErrorKind::SingularForm, "sample_point needs a nonsingular form");
  const auto u = rng.unit_vector(frame.positive.size());
  const auto w = rng.unit_vector(frame.negative.size());
  return RealProjectivePoint(detail::lift_scaled(frame, u, w));
}

inline RealProjectivePoint sample_point(const QuadraticForm& form, std::uint64_t seed) {
  Rng rng(seed);
  return sample_point(form, rng);
}

/// A 3-dimensional real subspace S of R^{n+1}; [S] meets X in a conic.
struct SliceSpec {
  std::vector<std::vector<double>> spanning;  // three vectors of length n+1

  /// Orthonormal basis of S.
  std::vector<std::vector<double>> orthonormal() const {
    auto onb = orthonormalize(spanning);
    if (onb.size() != 3) throw Error(ErrorKind::InvalidArgument, "slice must span a 3-dimensional subspace");
    return onb;
  }

  double distance(const RealProjectivePoint& x) const {
    return dist_to_orthonormal<double>(x.coords(), orthonormal());
  }
};

/// Restricted conic of a slice: Gram of Q on an orthonormal basis of S.
struct SliceConic {
  std::vector<std::vector<double>> basis;  // orthonormal basis of S
  SpectralFrame frame;                      // of the 3x3 restricted Gram

  static SliceConic of(const QuadraticForm& form, const SliceSpec& slice) {
    SliceConic c;
    c.basis = slice.orthonormal();
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0;
        for (std::size_t a = 0; a < form.size(); ++a)
          for (std::size_t b = 0; b < form.size(); ++b)
            acc += c.basis[i][a] * static_cast<double>(form(a, b)) * c.basis[j][b];
        m(i, j) = acc;
      }
    c.frame = SpectralFrame::of(m);
    if (c.frame.positive.empty() || c.frame.negative.empty() ||
        c.frame.positive.size() + c.frame.negative.size() != 3)
      throw Error(ErrorKind::EmptyIntersection, "slice meets X in no curve");
    return c;
  }

  std::vector<double> to_ambient(const std::vector<double>& z) const {
    std::vector<double> x(basis[0].size(), 0.0);
    for (int i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < x.size(); ++k) x[k] += z[i] * basis[i][k];
    return x;
  }
};

/// Uniform in the angle of the eigen-scaled conic parametrization.
inline RealProjectivePoint sample_on_submanifold(const QuadraticForm& form, const SliceSpec& slice, Rng& rng) {
  const auto conic = SliceConic::of(form, slice);
  const auto u = rng.unit_vector(conic.frame.positive.size());
  const auto w = rng.unit_vector(conic.frame.negative.size());
  return RealProjectivePoint(conic.to_ambient(detail::lift_scaled(conic.frame, u, w)));
}

inline RealProjectivePoint sample_on_submanifold(const QuadraticForm& form, const SliceSpec& slice,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  return sample_on_submanifold(form, slice, rng);
}

}  // namespace qdioph
