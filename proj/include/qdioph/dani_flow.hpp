#pragma once

// The diagonal flow g_t^x = u_x^{-1} a_t u_x attached to a point x of X, and
// the Dani correspondence bound
//   ||g_t^x v|| <= C max(e^{-t} H(v), H(v) dist(x,v), e^t H(v) dist(x,v)^2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qdioph/errors.hpp"
#include "qdioph/exact.hpp"
#include "qdioph/projective.hpp"
#include "qdioph/quadratic_form.hpp"
#include "qdioph/rational_points.hpp"

namespace qdioph {

/// c0 bounds the residual form, c1 bounds Q, c_big = 3 c0 is the Dani constant
/// and c_small = 1 / (c_big sqrt(5 c1)) is the simplex-lemma height constant.
struct DaniConstants {
  double c0 = 0;
  double c1 = 0;
  double c_big = 0;
  double c_small = 0;
};

/// Largest |eigenvalue| of a symmetric matrix; 0 for an empty one.
inline double operator_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

inline DaniConstants make_constants(double residual_norm, double gram_norm) {
  DaniConstants c;
  c.c0 = std::max(2.0, residual_norm);
  c.c1 = gram_norm;
  c.c_big = 3 * c.c0;
  c.c_small = 1.0 / (c.c_big * std::sqrt(5 * c.c1));
  return c;
}

}  // namespace detail

/// Constants of a form already in hyperbolic normal form.
inline DaniConstants constants(const QuadraticForm& form) {
  if (!is_good_form(form)) throw Error(ErrorKind::NotGoodForm, "form is not 2 x_1 x_{n+1} + Q~");
  const std::size_t r = form.size() - 2;
  Eigen::MatrixXd residual(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) residual(i, j) = static_cast<double>(form(i + 1, j + 1));
  return detail::make_constants(operator_norm(residual), operator_norm(to_eigen(form)));
}

/// Constants read off a hyperbolic basis of an arbitrary form: c0 from the
/// residual block, c1 from the original Gram matrix.
inline DaniConstants constants(const QuadraticForm& form, const HyperbolicBasis& basis) {
  const std::size_t r = basis.residual.size();
  Eigen::MatrixXd residual(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) residual(i, j) = to_double(basis.residual[i][j]);
  return detail::make_constants(operator_norm(residual), operator_norm(to_eigen(form)));
}

/// Lowest-height rational point of X outside ker Q, searching heights up to h_cap.
inline std::optional<RationalProjectivePoint> find_base_point(const QuadraticForm& form, Int h_cap = 64) {
  for (Int h = 1; h <= h_cap; h *= 2) {
    for (const auto& p : enumerate_bruteforce(form, h, h / 2, 1))
      if (!in_kernel(form, p.coords())) return p;
  }
  return std::nullopt;
}

/// constants(form) for a form in normal form; otherwise the constants of the
/// hyperbolic basis through the lowest-height non-kernel rational point.
inline DaniConstants working_constants(const QuadraticForm& form) {
  if (is_good_form(form)) return constants(form);
  const auto base = find_base_point(form);
  if (!base) throw Error(ErrorKind::NoRationalPoints, "no rational point outside ker Q found for normalization");
  return constants(form, hyperbolic_normalize(form, base->coords()));
}

enum class FlowMode { ExactOrthogonal, Conjugated };

inline const char* to_string(FlowMode m) { return m == FlowMode::ExactOrthogonal ? "exact-orthogonal" : "conjugated"; }

/// Everything needed to apply g_t^x. In exact-orthogonal mode n is the
/// identity and u is orthogonal with u A u^T = J for a normal-form J with
/// spectrum {+1,-1}; in conjugated mode n rescales A to a signature matrix S
/// (n^T S n = A) and u acts on n-coordinates.
struct FlowContext {
  QuadraticForm form;
  RealProjectivePoint x;
  FlowMode mode = FlowMode::ExactOrthogonal;
  Eigen::MatrixXd u;
  Eigen::MatrixXd n, n_inv;
  Eigen::MatrixXd reference;  // J

  Eigen::VectorXd apply(double t, const Eigen::VectorXd& v) const {
    Eigen::VectorXd y = u * (n * v);
    y[0] *= std::exp(-t);
    y[y.size() - 1] *= std::exp(t);
    return n_inv * (u.transpose() * y);
  }

  Eigen::MatrixXd flow(double t) const {
    const auto m = static_cast<Eigen::Index>(form.size());
    Eigen::VectorXd a = Eigen::VectorXd::Ones(m);
    a[0] = std::exp(-t);
    a[m - 1] = std::exp(t);
    return n_inv * u.transpose() * a.asDiagonal() * u * n;
  }
};

namespace detail {

inline bool unit_spectrum(const Eigen::VectorXd& values) {
  for (double l : values)
    if (std::abs(std::abs(l) - 1) > 1e-12) return false;
  return true;
}

// Normal-form matrix with spectrum {+1,-1}: hyperbolic pair on (1, m), then
// pos-1 entries +1 and neg-1 entries -1 on the diagonal.
inline Eigen::MatrixXd reference_form(std::size_t pos, std::size_t neg) {
  const auto m = static_cast<Eigen::Index>(pos + neg);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(m, m);
  j(0, m - 1) = j(m - 1, 0) = 1;
  Eigen::Index k = 1;
  for (std::size_t i = 1; i < pos; ++i, ++k) j(k, k) = 1;
  for (std::size_t i = 1; i < neg; ++i, ++k) j(k, k) = -1;
  return j;
}

// Orthonormal basis of the image of the projector p whose first vector is
// p*first normalized; the rest by Gram-Schmidt with pivoting over p*e_i.
inline std::vector<Eigen::VectorXd> eigenspace_basis(const Eigen::MatrixXd& p, const Eigen::VectorXd& first,
                                                     std::size_t dim) {
  std::vector<Eigen::VectorXd> out;
  out.push_back((p * first).normalized());
  std::vector<Eigen::VectorXd> cand;
  for (Eigen::Index i = 0; i < p.cols(); ++i) cand.push_back(p.col(i));
  while (out.size() < dim) {
    for (auto& c : cand)
      for (const auto& q : out) c -= q.dot(c) * q;
    std::size_t best = 0;
    for (std::size_t i = 1; i < cand.size(); ++i)
      if (cand[i].squaredNorm() > cand[best].squaredNorm()) best = i;
    if (cand[best].norm() < 1e-9) throw Error(ErrorKind::InvalidArgument, "eigenspace completion failed");
    out.push_back(cand[best].normalized());
  }
  return out;
}

// Orthogonal u with u S u^T = J and u y = e_1, for S and J with spectrum
// {+1,-1} of equal signature and y a unit isotropic vector of S.
inline Eigen::MatrixXd matching_isometry(const Eigen::MatrixXd& s, const Eigen::MatrixXd& j, const Eigen::VectorXd& y,
                                         std::size_t pos, std::size_t neg) {
  const auto m = s.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
  const Eigen::VectorXd e1 = id.col(0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(m, m);
  for (int sign : {1, -1}) {
    const std::size_t dim = sign > 0 ? pos : neg;
    const auto from = eigenspace_basis((id + sign * s) / 2, y, dim);
    const auto to = eigenspace_basis((id + sign * j) / 2, e1, dim);
    for (std::size_t k = 0; k < dim; ++k) u += to[k] * from[k].transpose();
  }
  return u;
}

}  // namespace detail

/// Builds u_x (and the normalizing map in conjugated mode) for x on X.
inline FlowContext build_context(const QuadraticForm& form, const RealProjectivePoint& x) {
  if (x.size() != form.size()) throw Error(ErrorKind::DimensionMismatch, "build_context: size mismatch");
  const Eigen::MatrixXd a = to_eigen(form);
  const Eigen::Map<const Eigen::VectorXd> xv(x.coords().data(), static_cast<Eigen::Index>(x.size()));
  const double scale = std::max(1.0, operator_norm(a));
  if ((a * xv).norm() <= 1e-9 * scale) throw Error(ErrorKind::KernelPoint, "x lies in ker Q");
  if (std::abs(xv.dot(a * xv)) > 1e-9 * scale) throw Error(ErrorKind::NotIsotropic, "x is not on X");

  const auto frame = SpectralFrame::of(a);
  const std::size_t pos = frame.positive.size(), neg = frame.negative.size();
  if (pos + neg != form.size()) throw Error(ErrorKind::SingularForm, "the flow needs a nonsingular form");

  FlowContext ctx{form, x, FlowMode::ExactOrthogonal, {}, {}, {}, {}};
  const auto m = static_cast<Eigen::Index>(form.size());
  Eigen::MatrixXd s = a;
  Eigen::VectorXd y = xv;
  if (detail::unit_spectrum(frame.values)) {
    ctx.n = ctx.n_inv = Eigen::MatrixXd::Identity(m, m);
  } else {
    ctx.mode = FlowMode::Conjugated;
    const Eigen::VectorXd root = frame.values.cwiseAbs().cwiseSqrt();
    ctx.n = root.asDiagonal() * frame.vectors.transpose();
    ctx.n_inv = frame.vectors * root.cwiseInverse().asDiagonal();
    s = frame.values.cwiseSign().asDiagonal();
    y = (ctx.n * xv).normalized();
  }
  ctx.reference = is_good_form(form) && ctx.mode == FlowMode::ExactOrthogonal ? a : detail::reference_form(pos, neg);
  ctx.u = detail::matching_isometry(s, ctx.reference, y, pos, neg);
  return ctx;
}

/// ||g_t^x v|| for the primitive integer representative of v.
inline double flow_norm(const FlowContext& ctx, const RationalProjectivePoint& v, double t) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) w[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i]);
  return ctx.apply(t, w).norm();
}

struct DaniReport {
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
};

inline DaniReport verify_dani(const FlowContext& ctx, const DaniConstants& consts, const RationalProjectivePoint& v,
                              double t) {
  const double h = static_cast<double>(v.height());
  const double d = dist(ctx.x, v.coords());
  DaniReport r;
  r.lhs = flow_norm(ctx, v, t);
  r.rhs = consts.c_big * std::max({std::exp(-t) * h, h * d, std::exp(t) * h * d * d});
  r.ratio = r.lhs / r.rhs;
  return r;
}

/// Random rational point of height <= h_max on the line pencil through base.
inline RationalProjectivePoint random_rational_point(const QuadraticForm& form, const RationalProjectivePoint& base,
                                                     Int h_max, Rng& rng) {
  const double top = std::log(std::max(2.0, 2 * std::sqrt(static_cast<double>(h_max))));
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const auto s = static_cast<Int>(std::exp(rng.uniform(0, top)));
    IntVec w(form.size());
    for (auto& c : w) c = rng.integer(-s, s);
    const auto p = second_intersection(form, base.coords(), w);
    if (p && p->height() <= h_max) return *p;
  }
  return base;
}

struct DaniSweepRow {
  double t = 0;
  Int h = 0;
  double dist = 0;
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
  FlowMode mode = FlowMode::ExactOrthogonal;
  bool dual = false;  // dist <= e^{-t} and H <= c_small e^t
};

struct DaniSweepSummary {
  std::size_t samples = 0;
  std::size_t violations = 0;  // ratio > 1 + 1e-9
  std::size_t dual_rows = 0;
  std::size_t dual_violations = 0;  // lhs > c_big c_small on a dual row
  double max_ratio = 0;
  double c_emp = 0;  // smallest C that would make every row hold
  double max_dual_norm = 0;
};

struct DaniSweep {
  std::vector<DaniSweepRow> rows;
  DaniSweepSummary summary;
};

/// Random (x, v, t) triples: a third with x uniform on X and t on the 49-point
/// grid {0, 0.25, ..., 12}, a third with x at log-uniform distance from v, a
/// third in the simplex-lemma regime e^t = rho^{-1}, H(v) <= c_small rho^{-1}.
inline DaniSweep dani_sweep(const QuadraticForm& form, const DaniConstants& consts, Int h_max, std::size_t samples,
                            std::uint64_t seed) {
  const auto base = find_base_point(form);
  if (!base) throw Error(ErrorKind::NoRationalPoints, "dani sweep needs a rational point on X");
  const Eigen::MatrixXd a = to_eigen(form);
  DaniSweep out;
  out.rows.reserve(samples);
  auto& sum = out.summary;
  for (std::size_t i = 0; i < samples; ++i) {
    Rng rng(seed, i);
    const auto v = random_rational_point(form, *base, h_max, rng);
    const double h = static_cast<double>(v.height());
    Eigen::VectorXd vv(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) vv[static_cast<Eigen::Index>(k)] = static_cast<double>(v[k]);
    vv.normalize();

    double t = 0.25 * static_cast<double>(rng.integer(0, 48));
    double delta = -1;
    if (i % 3 == 1) {
      delta = std::pow(10.0, rng.uniform(-9, 0));
    } else if (i % 3 == 2) {
      t = std::log(h / consts.c_small) + rng.uniform(0, 2);
      delta = std::exp(-t) * rng.uniform(0.05, 0.9);
    }
    std::optional<RealProjectivePoint> x;
    if (delta > 0) {
      const auto z = rng.unit_vector(v.size());
      x = retract_to_quadric(a, vv + delta * Eigen::Map<const Eigen::VectorXd>(z.data(), vv.size()));
    }
    if (!x) x = sample_point(form, rng);

    const auto ctx = build_context(form, *x);
    const auto rep = verify_dani(ctx, consts, v, t);
    DaniSweepRow row{t, v.height(), dist(*x, v.coords()), rep.lhs, rep.rhs, rep.ratio, ctx.mode, false};
    row.dual = row.dist <= std::exp(-t) && h <= consts.c_small * std::exp(t);
    ++sum.samples;
    if (row.ratio > 1 + 1e-9) ++sum.violations;
    sum.max_ratio = std::max(sum.max_ratio, row.ratio);
    if (row.dual) {
      ++sum.dual_rows;
      sum.max_dual_norm = std::max(sum.max_dual_norm, row.lhs);
      if (row.lhs > consts.c_big * consts.c_small * (1 + 1e-9)) ++sum.dual_violations;
    }
    out.rows.push_back(row);
  }
  sum.c_emp = sum.max_ratio * consts.c_big;
  return out;
}

}  // namespace qdioph
