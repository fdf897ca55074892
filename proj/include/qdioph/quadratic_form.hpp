#pragma once

// Exact algebra of integral quadratic forms Q(x) = x^T A x.

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdioph/errors.hpp"
#include "qdioph/exact.hpp"

namespace qdioph {

/// Symmetric integer Gram matrix A of size (n+1)x(n+1) defining a quadric in P^n.
class QuadraticForm {
 public:
  QuadraticForm() = default;

  explicit QuadraticForm(std::vector<IntVec> gram) : gram_(std::move(gram)) {
    const std::size_t m = gram_.size();
    if (m < 2) throw Error(ErrorKind::InvalidForm, "Gram matrix must be at least 2x2");
    bool nonzero = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (gram_[i].size() != m) throw Error(ErrorKind::InvalidForm, "Gram matrix is not square");
      for (std::size_t j = 0; j < m; ++j) nonzero = nonzero || gram_[i][j] != 0;
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        if (gram_[i][j] != gram_[j][i])
          throw Error(ErrorKind::InvalidForm, "Gram matrix is not symmetric at (" +
                                                  std::to_string(i) + "," + std::to_string(j) + ")");
    if (!nonzero) throw Error(ErrorKind::InvalidForm, "Gram matrix is zero");
  }

  static QuadraticForm diagonal(std::initializer_list<Int> d) { return diagonal(IntVec(d)); }

  static QuadraticForm diagonal(const IntVec& d) {
    std::vector<IntVec> g(d.size(), IntVec(d.size(), 0));
    for (std::size_t i = 0; i < d.size(); ++i) g[i][i] = d[i];
    return QuadraticForm(std::move(g));
  }

  /// Gram matrix with ones on the antidiagonal: Q = 2(x_1 x_m + x_2 x_{m-1} + ...).
  static QuadraticForm antidiagonal(std::size_t size) {
    std::vector<IntVec> g(size, IntVec(size, 0));
    for (std::size_t i = 0; i < size; ++i) g[i][size - 1 - i] = 1;
    return QuadraticForm(std::move(g));
  }

  /// Projective dimension n.
  std::size_t dim() const { return gram_.size() - 1; }
  /// Number of ambient coordinates n+1.
  std::size_t size() const { return gram_.size(); }

  Int operator()(std::size_t i, std::size_t j) const { return gram_[i][j]; }
  const std::vector<IntVec>& gram() const { return gram_; }

  bool operator==(const QuadraticForm&) const = default;

 private:
  std::vector<IntVec> gram_;
};

struct Inertia {
  std::size_t pos = 0;
  std::size_t neg = 0;
  std::size_t zero = 0;

  bool nonsingular() const { return zero == 0; }
  bool operator==(const Inertia&) const = default;
};

/// New basis (columns e, b_2..b_n, f) in which Q = 2 y_1 y_{n+1} + Q~(y_2..y_n).
struct HyperbolicBasis {
  std::vector<RatVec> columns;
  RatMatrix residual;  // Gram of Q~, size (n-1)x(n-1)

  /// T^T A T for T = [columns]; equals the block shape when valid.
  RatMatrix transformed_gram(const QuadraticForm& form) const;
};

namespace detail {

inline void check_size(const QuadraticForm& form, std::size_t got) {
  if (got != form.size())
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(form.size()) +
                                                  " coordinates, got " + std::to_string(got));
}

inline Wide bilinear_wide(const QuadraticForm& form, std::span<const Int> v, std::span<const Int> w) {
  Wide acc = 0;
  const std::size_t m = form.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (v[i] == 0) continue;
    Wide row = 0;
    for (std::size_t j = 0; j < m; ++j) row += static_cast<Wide>(form(i, j)) * w[j];
    acc += static_cast<Wide>(v[i]) * row;
  }
  return acc;
}

inline Rational bilinear_rational(const QuadraticForm& form, const RatVec& v, const RatVec& w) {
  Rational acc = 0;
  const std::size_t m = form.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (v[i] == 0) continue;
    Rational row = 0;
    for (std::size_t j = 0; j < m; ++j)
      if (form(i, j) != 0) row += Rational(form(i, j)) * w[j];
    acc += v[i] * row;
  }
  return acc;
}

inline RatVec apply_rational(const QuadraticForm& form, const RatVec& v) {
  RatVec out(form.size(), Rational(0));
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j)
      if (form(i, j) != 0) out[i] += Rational(form(i, j)) * v[j];
  return out;
}

}  // namespace detail

/// v^T A v, exact; throws Overflow if the result leaves int64.
inline Int evaluate(const QuadraticForm& form, std::span<const Int> v) {
  detail::check_size(form, v.size());
  return narrow(detail::bilinear_wide(form, v, v));
}

/// v^T A w, exact.
inline Int bilinear(const QuadraticForm& form, std::span<const Int> v, std::span<const Int> w) {
  detail::check_size(form, v.size());
  detail::check_size(form, w.size());
  return narrow(detail::bilinear_wide(form, v, w));
}

/// Signature by exact symmetric elimination over Q, using a 2x2 hyperbolic
/// pivot whenever every remaining diagonal entry vanishes.
inline Inertia inertia(const QuadraticForm& form) {
  RatMatrix m(form.size(), RatVec(form.size()));
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) m[i][j] = form(i, j);

  Inertia out;
  while (!m.empty()) {
    const std::size_t k = m.size();
    std::size_t p = k;
    for (std::size_t i = 0; i < k; ++i)
      if (m[i][i] != 0) {
        p = i;
        break;
      }
    if (p < k) {
      (m[p][p] > 0 ? out.pos : out.neg) += 1;
      RatMatrix next;
      for (std::size_t i = 0; i < k; ++i) {
        if (i == p) continue;
        RatVec row;
        for (std::size_t j = 0; j < k; ++j) {
          if (j == p) continue;
          row.push_back(m[i][j] - m[i][p] * m[p][j] / m[p][p]);
        }
        next.push_back(std::move(row));
      }
      m = std::move(next);
      continue;
    }
    std::size_t a = k, b = k;
    for (std::size_t i = 0; i < k && a == k; ++i)
      for (std::size_t j = i + 1; j < k; ++j)
        if (m[i][j] != 0) {
          a = i;
          b = j;
          break;
        }
    if (a == k) {
      out.zero += k;
      break;
    }
    // [[0,c],[c,0]] has one positive and one negative eigenvalue.
    out.pos += 1;
    out.neg += 1;
    const Rational c = m[a][b];
    RatMatrix next;
    for (std::size_t i = 0; i < k; ++i) {
      if (i == a || i == b) continue;
      RatVec row;
      for (std::size_t j = 0; j < k; ++j) {
        if (j == a || j == b) continue;
        // Schur complement with inverse block [[0,1/c],[1/c,0]].
        row.push_back(m[i][j] - (m[i][a] * m[b][j] + m[i][b] * m[a][j]) / c);
      }
      next.push_back(std::move(row));
    }
    m = std::move(next);
  }
  return out;
}

/// Exact null space basis of the Gram matrix (empty iff nonsingular).
inline std::vector<RatVec> kernel(const QuadraticForm& form) {
  RatMatrix m(form.size(), RatVec(form.size()));
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) m[i][j] = form(i, j);
  return nullspace(std::move(m), form.size());
}

inline bool in_kernel(const QuadraticForm& form, std::span<const Int> v) {
  detail::check_size(form, v.size());
  for (std::size_t i = 0; i < form.size(); ++i) {
    Wide row = 0;
    for (std::size_t j = 0; j < form.size(); ++j) row += static_cast<Wide>(form(i, j)) * v[j];
    if (row != 0) return false;
  }
  return true;
}

inline RatMatrix HyperbolicBasis::transformed_gram(const QuadraticForm& form) const {
  const std::size_t m = columns.size();
  RatMatrix out(m, RatVec(m));
  for (std::size_t i = 0; i < m; ++i) {
    const RatVec ai = detail::apply_rational(form, columns[i]);
    for (std::size_t j = 0; j < m; ++j) {
      Rational acc = 0;
      for (std::size_t k = 0; k < ai.size(); ++k) acc += ai[k] * columns[j][k];
      out[i][j] = acc;
    }
  }
  return out;
}

/// True when the transformed Gram has the exact shape
/// [[0,0,1],[0,R,0],[1,0,0]] with R the residual block.
inline bool has_hyperbolic_shape(const RatMatrix& g) {
  const std::size_t m = g.size();
  if (m < 2) return false;
  const std::size_t last = m - 1;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const bool edge = i == 0 || i == last || j == 0 || j == last;
      if (!edge) continue;
      const bool corner = (i == 0 && j == last) || (i == last && j == 0);
      if (g[i][j] != (corner ? 1 : 0)) return false;
    }
  }
  return true;
}

inline bool is_good_form(const QuadraticForm& form) {
  RatMatrix g(form.size(), RatVec(form.size()));
  for (std::size_t i = 0; i < form.size(); ++i)
    for (std::size_t j = 0; j < form.size(); ++j) g[i][j] = form(i, j);
  return has_hyperbolic_shape(g);
}

/// Rational basis (e, b_2, ..., b_n, f) with Q(f) = 0, B(e,f) = 1 and the b_i
/// B-orthogonal to both. The auxiliary vector is the first standard basis
/// vector g with B(e,g) != 0.
inline HyperbolicBasis hyperbolic_normalize(const QuadraticForm& form, std::span<const Int> e) {
  detail::check_size(form, e.size());
  if (evaluate(form, e) != 0) throw Error(ErrorKind::NotIsotropic, "Q(e) != 0");
  if (in_kernel(form, e)) throw Error(ErrorKind::PointInKernel, "e lies in ker Q");

  const RatVec er = to_rational(e);
  const RatVec ae = detail::apply_rational(form, er);
  std::size_t gi = 0;
  while (ae[gi] == 0) ++gi;

  RatVec g(form.size(), Rational(0));
  g[gi] = 1;
  const Rational beg = ae[gi];
  const Rational qg = Rational(form(gi, gi));
  RatVec f(form.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = g[k] - qg / (2 * beg) * er[k];
  const Rational bef = detail::bilinear_rational(form, er, f);
  for (auto& x : f) x /= bef;

  const RatVec af = detail::apply_rational(form, f);
  const auto middle = nullspace(RatMatrix{ae, af}, form.size());

  HyperbolicBasis out;
  out.columns.push_back(er);
  for (const auto& b : middle) out.columns.push_back(b);
  out.columns.push_back(f);
  out.residual.assign(middle.size(), RatVec(middle.size()));
  for (std::size_t i = 0; i < middle.size(); ++i)
    for (std::size_t j = 0; j < middle.size(); ++j)
      out.residual[i][j] = detail::bilinear_rational(form, middle[i], middle[j]);
  return out;
}

// JSON interchange: {"dim": n, "gram": [[...], ...]}.

inline nlohmann::json to_json(const QuadraticForm& form) {
  return nlohmann::json{{"dim", form.dim()}, {"gram", form.gram()}};
}

inline QuadraticForm form_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("gram"))
    throw Error(ErrorKind::InvalidForm, "form JSON needs a \"gram\" array");
  for (const auto& [key, value] : j.items())
    if (key != "dim" && key != "gram") throw Error(ErrorKind::InvalidForm, "unknown form key \"" + key + "\"");
  std::vector<IntVec> gram;
  if (!j.at("gram").is_array()) throw Error(ErrorKind::InvalidForm, "\"gram\" must be an array of rows");
  for (const auto& row : j.at("gram")) {
    if (!row.is_array()) throw Error(ErrorKind::InvalidForm, "\"gram\" must be an array of rows");
    for (const auto& x : row)
      if (!x.is_number_integer()) throw Error(ErrorKind::InvalidForm, "gram entries must be integers");
  }
  try {
    gram = j.at("gram").get<std::vector<IntVec>>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::InvalidForm, std::string("gram entries must be integers: ") + ex.what());
  }
  QuadraticForm form(std::move(gram));
  if (j.contains("dim") && j.at("dim").get<std::size_t>() != form.dim())
    throw Error(ErrorKind::InvalidForm, "\"dim\" does not match the Gram size");
  return form;
}

}  // namespace qdioph
