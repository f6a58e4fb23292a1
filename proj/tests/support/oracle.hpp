#pragma once

// Reference implementations used only by tests. Nothing here shares code with
// the library's incremental paths: set functions are evaluated straight from
// their formulas, determinants by pivoted Gaussian elimination, eigenvalues
// by cyclic Jacobi rotations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

enum class Fn { FL, GC, LogDet };

inline double facility_location(const Matrix& s, const std::vector<std::size_t>& x) {
  if (x.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j : x) best = std::max(best, s[i][j]);
    total += best;
  }
  return total;
}

inline double graph_cut(const Matrix& s, const std::vector<std::size_t>& x, double lambda) {
  double cover = 0.0, within = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j : x) cover += s[i][j];
  for (std::size_t i : x)
    for (std::size_t j : x) within += s[i][j];
  return cover - lambda * within;
}

/// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(Matrix a) {
  const std::size_t n = a.size();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
    if (a[p][c] == 0.0) return 0.0;
    if (p != c) {
      std::swap(a[p], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return det;
}

inline Matrix submatrix(const Matrix& s, const std::vector<std::size_t>& x, double eps) {
  Matrix m(x.size(), std::vector<double>(x.size()));
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = 0; b < x.size(); ++b) m[a][b] = s[x[a]][x[b]] + (a == b ? eps : 0.0);
  return m;
}

/// log det(S_X + eps I); nullopt unless the determinant is clearly positive.
inline std::optional<double> log_det(const Matrix& s, const std::vector<std::size_t>& x,
                                     double eps, double min_det = 1e-6) {
  if (x.empty()) return 0.0;
  const double d = determinant(submatrix(s, x, eps));
  if (!(d > min_det)) return std::nullopt;
  return std::log(d);
}

inline std::optional<double> eval(Fn f, const Matrix& s, const std::vector<std::size_t>& x,
                                  double lambda, double eps) {
  switch (f) {
    case Fn::FL: return facility_location(s, x);
    case Fn::GC: return graph_cut(s, x, lambda);
    case Fn::LogDet: return log_det(s, x, eps);
  }
  return std::nullopt;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Symmetric, unit diagonal, off-diagonal entries uniform in [0, 1].
inline Matrix random_unit_kernel(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix s(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s[i][j] = s[j][i] = u(rng);
  return s;
}

/// Gram matrix of random non-negative unit vectors: PSD, unit diagonal,
/// entries in [0, 1].
inline Matrix random_gram_kernel(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix v(n, std::vector<double>(dim));
  for (auto& row : v) {
    double norm = 0.0;
    for (double& x : row) {
      x = u(rng) * u(rng) * u(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : row) x /= norm;
  }
  Matrix s(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d += v[i][k] * v[j][k];
      s[i][j] = i == j ? 1.0 : std::min(1.0, d);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s[j][i] = s[i][j];
  return s;
}

inline std::vector<std::size_t> random_subset(std::size_t n, std::mt19937_64& rng,
                                              std::size_t max_size) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  std::uniform_int_distribution<std::size_t> len(0, std::min(max_size, n));
  all.resize(len(rng));
  return all;
}

/// Greedy by from-scratch evaluation: argmax of f(X + v) - f(X), smallest
/// index on ties within `tie_tol`.
inline std::pair<std::vector<std::size_t>, std::vector<double>> greedy(
    Fn f, const Matrix& s, std::size_t budget, double lambda, double eps) {
  std::vector<std::size_t> x;
  std::vector<double> gains;
  std::vector<bool> used(s.size(), false);
  for (std::size_t step = 0; step < std::min(budget, s.size()); ++step) {
    const double base = *eval(f, s, x, lambda, eps);
    std::size_t best = s.size();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < s.size(); ++v) {
      if (used[v]) continue;
      auto y = x;
      y.push_back(v);
      const auto val = eval(f, s, y, lambda, eps);
      const double g = val ? *val - base : -std::numeric_limits<double>::infinity();
      if (best == s.size() || g > best_gain + 1e-12) {
        best = v;
        best_gain = g;
      }
    }
    used[best] = true;
    x.push_back(best);
    gains.push_back(best_gain);
  }
  return {x, gains};
}

/// Cosine similarity straight from the definition.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Largest-remainder apportionment in exact rational arithmetic for integer
/// weights (numerators over a common denominator).
inline std::vector<std::uint64_t> apportion_rational(const std::vector<std::uint64_t>& w,
                                                     std::uint64_t total) {
  std::uint64_t sum = 0;
  for (auto x : w) sum += x;
  std::vector<std::uint64_t> out(w.size());
  std::vector<std::uint64_t> rem(w.size());
  std::uint64_t given = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const unsigned __int128 num = static_cast<unsigned __int128>(w[i]) * total;
    out[i] = static_cast<std::uint64_t>(num / sum);
    rem[i] = static_cast<std::uint64_t>(num % sum);
    given += out[i];
  }
  std::vector<std::size_t> order(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; given < total; ++k, ++given) ++out[order[k]];
  return out;
}

}  // namespace oracle
