#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "submix/embeddings_io.hpp"
#include "submix/error.hpp"

namespace submix {

enum class KernelTransform { Clamp, AffineRescale, Identity };

inline std::string_view to_string(KernelTransform t) {
  switch (t) {
    case KernelTransform::Clamp: return "clamp";
    case KernelTransform::AffineRescale: return "affine";
    case KernelTransform::Identity: return "identity";
  }
  return "clamp";
}

inline KernelTransform parse_kernel_transform(std::string_view name) {
  if (name == "clamp") return KernelTransform::Clamp;
  if (name == "affine") return KernelTransform::AffineRescale;
  if (name == "identity") return KernelTransform::Identity;
  throw Error(ErrorKind::InvalidArgument, "unknown kernel transform '" + std::string(name) + "'");
}

struct KernelConfig {
  KernelTransform transform = KernelTransform::Clamp;
};

inline double apply_transform(KernelTransform t, double c) {
  switch (t) {
    case KernelTransform::Clamp: return std::max(0.0, c);
    case KernelTransform::AffineRescale: return 0.5 * (1.0 + c);
    case KernelTransform::Identity: return c;
  }
  return c;
}

/// Dense symmetric similarity matrix over a ground set {0..n-1}.
class SimilarityKernel {
 public:
  SimilarityKernel() = default;

  /// Takes a full row-major n*n matrix; symmetry is the caller's contract.
  SimilarityKernel(std::size_t n, std::vector<double> values,
                   KernelTransform transform = KernelTransform::Identity)
      : n_(n), values_(std::move(values)), transform_(transform) {
    if (values_.size() != n_ * n_) {
      throw Error(ErrorKind::InvalidArgument, "kernel needs n*n values");
    }
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * n_, n_}; }
  KernelTransform transform() const noexcept { return transform_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Same kernel with every entry multiplied by `factor`.
  SimilarityKernel scaled(double factor) const {
    std::vector<double> v = values_;
    for (double& x : v) x *= factor;
    return {n_, std::move(v), transform_};
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
  KernelTransform transform_ = KernelTransform::Identity;
};

/// Row mean accumulated in double.
inline std::vector<double> mean_embedding(const EmbeddingMatrix& m) {
  if (m.n_rows() == 0) throw Error(ErrorKind::EmptyTask, "cannot average zero rows");
  std::vector<double> mean(m.dim(), 0.0);
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.dim(); ++c) mean[c] += static_cast<double>(row[c]);
  }
  const double inv = static_cast<double>(m.n_rows());
  for (double& x : mean) x /= inv;
  return mean;
}

namespace detail {

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return s;
}

}  // namespace detail

template <typename A, typename B>
double cosine(std::span<const A> u, std::span<const B> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::InvalidArgument, "cosine of vectors with different dims");
  }
  const double nu = std::sqrt(detail::dot(u, u));
  const double nv = std::sqrt(detail::dot(v, v));
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::ZeroNormVector, "cosine of a zero vector");
  return std::clamp(detail::dot(u, v) / (nu * nv), -1.0, 1.0);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine(std::span<const double>(u), std::span<const double>(v));
}

/// Cosine kernel over arbitrary rows. `row(i)` must return a span of `dim`
/// values. Only the upper triangle is computed and mirrored, so the result is
/// exactly symmetric; the diagonal is transform(1).
template <typename RowFn>
SimilarityKernel build_kernel_rows(std::size_t n, RowFn&& row, const KernelConfig& config) {
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = row(i);
    norms[i] = std::sqrt(detail::dot(r, r));
    if (!(norms[i] > 0.0)) {
      throw Error(ErrorKind::ZeroNormVector, "row " + std::to_string(i) + " has zero norm");
    }
  }
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = row(i);
    values[i * n + i] = apply_transform(config.transform, 1.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = std::clamp(detail::dot(ri, row(j)) / (norms[i] * norms[j]), -1.0, 1.0);
      const double s = apply_transform(config.transform, c);
      values[i * n + j] = s;
      values[j * n + i] = s;
    }
  }
  return {n, std::move(values), config.transform};
}

inline SimilarityKernel build_kernel(const EmbeddingMatrix& m, const KernelConfig& config = {}) {
  return build_kernel_rows(m.n_rows(), [&](std::size_t i) { return m.row(i); }, config);
}

/// Kernel over a subset of rows; ground-set index k refers to `rows[k]`.
inline SimilarityKernel build_kernel(const EmbeddingMatrix& m, std::span<const std::size_t> rows,
                                     const KernelConfig& config = {}) {
  return build_kernel_rows(rows.size(), [&](std::size_t k) { return m.row(rows[k]); }, config);
}

inline SimilarityKernel build_kernel(std::span<const std::vector<double>> vectors,
                                     const KernelConfig& config = {}) {
  if (!vectors.empty()) {
    for (const auto& v : vectors) {
      if (v.size() != vectors.front().size()) {
        throw Error(ErrorKind::InvalidArgument, "vectors have different dims");
      }
    }
  }
  return build_kernel_rows(
      vectors.size(), [&](std::size_t i) { return std::span<const double>(vectors[i]); }, config);
}

}  // namespace submix
