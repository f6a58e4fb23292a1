#pragma once

// Facility Location, Graph Cut and Log Determinant as incremental-state
// objects over a SimilarityKernel. Each object tracks the selected set X and a
// cache that makes gain(v | X) cheap:
//   FacilityLocation  per-element running max similarity to X      O(n) gain
//   GraphCut          kernel row sums and running sum_{j in X} s_jv O(1) gain
//   LogDeterminant    Cholesky factor of S_X + eps*I                O(|X|^2) gain
// The kernel is held by reference and must outlive the function object.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "submix/error.hpp"
#include "submix/kernel.hpp"

namespace submix {

enum class FunctionKind { FacilityLocation, GraphCut, LogDeterminant };

inline std::string_view to_string(FunctionKind k) {
  switch (k) {
    case FunctionKind::FacilityLocation: return "fl";
    case FunctionKind::GraphCut: return "gc";
    case FunctionKind::LogDeterminant: return "logdet";
  }
  return "fl";
}

inline FunctionKind parse_function_kind(std::string_view name) {
  if (name == "fl") return FunctionKind::FacilityLocation;
  if (name == "gc") return FunctionKind::GraphCut;
  if (name == "logdet") return FunctionKind::LogDeterminant;
  throw Error(ErrorKind::InvalidArgument, "unknown submodular function '" + std::string(name) + "'");
}

inline constexpr double kDefaultLambda = 0.4;
inline constexpr double kDefaultEpsilon = 1e-6;

/// Function kind plus its parameters; `lambda` is read by GraphCut only and
/// `epsilon` by LogDeterminant only.
struct FunctionSpec {
  FunctionKind kind = FunctionKind::FacilityLocation;
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
};

namespace detail {

/// Selection bookkeeping shared by all three functions.
class SelectionState {
 public:
  explicit SelectionState(std::size_t n) : in_set_(n, false) {}

  std::size_t size() const noexcept { return in_set_.size(); }
  std::span<const std::size_t> selected() const noexcept { return selected_; }
  bool contains(std::size_t v) const { return v < in_set_.size() && in_set_[v]; }

  void check_candidate(std::size_t v) const {
    if (v >= in_set_.size()) {
      throw Error(ErrorKind::IndexOutOfRange,
                  "index " + std::to_string(v) + " outside ground set of size " +
                      std::to_string(in_set_.size()));
    }
    if (in_set_[v]) throw Error(ErrorKind::AlreadySelected, "index " + std::to_string(v));
  }

  void add(std::size_t v) {
    in_set_[v] = true;
    selected_.push_back(v);
  }

 private:
  std::vector<bool> in_set_;
  std::vector<std::size_t> selected_;
};

inline void check_subset(std::span<const std::size_t> subset, std::size_t n) {
  std::vector<bool> seen(n, false);
  for (std::size_t v : subset) {
    if (v >= n) throw Error(ErrorKind::IndexOutOfRange, "index " + std::to_string(v));
    if (seen[v]) throw Error(ErrorKind::AlreadySelected, "duplicate index " + std::to_string(v));
    seen[v] = true;
  }
}

}  // namespace detail

/// f(X) = sum_i max_{j in X} s_ij, with f(empty) = 0.
class FacilityLocation {
 public:
  explicit FacilityLocation(const SimilarityKernel& kernel)
      : kernel_(&kernel), state_(kernel.size()), best_(kernel.size(), 0.0) {}

  std::size_t size() const noexcept { return state_.size(); }
  std::span<const std::size_t> selected() const noexcept { return state_.selected(); }
  bool contains(std::size_t v) const { return state_.contains(v); }

  double gain(std::size_t v) const {
    state_.check_candidate(v);
    const std::size_t n = size();
    double g = 0.0;
    if (state_.selected().empty()) {
      for (std::size_t i = 0; i < n; ++i) g += (*kernel_)(i, v);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (*kernel_)(i, v) - best_[i];
        if (d > 0.0) g += d;
      }
    }
    return g;
  }

  void commit(std::size_t v) {
    state_.check_candidate(v);
    const bool first = state_.selected().empty();
    for (std::size_t i = 0; i < size(); ++i) {
      const double s = (*kernel_)(i, v);
      if (first || s > best_[i]) best_[i] = s;
    }
    state_.add(v);
  }

  double value() const {
    if (state_.selected().empty()) return 0.0;
    double f = 0.0;
    for (double b : best_) f += b;
    return f;
  }

 private:
  const SimilarityKernel* kernel_;
  detail::SelectionState state_;
  std::vector<double> best_;
};

/// f(X) = sum_{i in V, j in X} s_ij - lambda * sum_{i, j in X} s_ij.
class GraphCut {
 public:
  GraphCut(const SimilarityKernel& kernel, double lambda)
      : kernel_(&kernel),
        lambda_(lambda),
        state_(kernel.size()),
        row_sums_(kernel.size(), 0.0),
        to_selected_(kernel.size(), 0.0) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be non-negative");
    for (std::size_t v = 0; v < size(); ++v) {
      double s = 0.0;
      for (std::size_t i = 0; i < size(); ++i) s += kernel(i, v);
      row_sums_[v] = s;
    }
  }

  std::size_t size() const noexcept { return state_.size(); }
  std::span<const std::size_t> selected() const noexcept { return state_.selected(); }
  bool contains(std::size_t v) const { return state_.contains(v); }
  double lambda() const noexcept { return lambda_; }
  double row_sum(std::size_t v) const { return row_sums_[v]; }

  double gain(std::size_t v) const {
    state_.check_candidate(v);
    return row_sums_[v] - lambda_ * (2.0 * to_selected_[v] + (*kernel_)(v, v));
  }

  void commit(std::size_t v) {
    state_.check_candidate(v);
    coverage_ += row_sums_[v];
    redundancy_ += 2.0 * to_selected_[v] + (*kernel_)(v, v);
    for (std::size_t u = 0; u < size(); ++u) to_selected_[u] += (*kernel_)(v, u);
    state_.add(v);
  }

  double value() const { return coverage_ - lambda_ * redundancy_; }

 private:
  const SimilarityKernel* kernel_;
  double lambda_;
  detail::SelectionState state_;
  std::vector<double> row_sums_;
  std::vector<double> to_selected_;  // sum_{j in X} s_jv per element
  double coverage_ = 0.0;
  double redundancy_ = 0.0;
};

/// f(X) = log det(S_X + eps*I), with f(empty) = 0.
class LogDeterminant {
 public:
  LogDeterminant(const SimilarityKernel& kernel, double epsilon)
      : kernel_(&kernel), epsilon_(epsilon), state_(kernel.size()) {
    if (!(epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be non-negative");
  }

  std::size_t size() const noexcept { return state_.size(); }
  std::span<const std::size_t> selected() const noexcept { return state_.selected(); }
  bool contains(std::size_t v) const { return state_.contains(v); }
  double epsilon() const noexcept { return epsilon_; }

  /// log of the Schur complement; -inf when S_{X+v} + eps*I is singular or
  /// indefinite.
  double gain(std::size_t v) const {
    state_.check_candidate(v);
    const double d = schur_complement(v, nullptr);
    if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(d);
  }

  void commit(std::size_t v) {
    state_.check_candidate(v);
    std::vector<double> z;
    const double d = schur_complement(v, &z);
    if (!(d > 0.0)) {
      throw Error(ErrorKind::NotPositiveDefinite,
                  "adding index " + std::to_string(v) + " gives Schur complement " +
                      std::to_string(d));
    }
    z.push_back(std::sqrt(d));
    chol_.push_back(std::move(z));
    log_det_ += std::log(d);
    state_.add(v);
  }

  double value() const { return log_det_; }

 private:
  // Solves L z = s_{X,v} by forward substitution and returns
  // s_vv + eps - z'z. The partial sums are prefix-stable as X grows.
  double schur_complement(std::size_t v, std::vector<double>* z_out) const {
    const auto sel = state_.selected();
    const std::size_t k = sel.size();
    std::vector<double> z(k);
    double zz = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      double acc = (*kernel_)(sel[r], v);
      const auto& lr = chol_[r];
      for (std::size_t c = 0; c < r; ++c) acc -= lr[c] * z[c];
      z[r] = acc / lr[r];
      zz += z[r] * z[r];
    }
    const double d = (*kernel_)(v, v) + epsilon_ - zz;
    if (z_out) *z_out = std::move(z);
    return d;
  }

  const SimilarityKernel* kernel_;
  double epsilon_;
  detail::SelectionState state_;
  std::vector<std::vector<double>> chol_;  // row r has r+1 entries
  double log_det_ = 0.0;
};

/// Runtime-selected function with the same interface as the three above.
class AnySubmodular {
 public:
  AnySubmodular(const SimilarityKernel& kernel, const FunctionSpec& spec)
      : fn_(make(kernel, spec)) {}

  std::size_t size() const {
    return std::visit([](const auto& f) { return f.size(); }, fn_);
  }
  std::span<const std::size_t> selected() const {
    return std::visit([](const auto& f) { return f.selected(); }, fn_);
  }
  bool contains(std::size_t v) const {
    return std::visit([v](const auto& f) { return f.contains(v); }, fn_);
  }
  double gain(std::size_t v) const {
    return std::visit([v](const auto& f) { return f.gain(v); }, fn_);
  }
  void commit(std::size_t v) {
    std::visit([v](auto& f) { f.commit(v); }, fn_);
  }
  double value() const {
    return std::visit([](const auto& f) { return f.value(); }, fn_);
  }

 private:
  using Variant = std::variant<FacilityLocation, GraphCut, LogDeterminant>;

  static Variant make(const SimilarityKernel& kernel, const FunctionSpec& spec) {
    switch (spec.kind) {
      case FunctionKind::FacilityLocation: return FacilityLocation(kernel);
      case FunctionKind::GraphCut: return GraphCut(kernel, spec.lambda);
      case FunctionKind::LogDeterminant: return LogDeterminant(kernel, spec.epsilon);
    }
    return FacilityLocation(kernel);
  }

  Variant fn_;
};

/// From-scratch f(X), independent of any incremental state.
inline double evaluate(const FunctionSpec& spec, const SimilarityKernel& kernel,
                       std::span<const std::size_t> subset) {
  const std::size_t n = kernel.size();
  detail::check_subset(subset, n);
  if (subset.empty()) return 0.0;
  switch (spec.kind) {
    case FunctionKind::FacilityLocation: {
      double f = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double best = kernel(i, subset[0]);
        for (std::size_t j : subset) best = std::max(best, kernel(i, j));
        f += best;
      }
      return f;
    }
    case FunctionKind::GraphCut: {
      double cover = 0.0;
      for (std::size_t j : subset)
        for (std::size_t i = 0; i < n; ++i) cover += kernel(i, j);
      double within = 0.0;
      for (std::size_t i : subset)
        for (std::size_t j : subset) within += kernel(i, j);
      return cover - spec.lambda * within;
    }
    case FunctionKind::LogDeterminant: {
      const std::size_t k = subset.size();
      std::vector<double> l(k * k, 0.0);
      double log_det = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
          double acc = kernel(subset[r], subset[c]) + (r == c ? spec.epsilon : 0.0);
          for (std::size_t t = 0; t < c; ++t) acc -= l[r * k + t] * l[c * k + t];
          if (r == c) {
            if (!(acc > 0.0)) {
              throw Error(ErrorKind::NotPositiveDefinite,
                          "S_X + eps*I is not positive definite");
            }
            l[r * k + r] = std::sqrt(acc);
            log_det += std::log(acc);
          } else {
            l[r * k + c] = acc / l[c * k + c];
          }
        }
      }
      return log_det;
    }
  }
  return 0.0;
}

}  // namespace submix
