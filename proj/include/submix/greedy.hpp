#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "submix/error.hpp"
#include "submix/submodular.hpp"

namespace submix {

template <typename F>
concept IncrementalFunction = requires(F f, const F cf, std::size_t v) {
  { cf.size() } -> std::convertible_to<std::size_t>;
  { cf.gain(v) } -> std::convertible_to<double>;
  { cf.contains(v) } -> std::convertible_to<bool>;
  f.commit(v);
};

/// Greedy output: elements in selection order with the marginal gain each had
/// when it was chosen. `truncated` is set when the budget exceeded the number
/// of available elements.
struct SelectionResult {
  std::vector<std::size_t> selected;
  std::vector<double> gains;
  bool truncated = false;

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

namespace detail {

template <IncrementalFunction F>
std::size_t steps_for(const F& fn, std::size_t budget, bool& truncated) {
  std::size_t available = 0;
  for (std::size_t v = 0; v < fn.size(); ++v) available += fn.contains(v) ? 0 : 1;
  truncated = budget > available;
  return std::min(budget, available);
}

}  // namespace detail

/// Plain greedy: every step scans all remaining candidates and takes the
/// largest gain, smallest index on ties. Runs exactly min(budget, n) steps;
/// negative gains do not stop it.
template <IncrementalFunction F>
SelectionResult naive_greedy(F& fn, std::size_t budget) {
  SelectionResult result;
  const std::size_t steps = detail::steps_for(fn, budget, result.truncated);
  for (std::size_t step = 0; step < steps; ++step) {
    std::size_t best = fn.size();
    double best_gain = 0.0;
    for (std::size_t v = 0; v < fn.size(); ++v) {
      if (fn.contains(v)) continue;
      const double g = fn.gain(v);
      if (best == fn.size() || g > best_gain) {
        best = v;
        best_gain = g;
      }
    }
    fn.commit(best);
    result.selected.push_back(best);
    result.gains.push_back(best_gain);
  }
  return result;
}

/// Lazy (accelerated) greedy. Heap entries carry a stale upper bound on the
/// gain and the step at which it was computed; the top entry is accepted once
/// its bound is current. Ordering on (gain desc, index asc) reproduces the
/// naive tie-break, so for functions with diminishing gains the output equals
/// naive_greedy exactly.
template <IncrementalFunction F>
SelectionResult lazy_greedy(F& fn, std::size_t budget) {
  struct Entry {
    double bound;
    std::size_t index;
    std::size_t epoch;
  };
  const auto lower_priority = [](const Entry& a, const Entry& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.index > b.index;
  };

  SelectionResult result;
  const std::size_t steps = detail::steps_for(fn, budget, result.truncated);
  if (steps == 0) return result;

  std::vector<Entry> initial;
  initial.reserve(fn.size());
  for (std::size_t v = 0; v < fn.size(); ++v) {
    if (!fn.contains(v)) initial.push_back({fn.gain(v), v, 0});
  }
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(
      lower_priority, std::move(initial));

  for (std::size_t step = 0; step < steps; ++step) {
    for (;;) {
      Entry top = heap.top();
      heap.pop();
      if (top.epoch == step) {
        fn.commit(top.index);
        result.selected.push_back(top.index);
        result.gains.push_back(top.bound);
        break;
      }
      top.bound = fn.gain(top.index);
      top.epoch = step;
      heap.push(top);
    }
  }
  return result;
}

inline constexpr std::size_t kBruteForceLimit = 20;

struct BruteForceResult {
  std::vector<std::size_t> best_set;  // ascending
  double best_value = 0.0;
};

/// Exhaustive maximization over all subsets of size <= budget, valued by the
/// from-scratch `evaluate`. Subsets are visited in lexicographic order and
/// only a strictly better value replaces the incumbent, so ties resolve to
/// the lexicographically smallest set. Subsets whose LogDet matrix is not
/// positive definite are skipped.
inline BruteForceResult brute_force_opt(const FunctionSpec& spec, const SimilarityKernel& kernel,
                                        std::size_t budget) {
  const std::size_t n = kernel.size();
  if (n > kBruteForceLimit) {
    throw Error(ErrorKind::GroundSetTooLarge,
                "ground set of " + std::to_string(n) + " exceeds " +
                    std::to_string(kBruteForceLimit));
  }
  budget = std::min(budget, n);
  BruteForceResult best;
  best.best_value = evaluate(spec, kernel, {});
  std::vector<std::size_t> current;

  const auto visit = [&](auto&& self, std::size_t start) -> void {
    if (current.size() == budget) return;
    for (std::size_t v = start; v < n; ++v) {
      current.push_back(v);
      double value = -std::numeric_limits<double>::infinity();
      bool valid = true;
      try {
        value = evaluate(spec, kernel, current);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
        valid = false;
      }
      if (valid && value > best.best_value) {
        best.best_value = value;
        best.best_set = current;
      }
      self(self, v + 1);
      current.pop_back();
    }
  };
  visit(visit, 0);
  return best;
}

}  // namespace submix
