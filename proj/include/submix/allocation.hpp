#pragma once

// Turning greedy gains into integer instance budgets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "submix/error.hpp"

namespace submix {

/// Second-order Taylor expansion of exp: 1 + g + g^2/2, which is >= 0.5 for
/// every real g.
inline double taylor_weight(double gain) { return 1.0 + gain + 0.5 * gain * gain; }

/// Largest-remainder apportionment of `total` units in proportion to
/// `weights`. Leftover units go to the largest fractional parts, earlier
/// positions first on ties. The result always sums to `total`.
inline std::vector<std::uint64_t> apportion(std::span<const double> weights, std::uint64_t total) {
  const std::size_t k = weights.size();
  if (k == 0) {
    if (total == 0) return {};
    throw Error(ErrorKind::InvalidArgument, "cannot apportion a budget over zero entries");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorKind::NonFiniteGain, "weights must be finite and non-negative");
    }
    sum += w;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw Error(ErrorKind::NonFiniteGain, "weights must have a finite positive sum");
  }

  std::vector<std::uint64_t> out(k);
  std::vector<double> remainder(k);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double share = weights[i] * static_cast<double>(total) / sum;
    const double floor_share = std::floor(share);
    out[i] = static_cast<std::uint64_t>(floor_share);
    remainder[i] = share - floor_share;
    assigned += out[i];
  }
  // Rounding can only leave the floors short of the total, never over it.
  if (assigned > total) throw Error(ErrorKind::InvalidArgument, "apportionment overflow");

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::uint64_t left = total - assigned, r = 0; left > 0; --left, ++r) {
    ++out[order[r % k]];
  }
  return out;
}

/// Caps any budget above its capacity and re-apportions what remains over
/// the uncapped entries by weight, repeating until every budget fits.
/// `budgets` must already sum to the total.
inline std::vector<std::uint64_t> waterfill(std::vector<std::uint64_t> budgets,
                                            std::span<const double> weights,
                                            std::span<const std::uint64_t> capacities) {
  const std::size_t k = budgets.size();
  if (weights.size() != k || capacities.size() != k) {
    throw Error(ErrorKind::InvalidArgument, "budgets, weights and capacities differ in length");
  }
  const std::uint64_t total = std::accumulate(budgets.begin(), budgets.end(), std::uint64_t{0});
  const std::uint64_t room =
      std::accumulate(capacities.begin(), capacities.end(), std::uint64_t{0});
  if (total > room) {
    throw Error(ErrorKind::CapacityExceeded, "budget " + std::to_string(total) +
                                                 " exceeds total capacity " +
                                                 std::to_string(room));
  }

  std::vector<bool> capped(k, false);
  for (;;) {
    bool overflow = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (!capped[i] && budgets[i] > capacities[i]) {
        capped[i] = true;
        budgets[i] = capacities[i];
        overflow = true;
      }
    }
    if (!overflow) return budgets;

    std::uint64_t remaining = total;
    std::vector<std::size_t> open;
    std::vector<double> open_weights;
    for (std::size_t i = 0; i < k; ++i) {
      if (capped[i]) {
        remaining -= budgets[i];
      } else {
        open.push_back(i);
        open_weights.push_back(weights[i]);
      }
    }
    const auto shares = apportion(open_weights, remaining);
    for (std::size_t j = 0; j < open.size(); ++j) budgets[open[j]] = shares[j];
  }
}

/// One task's place in the allocation.
struct AllocationEntry {
  std::size_t position = 0;  // index into the dataset manifest
  std::string task_id;
  double gain = 0.0;
  double weight = 0.0;
  std::uint64_t budget = 0;

  friend bool operator==(const AllocationEntry&, const AllocationEntry&) = default;
};

struct AllocationPlan {
  std::vector<AllocationEntry> entries;  // greedy selection order

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& e : entries) s += e.budget;
    return s;
  }
  std::vector<double> weights() const {
    std::vector<double> w;
    for (const auto& e : entries) w.push_back(e.weight);
    return w;
  }
  std::vector<std::uint64_t> budgets() const {
    std::vector<std::uint64_t> b;
    for (const auto& e : entries) b.push_back(e.budget);
    return b;
  }

  friend bool operator==(const AllocationPlan&, const AllocationPlan&) = default;
};

/// Budgets proportional to the Taylor-softmax weights of `gains`, rounded by
/// largest remainder. Entries carry positions 0..k-1 and empty task ids.
inline AllocationPlan taylor_softmax_allocate(std::span<const double> gains,
                                              std::uint64_t instance_budget) {
  if (gains.empty()) throw Error(ErrorKind::InvalidArgument, "no gains to allocate");
  std::vector<double> weights;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (!std::isfinite(gains[i])) {
      throw Error(ErrorKind::NonFiniteGain, "gain at position " + std::to_string(i));
    }
    weights.push_back(taylor_weight(gains[i]));
    if (!std::isfinite(weights.back())) {
      throw Error(ErrorKind::NonFiniteGain,
                  "weight overflows for gain at position " + std::to_string(i));
    }
  }
  const auto budgets = apportion(weights, instance_budget);
  AllocationPlan plan;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    plan.entries.push_back({i, {}, gains[i], weights[i], budgets[i]});
  }
  return plan;
}

/// Moves budget above each task's capacity onto the other tasks in
/// proportion to their weights. Plans already within capacity are returned
/// unchanged.
inline AllocationPlan redistribute_overflow(AllocationPlan plan,
                                            std::span<const std::uint64_t> capacities) {
  const auto budgets = waterfill(plan.budgets(), plan.weights(), capacities);
  for (std::size_t i = 0; i < plan.entries.size(); ++i) plan.entries[i].budget = budgets[i];
  return plan;
}

/// Equal integer split with the remainder going to the first entries;
/// entries that cannot absorb their share are capped and the shortfall is
/// split equally over the rest.
inline std::vector<std::uint64_t> equal_split(std::uint64_t budget,
                                              std::span<const std::uint64_t> capacities) {
  const std::vector<double> ones(capacities.size(), 1.0);
  return waterfill(apportion(ones, budget), ones, capacities);
}

/// Per-template budgets; `capacities` lists template sizes in canonical tag
/// order.
inline std::vector<std::uint64_t> split_among_templates(
    std::uint64_t budget, std::span<const std::uint64_t> capacities) {
  if (capacities.empty()) throw Error(ErrorKind::InvalidArgument, "task has no templates");
  return equal_split(budget, capacities);
}

}  // namespace submix
