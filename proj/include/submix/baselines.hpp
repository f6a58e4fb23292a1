#pragma once

// Examples-proportional (EPM) and equal (EM) mixtures in the same manifest
// format as the submodular pipeline.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "submix/allocation.hpp"
#include "submix/embeddings_io.hpp"
#include "submix/error.hpp"
#include "submix/random.hpp"
#include "submix/version.hpp"

namespace submix {

enum class BaselineStrategy { ExamplesProportional, Equal };

inline std::string_view to_string(BaselineStrategy s) {
  return s == BaselineStrategy::ExamplesProportional ? "epm" : "em";
}

inline BaselineStrategy parse_baseline_strategy(std::string_view name) {
  if (name == "epm") return BaselineStrategy::ExamplesProportional;
  if (name == "em") return BaselineStrategy::Equal;
  throw Error(ErrorKind::InvalidArgument, "unknown baseline strategy '" + std::string(name) + "'");
}

namespace detail {

inline void check_baseline_budget(const DatasetManifest& manifest, std::uint64_t budget) {
  if (budget == 0) throw Error(ErrorKind::InvalidArgument, "instance budget must be positive");
  if (budget > manifest.total_instances()) {
    throw Error(ErrorKind::BudgetExceedsCorpus,
                "instance budget " + std::to_string(budget) + " exceeds corpus size " +
                    std::to_string(manifest.total_instances()));
  }
}

/// Groups chosen rows of one task by template tag and wraps them in an entry.
inline MixtureEntry baseline_entry(const DatasetManifest& manifest, std::size_t position,
                                   std::vector<std::size_t> rows,
                                   const std::vector<std::string>& templates) {
  std::sort(rows.begin(), rows.end());
  MixtureEntry e;
  e.task_id = manifest.tasks[position].task_id;
  e.position = position;
  e.budget = rows.size();
  std::map<std::string, std::vector<std::size_t>> by_tag;
  for (std::size_t r : rows) by_tag[templates[r]].push_back(r);
  for (auto& [tag, tag_rows] : by_tag) e.selected.push_back({tag, tag_rows.size(), tag_rows});
  return e;
}

inline std::vector<std::string> templates_of(const TaskRecord& t) {
  std::vector<std::string> out;
  try {
    for (auto& r : read_prompts(t.prompts_path)) out.push_back(std::move(r.tmpl));
  } catch (const Error& e) {
    throw e.with_context("task '" + t.task_id + "'");
  }
  return out;
}

inline MixtureManifest baseline_shell(BaselineStrategy s, std::uint64_t budget,
                                      std::uint64_t seed) {
  MixtureManifest m;
  m.strategy = std::string(to_string(s));
  m.config = {{"instance_budget", budget}, {"seed", seed}};
  m.tool_version = tool_version_string();
  return m;
}

}  // namespace detail

/// Global instance ids (task order, then row) drawn by EPM: the first
/// `budget` entries of a seeded Fisher-Yates shuffle of all N instances.
inline std::vector<std::size_t> epm_global_draw(std::size_t total_instances,
                                                std::uint64_t budget, std::uint64_t seed) {
  return shuffled_prefix(total_instances, static_cast<std::size_t>(budget), splitmix64(seed));
}

/// Uniform sampling without replacement from the pooled corpus. Every task
/// is listed, including those that received no instances.
inline MixtureManifest epm_sample(const DatasetManifest& manifest, std::uint64_t budget,
                                  std::uint64_t seed) {
  detail::check_baseline_budget(manifest, budget);
  const auto draw = epm_global_draw(manifest.total_instances(), budget, seed);
  std::vector<std::size_t> offsets;
  std::size_t acc = 0;
  for (const auto& t : manifest.tasks) {
    offsets.push_back(acc);
    acc += t.instance_count;
  }
  std::vector<std::vector<std::size_t>> rows(manifest.tasks.size());
  for (std::size_t g : draw) {
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), g);
    const std::size_t task = static_cast<std::size_t>(it - offsets.begin()) - 1;
    rows[task].push_back(g - offsets[task]);
  }
  MixtureManifest m = detail::baseline_shell(BaselineStrategy::ExamplesProportional, budget, seed);
  for (std::size_t t = 0; t < manifest.tasks.size(); ++t) {
    m.tasks.push_back(detail::baseline_entry(manifest, t, std::move(rows[t]),
                                             detail::templates_of(manifest.tasks[t])));
  }
  return m;
}

/// Equal budgets per task (remainder to earlier tasks), capacity overflow
/// spread equally over the remaining tasks, then uniform sampling inside each
/// task with a seed derived from the task id.
inline std::vector<std::uint64_t> em_budgets(const DatasetManifest& manifest,
                                             std::uint64_t budget) {
  std::vector<std::uint64_t> capacities;
  for (const auto& t : manifest.tasks) capacities.push_back(t.instance_count);
  return equal_split(budget, capacities);
}

inline MixtureManifest em_sample(const DatasetManifest& manifest, std::uint64_t budget,
                                 std::uint64_t seed) {
  detail::check_baseline_budget(manifest, budget);
  const auto budgets = em_budgets(manifest, budget);
  MixtureManifest m = detail::baseline_shell(BaselineStrategy::Equal, budget, seed);
  for (std::size_t t = 0; t < manifest.tasks.size(); ++t) {
    const auto& task = manifest.tasks[t];
    auto rows = shuffled_prefix(task.instance_count, static_cast<std::size_t>(budgets[t]),
                                derive_seed(seed, task.task_id, ""));
    m.tasks.push_back(detail::baseline_entry(manifest, t, std::move(rows), detail::templates_of(task)));
  }
  return m;
}

inline MixtureManifest baseline_sample(BaselineStrategy s, const DatasetManifest& manifest,
                                       std::uint64_t budget, std::uint64_t seed) {
  return s == BaselineStrategy::ExamplesProportional ? epm_sample(manifest, budget, seed)
                                                     : em_sample(manifest, budget, seed);
}

}  // namespace submix
