#pragma once

// Two-stage mixture construction:
//   1. greedy f1 over the task kernel (cosine of mean prompt embeddings)
//      picks M' tasks and records their gains;
//   2. gains become instance budgets through Taylor-softmax weights, then
//      each task's budget is split equally over its templates and greedy f2
//      picks instances inside every (task, template) partition.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "submix/allocation.hpp"
#include "submix/embeddings_io.hpp"
#include "submix/error.hpp"
#include "submix/greedy.hpp"
#include "submix/kernel.hpp"
#include "submix/random.hpp"
#include "submix/submodular.hpp"
#include "submix/version.hpp"

namespace submix {

using WarningSink = std::function<void(std::string_view)>;

inline constexpr std::size_t kDefaultPerTaskCap = 20000;

struct MixtureConfig {
  FunctionSpec f1{FunctionKind::GraphCut};
  FunctionSpec f2{FunctionKind::FacilityLocation};
  std::size_t task_budget = 1;
  std::uint64_t instance_budget = 1;
  std::uint64_t seed = 0;
  KernelConfig kernel;
  std::size_t per_task_cap = kDefaultPerTaskCap;
  unsigned threads = 1;  // stage-2 workers; never changes the output
};

inline nlohmann::json to_json(const FunctionSpec& f) {
  return {{"kind", std::string(to_string(f.kind))}, {"lambda", f.lambda}, {"epsilon", f.epsilon}};
}

namespace detail {

template <typename Fn>
auto in_stage(std::string_view stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_context(stage);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage 1

/// Mean prompt embedding of every task, in manifest order.
inline std::vector<std::vector<double>> task_embeddings(const DatasetManifest& manifest) {
  std::vector<std::vector<double>> out;
  out.reserve(manifest.tasks.size());
  for (const auto& t : manifest.tasks) {
    try {
      out.push_back(mean_embedding(read_smeb(t.embeddings_path)));
    } catch (const Error& e) {
      throw e.with_context("task '" + t.task_id + "'");
    }
    if (out.back().size() != out.front().size()) {
      throw Error(ErrorKind::SchemaError, "task '" + t.task_id + "': embedding dim " +
                                              std::to_string(out.back().size()) +
                                              " differs from " +
                                              std::to_string(out.front().size()));
    }
  }
  return out;
}

inline SelectionResult select_tasks(const SimilarityKernel& task_kernel, const FunctionSpec& f1,
                                    std::size_t task_budget) {
  AnySubmodular fn(task_kernel, f1);
  return lazy_greedy(fn, task_budget);
}

inline SelectionResult select_tasks(const DatasetManifest& manifest, const FunctionSpec& f1,
                                    const KernelConfig& kernel_config, std::size_t task_budget,
                                    const WarningSink& warn = {}) {
  return detail::in_stage("stage-1 (select-tasks)", [&] {
    const auto embeddings = task_embeddings(manifest);
    const SimilarityKernel kernel = build_kernel(embeddings, kernel_config);
    SelectionResult result = select_tasks(kernel, f1, task_budget);
    if (result.truncated && warn) {
      warn("task budget " + std::to_string(task_budget) + " exceeds " +
           std::to_string(manifest.tasks.size()) + " tasks; using all tasks");
    }
    return result;
  });
}

// ---------------------------------------------------------------------------
// Allocation

/// Template tags (canonical order) with their usable sizes, min(count, cap).
struct TemplateCapacity {
  std::string tag;
  std::uint64_t capacity = 0;
};

inline std::vector<TemplateCapacity> template_capacities(std::span<const std::string> templates,
                                                         std::size_t per_task_cap) {
  std::vector<TemplateCapacity> out;
  for (const auto& [tag, rows] : template_partitions(templates)) {
    out.push_back({tag, std::min<std::uint64_t>(rows.size(), per_task_cap)});
  }
  return out;
}

inline std::uint64_t task_capacity(const TaskRecord& task, std::size_t per_task_cap) {
  std::vector<std::string> templates;
  try {
    for (auto& r : read_prompts(task.prompts_path)) templates.push_back(std::move(r.tmpl));
  } catch (const Error& e) {
    throw e.with_context("task '" + task.task_id + "'");
  }
  std::uint64_t total = 0;
  for (const auto& t : template_capacities(templates, per_task_cap)) {
    total += t.capacity;
  }
  return total;
}

/// Taylor-softmax budgets for the selected tasks, capped at what each task
/// can supply. Entries follow the greedy order of `tasks`.
inline AllocationPlan allocate(const DatasetManifest& manifest, const SelectionResult& tasks,
                               std::uint64_t instance_budget, std::size_t per_task_cap) {
  return detail::in_stage("allocate", [&] {
    AllocationPlan plan = taylor_softmax_allocate(tasks.gains, instance_budget);
    std::vector<std::uint64_t> capacities;
    for (std::size_t k = 0; k < plan.entries.size(); ++k) {
      const std::size_t pos = tasks.selected[k];
      if (pos >= manifest.tasks.size()) {
        throw Error(ErrorKind::IndexOutOfRange, "task position " + std::to_string(pos));
      }
      plan.entries[k].position = pos;
      plan.entries[k].task_id = manifest.tasks[pos].task_id;
      capacities.push_back(task_capacity(manifest.tasks[pos], per_task_cap));
    }
    return redistribute_overflow(std::move(plan), capacities);
  });
}

// ---------------------------------------------------------------------------
// Stage 2

/// Greedy f2 inside one template partition. `rows` are global row indices in
/// ascending order. Partitions larger than `per_task_cap` are first
/// subsampled uniformly with `partition_seed`. Returns ascending global rows.
inline std::vector<std::size_t> select_partition(const EmbeddingMatrix& embeddings,
                                                 std::span<const std::size_t> rows,
                                                 std::uint64_t budget, const FunctionSpec& f2,
                                                 const KernelConfig& kernel_config,
                                                 std::uint64_t partition_seed,
                                                 std::size_t per_task_cap) {
  std::vector<std::size_t> pool(rows.begin(), rows.end());
  if (pool.size() > per_task_cap) {
    auto picks = shuffled_prefix(pool.size(), per_task_cap, partition_seed);
    std::sort(picks.begin(), picks.end());
    std::vector<std::size_t> sub;
    sub.reserve(picks.size());
    for (std::size_t p : picks) sub.push_back(pool[p]);
    pool = std::move(sub);
  }
  if (budget > pool.size()) {
    throw Error(ErrorKind::CapacityExceeded, "budget " + std::to_string(budget) +
                                                 " exceeds partition size " +
                                                 std::to_string(pool.size()));
  }
  if (budget == 0) return {};
  for (std::size_t r : pool) {
    double sq = 0.0;
    for (float x : embeddings.row(r)) sq += static_cast<double>(x) * static_cast<double>(x);
    if (!(sq > 0.0)) {
      throw Error(ErrorKind::ZeroNormVector, "row " + std::to_string(r) + " has zero norm");
    }
  }
  const SimilarityKernel kernel = build_kernel(embeddings, pool, kernel_config);
  AnySubmodular fn(kernel, f2);
  const SelectionResult picked = lazy_greedy(fn, static_cast<std::size_t>(budget));
  std::vector<std::size_t> out;
  out.reserve(picked.selected.size());
  for (std::size_t k : picked.selected) out.push_back(pool[k]);
  std::sort(out.begin(), out.end());
  return out;
}

/// Per-template budgets for one task: equal split over templates in
/// canonical order, each capped at min(template size, per_task_cap).
inline std::vector<TemplateSelection> plan_templates(std::span<const std::string> templates,
                                                     std::uint64_t budget,
                                                     std::size_t per_task_cap) {
  const auto caps = template_capacities(templates, per_task_cap);
  std::vector<std::uint64_t> capacity_values;
  for (const auto& c : caps) capacity_values.push_back(c.capacity);
  const auto budgets = split_among_templates(budget, capacity_values);
  std::vector<TemplateSelection> out;
  for (std::size_t i = 0; i < caps.size(); ++i) out.push_back({caps[i].tag, budgets[i], {}});
  return out;
}

/// Stage 2 for a single task: fills `rows` of every planned template.
inline std::vector<TemplateSelection> select_instances(const TaskRecord& task,
                                                       const TaskData& data,
                                                       std::vector<TemplateSelection> plan,
                                                       const FunctionSpec& f2,
                                                       const KernelConfig& kernel_config,
                                                       std::uint64_t seed,
                                                       std::size_t per_task_cap) {
  const auto parts = template_partitions(data.templates);
  for (auto& sel : plan) {
    const auto it = parts.find(sel.tag);
    if (it == parts.end()) {
      throw Error(ErrorKind::SchemaError,
                  "task '" + task.task_id + "' has no template '" + sel.tag + "'");
    }
    try {
      sel.rows = select_partition(data.embeddings, it->second, sel.budget, f2, kernel_config,
                                  derive_seed(seed, task.task_id, sel.tag), per_task_cap);
    } catch (const Error& e) {
      throw e.with_context("task '" + task.task_id + "' template '" + sel.tag + "'");
    }
  }
  return plan;
}

inline nlohmann::json smart_config_echo(const MixtureConfig& c) {
  return {{"f1", to_json(c.f1)},
          {"f2", to_json(c.f2)},
          {"kernel_transform", std::string(to_string(c.kernel.transform))},
          {"task_budget", c.task_budget},
          {"instance_budget", c.instance_budget},
          {"seed", c.seed},
          {"per_task_cap", c.per_task_cap}};
}

/// Runs stage 2 for every task in `plan` and assembles the manifest. Work is
/// spread over `config.threads` workers per (task, template) partition;
/// results are keyed by partition, so the output does not depend on the
/// worker count.
inline MixtureManifest finish_smart(const DatasetManifest& manifest, const AllocationPlan& plan,
                                    const MixtureConfig& config) {
  return detail::in_stage("stage-2 (select-instances)", [&] {
    MixtureManifest out;
    out.strategy = "smart";
    out.config = smart_config_echo(config);
    out.tool_version = tool_version_string();

    struct Job {
      std::size_t entry;
      std::size_t tmpl;
    };
    std::vector<TaskData> data;
    std::vector<Job> jobs;
    for (std::size_t k = 0; k < plan.entries.size(); ++k) {
      const auto& e = plan.entries[k];
      const TaskRecord& task = manifest.tasks.at(e.position);
      data.push_back(load_task_data(task));
      MixtureEntry entry{task.task_id, e.position, e.gain, e.weight, e.budget, {}};
      try {
        entry.selected = plan_templates(data.back().templates, e.budget, config.per_task_cap);
      } catch (const Error& err) {
        throw err.with_context("task '" + task.task_id + "'");
      }
      for (std::size_t t = 0; t < entry.selected.size(); ++t) jobs.push_back({k, t});
      out.tasks.push_back(std::move(entry));
    }

    std::vector<std::exception_ptr> failures(jobs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (std::size_t j = next++; j < jobs.size(); j = next++) {
        const Job job = jobs[j];
        MixtureEntry& entry = out.tasks[job.entry];
        TemplateSelection& sel = entry.selected[job.tmpl];
        const TaskData& d = data[job.entry];
        try {
          const auto rows = template_partitions(d.templates).at(sel.tag);
          sel.rows = select_partition(d.embeddings, rows, sel.budget, config.f2, config.kernel,
                                      derive_seed(config.seed, entry.task_id, sel.tag),
                                      config.per_task_cap);
        } catch (const Error& e) {
          failures[j] = std::make_exception_ptr(
              e.with_context("task '" + entry.task_id + "' template '" + sel.tag + "'"));
        } catch (...) {
          failures[j] = std::current_exception();
        }
      }
    };
    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min<std::size_t>(config.threads, jobs.size()));
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
    return out;
  });
}

inline void check_config(const MixtureConfig& c) {
  if (c.task_budget == 0) throw Error(ErrorKind::InvalidArgument, "task budget must be positive");
  if (c.instance_budget == 0) {
    throw Error(ErrorKind::InvalidArgument, "instance budget must be positive");
  }
  if (c.per_task_cap == 0) throw Error(ErrorKind::InvalidArgument, "per-task cap must be positive");
  for (const auto* f : {&c.f1, &c.f2}) {
    if (!(f->lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be non-negative");
    if (!(f->epsilon >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "epsilon must be non-negative");
    }
  }
}

/// Full pipeline: task selection, allocation, per-template instance selection.
inline MixtureManifest run_smart(const DatasetManifest& manifest, const MixtureConfig& config,
                                 const WarningSink& warn = {}) {
  check_config(config);
  const SelectionResult tasks =
      select_tasks(manifest, config.f1, config.kernel, config.task_budget, warn);
  const AllocationPlan plan =
      allocate(manifest, tasks, config.instance_budget, config.per_task_cap);
  return finish_smart(manifest, plan, config);
}

}  // namespace submix
