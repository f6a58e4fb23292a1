#pragma once

// Command-line front end. `run` takes explicit streams and environment so the
// whole surface can be driven in-process by tests; tools/submix.cpp is a thin
// wrapper around it.
//
// Exit codes: 0 success, 1 validation or configuration error, 2 I/O error.
// Diagnostics go to `err`; machine output to `out` or the --out path.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "submix/baselines.hpp"
#include "submix/canonical_json.hpp"
#include "submix/embeddings_io.hpp"
#include "submix/error.hpp"
#include "submix/pipeline.hpp"
#include "submix/version.hpp"

namespace submix::cli {

inline constexpr const char* kSeedEnv = "SUBMIX_SEED";
inline constexpr const char* kOutEnv = "SUBMIX_OUT";

/// Environment variables the CLI consults; flags always take precedence.
using Environment = std::map<std::string, std::string>;

inline Environment process_environment() {
  Environment env;
  for (const char* key : {kSeedEnv, kOutEnv}) {
    if (const char* v = std::getenv(key)) env[key] = v;
  }
  return env;
}

namespace detail {

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  const Environment& env;
};

inline std::uint64_t resolve_seed(const std::vector<std::uint64_t>& flag, const Io& io) {
  if (!flag.empty()) return flag.front();
  if (const auto it = io.env.find(kSeedEnv); it != io.env.end()) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(it->second, &used);
      if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidArgument, std::string(kSeedEnv) + " is not an unsigned integer");
  }
  throw Error(ErrorKind::InvalidArgument, std::string("--seed is required (or set ") + kSeedEnv + ")");
}

inline std::optional<std::string> resolve_out(const std::string& flag, const Io& io) {
  if (!flag.empty()) return flag;
  if (const auto it = io.env.find(kOutEnv); it != io.env.end() && !it->second.empty()) {
    return it->second;
  }
  return std::nullopt;
}

inline void emit(const std::string& text, const std::optional<std::string>& path, const Io& io) {
  if (!path) {
    io.out << text;
    io.out.flush();
    return;
  }
  std::ofstream f(*path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot open for writing: " + *path);
  f << text;
  f.flush();
  if (!f) throw Error(ErrorKind::IoError, "write failed: " + *path);
}

inline nlohmann::json read_stage_input(const std::string& path, const Io& io) {
  std::string text;
  if (path.empty() || path == "-") {
    text.assign(std::istreambuf_iterator<char>(io.in), std::istreambuf_iterator<char>());
  } else {
    text = submix::detail::read_file(path);
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, std::string("stage input: ") + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::SchemaError, std::string("stage input: missing or invalid '") + key + "'");
  }
}

inline void expect_stage(const nlohmann::json& doc, const char* stage) {
  if (!doc.is_object() || field<std::string>(doc, "stage") != stage) {
    throw Error(ErrorKind::SchemaError, std::string("stage input is not '") + stage + "' output");
  }
}

/// Flags shared by the commands that build kernels and functions.
struct FunctionFlags {
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
  std::string transform = "clamp";

  void add_to(CLI::App& cmd) {
    cmd.add_option("--lambda", lambda, "Graph Cut trade-off (>= 0)")->capture_default_str();
    cmd.add_option("--epsilon", epsilon, "Log Determinant diagonal jitter (>= 0)")
        ->capture_default_str();
    cmd.add_option("--kernel-transform", transform, "clamp | affine | identity")
        ->capture_default_str();
  }

  FunctionSpec spec(const std::string& kind) const {
    return {parse_function_kind(kind), lambda, epsilon};
  }
};

// Stage documents carry every double at full precision so a piped run sees
// exactly the values an in-process run does.
inline std::string dump_stage(const nlohmann::json& doc) {
  return dump_canonical(doc, kExactPrecision);
}

inline nlohmann::json select_tasks_doc(const std::string& manifest_path,
                                       const DatasetManifest& manifest, const FunctionSpec& f1,
                                       KernelTransform transform, std::size_t task_budget,
                                       const SelectionResult& result) {
  nlohmann::json tasks = nlohmann::json::array();
  for (std::size_t k = 0; k < result.selected.size(); ++k) {
    const std::size_t pos = result.selected[k];
    tasks.push_back({{"position", pos},
                     {"task_id", manifest.tasks[pos].task_id},
                     {"gain", result.gains[k]}});
  }
  return {{"stage", "select-tasks"},
          {"manifest", manifest_path},
          {"f1", to_json(f1)},
          {"lambda", f1.lambda},
          {"epsilon", f1.epsilon},
          {"kernel_transform", std::string(to_string(transform))},
          {"task_budget", task_budget},
          {"truncated", result.truncated},
          {"tasks", tasks}};
}

inline nlohmann::json plan_to_json(const AllocationPlan& plan) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& e : plan.entries) {
    tasks.push_back({{"position", e.position},
                     {"task_id", e.task_id},
                     {"gain", e.gain},
                     {"weight", e.weight},
                     {"budget", e.budget}});
  }
  return tasks;
}

inline AllocationPlan plan_from_json(const nlohmann::json& tasks) {
  AllocationPlan plan;
  try {
    for (const auto& t : tasks) {
      plan.entries.push_back({t.at("position").get<std::size_t>(),
                              t.at("task_id").get<std::string>(), t.at("gain").get<double>(),
                              t.at("weight").get<double>(), t.at("budget").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("stage input tasks: ") + e.what());
  }
  return plan;
}

inline void warn(const Io& io, std::string_view message) {
  io.err << "warning: " << message << "\n";
}

}  // namespace detail

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
               std::ostream& err, const Environment& env = {}) {
  const detail::Io io{in, out, err, env};

  CLI::App app{"Submodular instruction-tuning data mixtures", kToolName};
  app.set_version_flag("--version",
                       tool_version_string() + " (smeb v1, dataset manifest v1, mixture manifest v" +
                           kMixtureFormatVersion + ")");
  app.require_subcommand(1);

  // mixture
  struct {
    std::string manifest, f1, f2, out;
    std::size_t task_budget = 0, per_task_cap = kDefaultPerTaskCap;
    std::uint64_t instance_budget = 0;
    std::vector<std::uint64_t> seed;
    unsigned threads = 1;
    detail::FunctionFlags fn;
  } mix;
  auto* mixture = app.add_subcommand("mixture", "Build a mixture end to end");
  mixture->add_option("--manifest", mix.manifest, "Dataset manifest JSON")->required();
  mixture->add_option("--f1", mix.f1, "Task selection function: fl | gc | logdet")->required();
  mixture->add_option("--f2", mix.f2, "Instance selection function: fl | gc | logdet")->required();
  mixture->add_option("--task-budget", mix.task_budget, "Number of tasks M'")->required();
  mixture->add_option("--instance-budget", mix.instance_budget, "Number of instances N'")
      ->required();
  mixture->add_option("--seed", mix.seed, "Seed (env SUBMIX_SEED)")->expected(1);
  mixture->add_option("--per-task-cap", mix.per_task_cap, "Max rows per template partition")
      ->capture_default_str();
  mixture->add_option("--threads", mix.threads, "Stage-2 worker threads")->capture_default_str();
  mixture->add_option("--out", mix.out, "Output path (env SUBMIX_OUT; default stdout)");
  mix.fn.add_to(*mixture);

  // select-tasks
  struct {
    std::string manifest, f1, out;
    std::size_t task_budget = 0;
    detail::FunctionFlags fn;
  } st;
  auto* select_tasks_cmd = app.add_subcommand("select-tasks", "Stage 1: weighted task selection");
  select_tasks_cmd->add_option("--manifest", st.manifest, "Dataset manifest JSON")->required();
  select_tasks_cmd->add_option("--f1", st.f1, "fl | gc | logdet")->required();
  select_tasks_cmd->add_option("--task-budget", st.task_budget, "Number of tasks M'")->required();
  select_tasks_cmd->add_option("--out", st.out, "Output path");
  st.fn.add_to(*select_tasks_cmd);

  // allocate
  struct {
    std::string in, out;
    std::uint64_t instance_budget = 0;
    std::size_t per_task_cap = kDefaultPerTaskCap;
    std::vector<double> gains;
    std::vector<std::uint64_t> capacities;
  } al;
  auto* allocate_cmd = app.add_subcommand("allocate", "Gains to per-task instance budgets");
  allocate_cmd->add_option("--in", al.in, "select-tasks output (default stdin)");
  allocate_cmd->add_option("--instance-budget", al.instance_budget, "Number of instances N'")
      ->required();
  allocate_cmd->add_option("--per-task-cap", al.per_task_cap, "Max rows per template partition")
      ->capture_default_str();
  allocate_cmd->add_option("--gains", al.gains, "Gains to allocate instead of --in")
      ->delimiter(',');
  allocate_cmd->add_option("--capacities", al.capacities, "Per-task capacities for --gains")
      ->delimiter(',');
  allocate_cmd->add_option("--out", al.out, "Output path");

  // select-instances
  struct {
    std::string in, f2, out;
    std::vector<std::uint64_t> seed;
    unsigned threads = 1;
  } si;
  auto* select_instances_cmd =
      app.add_subcommand("select-instances", "Stage 2: per-template instance selection");
  select_instances_cmd->add_option("--in", si.in, "allocate output (default stdin)");
  select_instances_cmd->add_option("--f2", si.f2, "fl | gc | logdet")->required();
  select_instances_cmd->add_option("--seed", si.seed, "Seed (env SUBMIX_SEED)")->expected(1);
  select_instances_cmd->add_option("--threads", si.threads, "Worker threads")
      ->capture_default_str();
  select_instances_cmd->add_option("--out", si.out, "Output path");

  // baseline
  struct {
    std::string strategy, manifest, out;
    std::uint64_t instance_budget = 0;
    std::vector<std::uint64_t> seeds;
  } bl;
  auto* baseline_cmd = app.add_subcommand("baseline", "Examples-proportional or equal mixture");
  baseline_cmd->add_option("--strategy", bl.strategy, "epm | em")->required();
  baseline_cmd->add_option("--instance-budget", bl.instance_budget, "Number of instances N'")
      ->required();
  baseline_cmd->add_option("--seed", bl.seeds, "Seed; repeat for several manifests");
  baseline_cmd->add_option("--manifest", bl.manifest, "Dataset manifest JSON")->required();
  baseline_cmd->add_option("--out", bl.out, "Output path");

  // validate
  std::string validate_manifest;
  auto* validate_cmd = app.add_subcommand("validate", "Check a corpus for format violations");
  validate_cmd->add_option("--manifest", validate_manifest, "Dataset manifest JSON")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (mixture->parsed()) {
      MixtureConfig config;
      config.f1 = mix.fn.spec(mix.f1);
      config.f2 = mix.fn.spec(mix.f2);
      config.task_budget = mix.task_budget;
      config.instance_budget = mix.instance_budget;
      config.kernel.transform = parse_kernel_transform(mix.fn.transform);
      config.per_task_cap = mix.per_task_cap;
      config.threads = mix.threads;
      check_config(config);
      config.seed = detail::resolve_seed(mix.seed, io);
      const auto manifest = load_manifest(mix.manifest);
      const auto result =
          run_smart(manifest, config, [&](std::string_view m) { detail::warn(io, m); });
      detail::emit(serialize(result), detail::resolve_out(mix.out, io), io);
      return 0;
    }

    if (select_tasks_cmd->parsed()) {
      if (st.task_budget == 0) {
        throw Error(ErrorKind::InvalidArgument, "task budget must be positive");
      }
      const FunctionSpec f1 = st.fn.spec(st.f1);
      const KernelTransform transform = parse_kernel_transform(st.fn.transform);
      if (!(f1.lambda >= 0.0) || !(f1.epsilon >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "lambda and epsilon must be non-negative");
      }
      const auto manifest = load_manifest(st.manifest);
      const auto result = select_tasks(manifest, f1, {transform}, st.task_budget,
                                       [&](std::string_view m) { detail::warn(io, m); });
      detail::emit(detail::dump_stage(detail::select_tasks_doc(st.manifest, manifest, f1,
                                                               transform, st.task_budget,
                                                               result)),
                   detail::resolve_out(st.out, io), io);
      return 0;
    }

    if (allocate_cmd->parsed()) {
      if (al.instance_budget == 0) {
        throw Error(ErrorKind::InvalidArgument, "instance budget must be positive");
      }
      if (al.per_task_cap == 0) {
        throw Error(ErrorKind::InvalidArgument, "per-task cap must be positive");
      }
      nlohmann::json doc;
      AllocationPlan plan;
      if (!al.gains.empty()) {
        plan = taylor_softmax_allocate(al.gains, al.instance_budget);
        if (!al.capacities.empty()) {
          if (al.capacities.size() != al.gains.size()) {
            throw Error(ErrorKind::InvalidArgument, "--capacities must match --gains in length");
          }
          plan = redistribute_overflow(std::move(plan), al.capacities);
        }
        doc = {{"stage", "allocate"}};
      } else {
        doc = detail::read_stage_input(al.in, io);
        detail::expect_stage(doc, "select-tasks");
        const auto manifest = load_manifest(detail::field<std::string>(doc, "manifest"));
        SelectionResult tasks;
        for (const auto& t : detail::field<nlohmann::json>(doc, "tasks")) {
          tasks.selected.push_back(detail::field<std::size_t>(t, "position"));
          tasks.gains.push_back(detail::field<double>(t, "gain"));
        }
        plan = allocate(manifest, tasks, al.instance_budget, al.per_task_cap);
        doc["stage"] = "allocate";
      }
      doc["instance_budget"] = al.instance_budget;
      doc["per_task_cap"] = al.per_task_cap;
      doc["tasks"] = detail::plan_to_json(plan);
      detail::emit(detail::dump_stage(doc), detail::resolve_out(al.out, io), io);
      return 0;
    }

    if (select_instances_cmd->parsed()) {
      const nlohmann::json doc = detail::read_stage_input(si.in, io);
      detail::expect_stage(doc, "allocate");
      if (!doc.contains("manifest")) {
        throw Error(ErrorKind::SchemaError, "allocation was built from --gains; no manifest");
      }
      MixtureConfig config;
      const auto f1 = detail::field<nlohmann::json>(doc, "f1");
      config.f1 = {parse_function_kind(detail::field<std::string>(f1, "kind")),
                   detail::field<double>(f1, "lambda"), detail::field<double>(f1, "epsilon")};
      config.f2 = {parse_function_kind(si.f2), detail::field<double>(doc, "lambda"),
                   detail::field<double>(doc, "epsilon")};
      config.kernel.transform =
          parse_kernel_transform(detail::field<std::string>(doc, "kernel_transform"));
      config.task_budget = detail::field<std::size_t>(doc, "task_budget");
      config.instance_budget = detail::field<std::uint64_t>(doc, "instance_budget");
      config.per_task_cap = detail::field<std::size_t>(doc, "per_task_cap");
      config.threads = si.threads;
      config.seed = detail::resolve_seed(si.seed, io);
      const auto manifest = load_manifest(detail::field<std::string>(doc, "manifest"));
      const AllocationPlan plan = detail::plan_from_json(detail::field<nlohmann::json>(doc, "tasks"));
      const auto result = finish_smart(manifest, plan, config);
      detail::emit(serialize(result), detail::resolve_out(si.out, io), io);
      return 0;
    }

    if (baseline_cmd->parsed()) {
      const BaselineStrategy strategy = parse_baseline_strategy(bl.strategy);
      if (bl.instance_budget == 0) {
        throw Error(ErrorKind::InvalidArgument, "instance budget must be positive");
      }
      std::vector<std::uint64_t> seeds = bl.seeds;
      if (seeds.empty()) seeds.push_back(detail::resolve_seed({}, io));
      const auto manifest = load_manifest(bl.manifest);
      const auto out_path = detail::resolve_out(bl.out, io);
      for (std::uint64_t seed : seeds) {
        const std::string text = serialize(baseline_sample(strategy, manifest, bl.instance_budget, seed));
        if (out_path && seeds.size() > 1) {
          const std::filesystem::path p(*out_path);
          const auto named = p.parent_path() / (p.stem().string() + ".seed" +
                                                std::to_string(seed) + p.extension().string());
          detail::emit(text, named.string(), io);
        } else {
          detail::emit(text, out_path, io);
        }
      }
      return 0;
    }

    if (validate_cmd->parsed()) {
      const auto issues = validate_corpus(validate_manifest);
      if (!issues.empty()) {
        for (const auto& e : issues) err << e.what() << "\n";
        return 1;
      }
      const auto manifest = load_manifest(validate_manifest);
      out << "OK: " << manifest.tasks.size() << " tasks, " << manifest.total_instances()
          << " instances\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_io() ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace submix::cli
