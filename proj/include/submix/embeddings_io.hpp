#pragma once

// On-disk formats: SMEB embedding files, JSONL prompt files, the dataset
// manifest that ties them together, and the mixture manifest the tools emit.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "submix/canonical_json.hpp"
#include "submix/error.hpp"

namespace submix {

namespace fs = std::filesystem;

inline constexpr std::array<unsigned char, 4> kSmebMagic = {0x53, 0x4D, 0x45, 0x42};
inline constexpr std::uint32_t kSmebVersion = 1;
inline constexpr std::size_t kSmebHeaderSize = 20;
inline constexpr const char* kDefaultTemplate = "default";

/// Dense row-major float32 matrix. Row i pairs with line i of the prompts file.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t n_rows, std::size_t dim)
      : n_rows_(n_rows), dim_(dim), data_(n_rows * dim, 0.0f) {}
  EmbeddingMatrix(std::size_t n_rows, std::size_t dim, std::vector<float> data)
      : n_rows_(n_rows), dim_(dim), data_(std::move(data)) {
    if (dim_ == 0) throw Error(ErrorKind::InvalidArgument, "embedding dim must be positive");
    if (data_.size() != n_rows_ * dim_) {
      throw Error(ErrorKind::InvalidArgument, "embedding data size does not match n_rows*dim");
    }
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  const std::vector<float>& data() const noexcept { return data_; }
  float& at(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t dim_ = 1;
  std::vector<float> data_;
};

struct SmebHeader {
  std::uint32_t version = kSmebVersion;
  std::uint64_t n_rows = 0;
  std::uint32_t dim = 0;
};

namespace detail {

template <typename T>
T load_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

template <typename T>
void store_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

inline std::string read_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorKind::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed: " + path.string());
  return bytes;
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

inline SmebHeader parse_smeb_header(std::string_view bytes, const std::string& name) {
  if (bytes.size() < kSmebMagic.size() ||
      !std::equal(kSmebMagic.begin(), kSmebMagic.end(),
                  reinterpret_cast<const unsigned char*>(bytes.data()))) {
    throw Error(ErrorKind::BadMagic, name);
  }
  if (bytes.size() < kSmebHeaderSize) {
    throw Error(ErrorKind::TruncatedPayload, name + ": header shorter than 20 bytes");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  SmebHeader h;
  h.version = load_le<std::uint32_t>(p + 4);
  h.n_rows = load_le<std::uint64_t>(p + 8);
  h.dim = load_le<std::uint32_t>(p + 16);
  if (h.version != kSmebVersion) {
    throw Error(ErrorKind::UnsupportedVersion,
                name + ": version " + std::to_string(h.version));
  }
  if (h.dim == 0) throw Error(ErrorKind::SchemaError, name + ": dim must be positive");
  return h;
}

}  // namespace detail

/// Reads only the 20-byte header.
inline SmebHeader read_smeb_header(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorKind::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string head(kSmebHeaderSize, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return detail::parse_smeb_header(head, path.string());
}

inline EmbeddingMatrix parse_smeb(std::string_view bytes, const std::string& name = "<smeb>") {
  const SmebHeader h = detail::parse_smeb_header(bytes, name);
  const std::size_t payload = bytes.size() - kSmebHeaderSize;
  if (h.n_rows > payload / 4 / h.dim + 1) {
    throw Error(ErrorKind::TruncatedPayload,
                name + ": expected " + std::to_string(h.n_rows) + "x" + std::to_string(h.dim) +
                    " floats, payload has " + std::to_string(payload) + " bytes");
  }
  const std::size_t count = static_cast<std::size_t>(h.n_rows) * h.dim;
  if (payload < count * 4) {
    throw Error(ErrorKind::TruncatedPayload,
                name + ": expected " + std::to_string(count * 4) + " payload bytes, found " +
                    std::to_string(payload));
  }
  if (payload > count * 4) {
    throw Error(ErrorKind::SchemaError,
                name + ": " + std::to_string(payload - count * 4) + " trailing bytes");
  }
  std::vector<float> data(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + kSmebHeaderSize;
  for (std::size_t k = 0; k < count; ++k) {
    const float v = std::bit_cast<float>(detail::load_le<std::uint32_t>(p + 4 * k));
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NonFiniteValue,
                  name + ": row " + std::to_string(k / h.dim) + ", col " +
                      std::to_string(k % h.dim));
    }
    data[k] = v;
  }
  return EmbeddingMatrix(static_cast<std::size_t>(h.n_rows), h.dim, std::move(data));
}

inline EmbeddingMatrix read_smeb(const fs::path& path) {
  return parse_smeb(detail::read_file(path), path.string());
}

inline std::string encode_smeb(const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(kSmebHeaderSize + 4 * m.data().size());
  out.append(reinterpret_cast<const char*>(kSmebMagic.data()), kSmebMagic.size());
  detail::store_le<std::uint32_t>(out, kSmebVersion);
  detail::store_le<std::uint64_t>(out, m.n_rows());
  detail::store_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.data()) detail::store_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline void write_smeb(const EmbeddingMatrix& m, const fs::path& path) {
  for (std::size_t k = 0; k < m.data().size(); ++k) {
    if (!std::isfinite(m.data()[k])) {
      throw Error(ErrorKind::NonFiniteValue,
                  "row " + std::to_string(k / m.dim()) + ", col " + std::to_string(k % m.dim()));
    }
  }
  detail::write_file(path, encode_smeb(m));
}

// ---------------------------------------------------------------------------
// Prompts (JSONL)

struct InstanceRecord {
  std::string prompt;
  std::string response;
  std::string tmpl = kDefaultTemplate;
};

/// Parses one object per line. A final newline is allowed; any other empty
/// line is a schema error.
inline std::vector<InstanceRecord> parse_prompts(std::string_view text,
                                                 const std::string& name = "<jsonl>") {
  std::vector<InstanceRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string where = name + ":" + std::to_string(line_no);
    if (line.empty()) throw Error(ErrorKind::SchemaError, where + ": empty line");
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::SchemaError, where + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorKind::SchemaError, where + ": not a JSON object");
    InstanceRecord rec;
    const auto prompt = obj.find("prompt");
    if (prompt == obj.end() || !prompt->is_string() || prompt->get<std::string>().empty()) {
      throw Error(ErrorKind::SchemaError, where + ": field 'prompt' must be a non-empty string");
    }
    rec.prompt = prompt->get<std::string>();
    const auto response = obj.find("response");
    if (response == obj.end() || !response->is_string()) {
      throw Error(ErrorKind::SchemaError, where + ": field 'response' must be a string");
    }
    rec.response = response->get<std::string>();
    if (const auto t = obj.find("template"); t != obj.end() && !t->is_null()) {
      if (!t->is_string() || t->get<std::string>().empty()) {
        throw Error(ErrorKind::SchemaError,
                    where + ": field 'template' must be a non-empty string");
      }
      rec.tmpl = t->get<std::string>();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<InstanceRecord> read_prompts(const fs::path& path) {
  return parse_prompts(detail::read_file(path), path.string());
}

inline void write_prompts(std::span<const InstanceRecord> records, const fs::path& path) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json obj = {{"prompt", r.prompt}, {"response", r.response}, {"template", r.tmpl}};
    out += obj.dump();
    out += '\n';
  }
  detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct TaskRecord {
  std::string task_id;
  fs::path prompts_path;     // resolved against the manifest directory
  fs::path embeddings_path;  // resolved against the manifest directory
  std::size_t instance_count = 0;
};

struct DatasetManifest {
  std::string version = "1";
  std::vector<TaskRecord> tasks;

  std::size_t total_instances() const {
    std::size_t n = 0;
    for (const auto& t : tasks) n += t.instance_count;
    return n;
  }
};

namespace detail {

/// Schema-only parse; collects issues instead of throwing so the validator can
/// report all of them. Throws only when the document is not a JSON object.
inline DatasetManifest parse_manifest_schema(const std::string& text, const fs::path& path,
                                             std::vector<Error>& issues) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::SchemaError, path.string() + ": not an object");

  DatasetManifest m;
  const auto version = doc.find("version");
  if (version == doc.end() || !version->is_string()) {
    issues.emplace_back(ErrorKind::SchemaError, "field 'version' must be a string");
  } else {
    m.version = version->get<std::string>();
    if (m.version != "1") {
      issues.emplace_back(ErrorKind::UnsupportedVersion, "manifest version '" + m.version + "'");
    }
  }
  const auto tasks = doc.find("tasks");
  if (tasks == doc.end() || !tasks->is_array()) {
    issues.emplace_back(ErrorKind::SchemaError, "field 'tasks' must be an array");
    return m;
  }
  if (tasks->empty()) issues.emplace_back(ErrorKind::SchemaError, "field 'tasks' is empty");

  const fs::path base = path.parent_path();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < tasks->size(); ++i) {
    const auto& t = (*tasks)[i];
    const std::string where = "tasks[" + std::to_string(i) + "]";
    if (!t.is_object()) {
      issues.emplace_back(ErrorKind::SchemaError, where + ": not an object");
      continue;
    }
    const auto str_field = [&](const char* key) -> std::optional<std::string> {
      const auto f = t.find(key);
      if (f == t.end() || !f->is_string() || f->get<std::string>().empty()) {
        issues.emplace_back(ErrorKind::SchemaError,
                            where + ": field '" + key + "' must be a non-empty string");
        return std::nullopt;
      }
      return f->get<std::string>();
    };
    auto id = str_field("task_id");
    auto prompts = str_field("prompts_path");
    auto embeddings = str_field("embeddings_path");
    const auto count = t.find("instance_count");
    if (count == t.end() || !count->is_number_unsigned()) {
      issues.emplace_back(ErrorKind::SchemaError,
                          where + ": field 'instance_count' must be a non-negative integer");
    }
    if (!id || !prompts || !embeddings || count == t.end() || !count->is_number_unsigned()) {
      continue;
    }
    if (!seen.insert(*id).second) {
      issues.emplace_back(ErrorKind::SchemaError, where + ": duplicate task_id '" + *id + "'");
      continue;
    }
    TaskRecord rec;
    rec.task_id = *id;
    rec.prompts_path = fs::path(*prompts).is_absolute() ? fs::path(*prompts) : base / *prompts;
    rec.embeddings_path =
        fs::path(*embeddings).is_absolute() ? fs::path(*embeddings) : base / *embeddings;
    rec.instance_count = count->get<std::size_t>();
    m.tasks.push_back(std::move(rec));
  }
  return m;
}

inline std::size_t count_prompt_lines(const TaskRecord& t) {
  return parse_prompts(read_file(t.prompts_path), t.prompts_path.string()).size();
}

}  // namespace detail

/// Parses the manifest and cross-checks every task's declared count against
/// its JSONL line count and SMEB row count. Throws on the first violation.
inline DatasetManifest load_manifest(const fs::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<Error> issues;
  DatasetManifest m = detail::parse_manifest_schema(text, path, issues);
  if (!issues.empty()) throw issues.front().with_context(path.string());
  for (const auto& t : m.tasks) {
    try {
      const std::size_t lines = detail::count_prompt_lines(t);
      const SmebHeader h = read_smeb_header(t.embeddings_path);
      if (lines != t.instance_count || h.n_rows != t.instance_count) {
        throw Error(ErrorKind::CountMismatch,
                    "task '" + t.task_id + "': instance_count=" +
                        std::to_string(t.instance_count) + ", JSONL lines=" +
                        std::to_string(lines) + ", SMEB rows=" + std::to_string(h.n_rows));
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::CountMismatch) throw;
      throw e.with_context("task '" + t.task_id + "'");
    }
  }
  return m;
}

/// Full validation: schema, counts, every embedding value, and a common
/// embedding dimension. Returns every violation found (empty when clean).
/// Missing or unreadable manifest files still throw.
inline std::vector<Error> validate_corpus(const fs::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<Error> issues;
  DatasetManifest m = detail::parse_manifest_schema(text, path, issues);
  std::optional<std::size_t> dim;
  for (const auto& t : m.tasks) {
    const std::string ctx = "task '" + t.task_id + "'";
    std::optional<std::size_t> lines;
    std::optional<std::size_t> rows;
    try {
      lines = detail::count_prompt_lines(t);
    } catch (const Error& e) {
      issues.push_back(e.with_context(ctx));
    }
    try {
      const EmbeddingMatrix em = read_smeb(t.embeddings_path);
      rows = em.n_rows();
      if (!dim) {
        dim = em.dim();
      } else if (*dim != em.dim()) {
        issues.emplace_back(ErrorKind::SchemaError, ctx + ": embedding dim " +
                                                        std::to_string(em.dim()) +
                                                        " differs from " + std::to_string(*dim));
      }
    } catch (const Error& e) {
      issues.push_back(e.with_context(ctx));
    }
    if ((lines && *lines != t.instance_count) || (rows && *rows != t.instance_count)) {
      issues.emplace_back(ErrorKind::CountMismatch,
                          ctx + ": instance_count=" + std::to_string(t.instance_count) +
                              (lines ? ", JSONL lines=" + std::to_string(*lines) : "") +
                              (rows ? ", SMEB rows=" + std::to_string(*rows) : ""));
    }
  }
  return issues;
}

inline std::string manifest_to_json(const DatasetManifest& m, const fs::path& relative_to) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : m.tasks) {
    tasks.push_back({{"task_id", t.task_id},
                     {"prompts_path", fs::relative(t.prompts_path, relative_to).string()},
                     {"embeddings_path", fs::relative(t.embeddings_path, relative_to).string()},
                     {"instance_count", t.instance_count}});
  }
  return dump_canonical({{"version", m.version}, {"tasks", tasks}});
}

/// Everything a pipeline stage needs from one task's files.
struct TaskData {
  std::vector<std::string> templates;  // per row
  EmbeddingMatrix embeddings;
};

inline TaskData load_task_data(const TaskRecord& t) {
  TaskData d;
  try {
    for (auto& r : read_prompts(t.prompts_path)) d.templates.push_back(std::move(r.tmpl));
    d.embeddings = read_smeb(t.embeddings_path);
  } catch (const Error& e) {
    throw e.with_context("task '" + t.task_id + "'");
  }
  if (d.templates.size() != t.instance_count || d.embeddings.n_rows() != t.instance_count) {
    throw Error(ErrorKind::CountMismatch, "task '" + t.task_id + "'");
  }
  return d;
}

/// Rows grouped by template tag, tags in canonical (lexicographic) order.
inline std::map<std::string, std::vector<std::size_t>> template_partitions(
    std::span<const std::string> templates) {
  std::map<std::string, std::vector<std::size_t>> parts;
  for (std::size_t i = 0; i < templates.size(); ++i) parts[templates[i]].push_back(i);
  return parts;
}

// ---------------------------------------------------------------------------
// Mixture manifest

struct TemplateSelection {
  std::string tag;
  std::size_t budget = 0;
  std::vector<std::size_t> rows;  // ascending global row indices

  friend bool operator==(const TemplateSelection&, const TemplateSelection&) = default;
};

struct MixtureEntry {
  std::string task_id;
  std::size_t position = 0;  // index in the dataset manifest
  std::optional<double> gain;
  std::optional<double> weight;
  std::size_t budget = 0;
  std::vector<TemplateSelection> selected;

  friend bool operator==(const MixtureEntry&, const MixtureEntry&) = default;
};

inline constexpr const char* kMixtureFormatVersion = "1";

struct MixtureManifest {
  std::string strategy;         // "smart", "epm" or "em"
  nlohmann::json config;        // echo of every parameter that shaped the output
  std::vector<MixtureEntry> tasks;  // SMART: greedy selection order
  std::string tool_version;

  std::size_t total_budget() const {
    std::size_t n = 0;
    for (const auto& t : tasks) n += t.budget;
    return n;
  }
  std::size_t total_selected() const {
    std::size_t n = 0;
    for (const auto& t : tasks)
      for (const auto& s : t.selected) n += s.rows.size();
    return n;
  }

  friend bool operator==(const MixtureManifest&, const MixtureManifest&) = default;
};

inline nlohmann::json to_json(const MixtureManifest& m) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : m.tasks) {
    nlohmann::json selected = nlohmann::json::object();
    for (const auto& s : t.selected) selected[s.tag] = {{"budget", s.budget}, {"rows", s.rows}};
    nlohmann::json e = {{"task_id", t.task_id},
                        {"position", t.position},
                        {"budget", t.budget},
                        {"selected", selected}};
    if (t.gain) e["gain"] = *t.gain;
    if (t.weight) e["weight"] = *t.weight;
    tasks.push_back(std::move(e));
  }
  return {{"format_version", kMixtureFormatVersion},
          {"strategy", m.strategy},
          {"config", m.config},
          {"tasks", tasks},
          {"total_selected", m.total_selected()},
          {"tool_version", m.tool_version}};
}

/// Canonical bytes: sorted keys, floats at 9 significant digits.
inline std::string serialize(const MixtureManifest& m) { return dump_canonical(to_json(m)); }

inline MixtureManifest parse_mixture(std::string_view text) {
  MixtureManifest m;
  try {
    const auto doc = nlohmann::json::parse(text);
    m.strategy = doc.at("strategy").get<std::string>();
    m.config = doc.at("config");
    m.tool_version = doc.at("tool_version").get<std::string>();
    for (const auto& t : doc.at("tasks")) {
      MixtureEntry e;
      e.task_id = t.at("task_id").get<std::string>();
      e.position = t.at("position").get<std::size_t>();
      e.budget = t.at("budget").get<std::size_t>();
      if (t.contains("gain")) e.gain = t["gain"].get<double>();
      if (t.contains("weight")) e.weight = t["weight"].get<double>();
      for (auto it = t.at("selected").begin(); it != t.at("selected").end(); ++it) {
        e.selected.push_back({it.key(), it.value().at("budget").get<std::size_t>(),
                              it.value().at("rows").get<std::vector<std::size_t>>()});
      }
      m.tasks.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("mixture manifest: ") + e.what());
  }
  return m;
}

/// Checks the manifest invariants against the corpus it was drawn from:
/// budgets sum to `instance_budget`, rows unique per task and in bounds.
inline std::vector<std::string> check_mixture(const MixtureManifest& m,
                                              std::size_t instance_budget,
                                              const DatasetManifest& corpus) {
  std::vector<std::string> problems;
  if (m.total_budget() != instance_budget) {
    problems.push_back("budgets sum to " + std::to_string(m.total_budget()) + ", expected " +
                       std::to_string(instance_budget));
  }
  for (const auto& t : m.tasks) {
    if (t.position >= corpus.tasks.size() || corpus.tasks[t.position].task_id != t.task_id) {
      problems.push_back("task '" + t.task_id + "' does not match manifest position");
      continue;
    }
    const std::size_t n = corpus.tasks[t.position].instance_count;
    std::set<std::size_t> rows;
    std::size_t template_budget = 0;
    for (const auto& s : t.selected) {
      template_budget += s.budget;
      if (s.rows.size() != s.budget) {
        problems.push_back("task '" + t.task_id + "' template '" + s.tag +
                           "' selected count differs from budget");
      }
      for (std::size_t r : s.rows) {
        if (r >= n) problems.push_back("task '" + t.task_id + "' row out of range");
        if (!rows.insert(r).second) problems.push_back("task '" + t.task_id + "' duplicate row");
      }
    }
    if (template_budget != t.budget) {
      problems.push_back("task '" + t.task_id + "' template budgets do not sum to task budget");
    }
  }
  return problems;
}

}  // namespace submix
