#pragma once

#include <cstdio>
#include <string>

#include "json.hpp"

namespace submix {

namespace detail {

inline void append_number(std::string& out, double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, value);
  out += buf;
}

inline bool is_scalar_array(const nlohmann::json& j) {
  for (const auto& e : j) {
    if (e.is_object() || e.is_array()) return false;
  }
  return true;
}

inline void write_canonical(std::string& out, const nlohmann::json& j, int precision,
                            int depth) {
  const auto indent = [&](int d) { out.append(static_cast<std::size_t>(2 * d), ' '); };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      // nlohmann::json objects are std::map-backed, so iteration is key-sorted.
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        indent(depth + 1);
        out += nlohmann::json(it.key()).dump();
        out += ": ";
        write_canonical(out, it.value(), precision, depth + 1);
      }
      out += "\n";
      indent(depth);
      out += "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (is_scalar_array(j)) {
        out += "[";
        bool first = true;
        for (const auto& e : j) {
          if (!first) out += ", ";
          first = false;
          write_canonical(out, e, precision, depth);
        }
        out += "]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ",\n";
        first = false;
        indent(depth + 1);
        write_canonical(out, e, precision, depth + 1);
      }
      out += "\n";
      indent(depth);
      out += "]";
      return;
    }
    case nlohmann::json::value_t::number_float:
      append_number(out, j.get<double>(), precision);
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace detail

/// Canonical JSON text: sorted keys, two-space indentation, scalar arrays on one
/// line, floats printed with `precision` significant digits, trailing newline.
/// Equal content always yields identical bytes.
inline std::string dump_canonical(const nlohmann::json& j, int precision = 9) {
  std::string out;
  detail::write_canonical(out, j, precision, 0);
  out += "\n";
  return out;
}

/// Precision that round-trips any double exactly; used for stage intermediates.
inline constexpr int kExactPrecision = 17;

}  // namespace submix
