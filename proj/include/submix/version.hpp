#pragma once

#include <string>

namespace submix {

inline constexpr const char* kToolName = "submix";
inline constexpr const char* kToolVersion = "1.0.0";

inline std::string tool_version_string() { return std::string(kToolName) + " " + kToolVersion; }

}  // namespace submix
