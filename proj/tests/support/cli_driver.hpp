#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "submix/cli.hpp"

namespace testing_support {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

/// Runs the CLI in-process; `args` excludes the program name.
inline CliResult run_cli(std::vector<std::string> args, const std::string& stdin_text = "",
                         const submix::cli::Environment& env = {}) {
  args.insert(args.begin(), "submix");
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  CliResult r;
  r.code = submix::cli::run(args, in, out, err, env);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace testing_support
