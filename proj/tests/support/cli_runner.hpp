#pragma once

// Runs the plankit binary through the shell and captures its streams.

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "support/temp_dir.hpp"

namespace plankit::testkit {

struct CliResult {
  int exit_code = -1;
  std::string out, err;
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

// `args` is appended verbatim, so callers quote paths themselves.
inline CliResult run_cli(const TempDir& scratch, const std::string& args) {
  static int counter = 0;
  const std::string tag = std::to_string(++counter);
  const std::string out = scratch / ("cli-" + tag + ".out"), err = scratch / ("cli-" + tag + ".err");
  const std::string cmd = shell_quote(PLANKIT_CLI) + " " + args + " >" + shell_quote(out) + " 2>" + shell_quote(err);
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace plankit::testkit
