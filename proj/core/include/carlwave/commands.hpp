#pragma once

#include <cstdint>
#include <string>

namespace carlwave {

/// Options shared by every subcommand, taken from the command line.
struct RunOptions {
  std::string config_path;
  std::string out_dir = ".";
  uint64_t seed = 1;
  int threads = 1;
};

/// Each command loads the config, runs, writes its outputs plus manifest.json
/// and effective_config.cfg into out_dir, and returns 0. Failures raise:
/// ConfigError (malformed input), NumericalError (non-finite results),
/// CheckFailure (a verification did not hold).
int cmd_forward(const RunOptions& opt);
int cmd_carleman_check(const RunOptions& opt);
int cmd_invert_source(const RunOptions& opt);
int cmd_invert_potential(const RunOptions& opt);
int cmd_stability_scan(const RunOptions& opt);

}  // namespace carlwave
