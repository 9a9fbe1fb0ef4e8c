// Command-line front end: forward simulation, inequality verification, and
// coefficient recovery for the boundary-observation wave problem.

#include <cstdio>
#include <exception>
#include <functional>
#include <string>

#include "CLI11.hpp"
#include "carlwave/commands.hpp"
#include "carlwave/errors.hpp"

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheckFailed = 4;

void add_common(CLI::App* cmd, carlwave::RunOptions& opt) {
  cmd->add_option("--config", opt.config_path, "Run configuration file")->required();
  cmd->add_option("--out", opt.out_dir, "Output directory (created if missing)");
  cmd->add_option("--seed", opt.seed, "Seed for every pseudorandom draw");
  cmd->add_option("--threads", opt.threads, "Worker threads for ensemble scans");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wave-equation observation laboratory: simulate boundary flux, "
               "verify weighted-inequality machinery, and recover coefficients."};
  app.require_subcommand(1);

  carlwave::RunOptions opt;
  std::function<int()> run;

  CLI::App* forward = app.add_subcommand("forward", "Solve the forward problems and export flux data");
  add_common(forward, opt);
  forward->callback([&]() { run = [&]() { return carlwave::cmd_forward(opt); }; });

  CLI::App* check = app.add_subcommand("carleman-check",
                                       "Verify weight admissibility, operator identities, and "
                                       "estimate threshold constants");
  add_common(check, opt);
  check->callback([&]() { run = [&]() { return carlwave::cmd_carleman_check(opt); }; });

  CLI::App* inv_src = app.add_subcommand("invert-source", "Recover a source factor from flux data");
  add_common(inv_src, opt);
  inv_src->callback([&]() { run = [&]() { return carlwave::cmd_invert_source(opt); }; });

  CLI::App* inv_pot = app.add_subcommand("invert-potential",
                                         "Recover the zero-order coefficient from flux data");
  add_common(inv_pot, opt);
  inv_pot->callback([&]() { run = [&]() { return carlwave::cmd_invert_potential(opt); }; });

  CLI::App* scan = app.add_subcommand("stability-scan",
                                      "Empirical stability and regularity constants over "
                                      "pseudorandom ensembles");
  add_common(scan, opt);
  scan->callback([&]() { run = [&]() { return carlwave::cmd_stability_scan(opt); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitConfig;
  }

  try {
    return run();
  } catch (const carlwave::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const carlwave::CheckFailure& e) {
    std::fprintf(stderr, "check failed: %s\n", e.what());
    return kExitCheckFailed;
  } catch (const carlwave::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
}
