// Command-line front end over the reachavoid C API.
#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "reachavoid/reachavoid.h"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInfeasible = 2, kConfigError = 3 };

int exit_code_for(ra_status st) {
  switch (st) {
    case RA_OK: return kOk;
    case RA_ERR_INFEASIBLE: return kInfeasible;
    case RA_ERR_INVALID_ARGUMENT:
    case RA_ERR_PARSE:
    case RA_ERR_IO:
    case RA_ERR_INSUFFICIENT_BATCH: return kConfigError;
    default: return kFailure;
  }
}

int finish(ra_status st, char* text) {
  if (text) {
    std::puts(text);
    ra_string_free(text);
  }
  if (st != RA_OK) std::fprintf(stderr, "raopt: %s\n", ra_last_error());
  return exit_code_for(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chance-constrained reach-avoid policy optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool audit = false;
  bool no_audit = false;
  std::string theta_out;
  int workers = -1;
  bool wall_clock = false;

  auto* run = app.add_subcommand("run", "Run the barrier optimizer from a config file");
  run->add_option("config", config_path, "Run config (JSON)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Master seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--audit", audit, "Evaluate every iterate exactly");
  run->add_flag("--no-audit", no_audit, "Skip the exact per-iterate evaluation");
  run->add_option("--theta-out", theta_out, "Returned iterate")->check(CLI::IsMember({"break", "final"}));
  run->add_option("--workers", workers, "Rollout threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  run->add_flag("--wall-clock", wall_clock, "Fill the wall_ms column");

  auto* audit_cmd = app.add_subcommand("audit", "Recount safe iterates of a finished run");
  audit_cmd->add_option("run-dir", run_dir, "Run directory")->required();

  auto* solve = app.add_subcommand("solve", "Exact constrained optimum for a config's environment");
  solve->add_option("config", config_path, "Run config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  char* text = nullptr;
  if (*run) {
    ra_run_overrides ov;
    ra_run_overrides_init(&ov);
    if (*seed_opt) {
      ov.has_seed = 1;
      ov.seed = seed;
    }
    if (!out_dir.empty()) ov.output_dir = out_dir.c_str();
    if (audit) ov.audit = 1;
    if (no_audit) ov.audit = 0;
    if (!theta_out.empty()) ov.theta_out = theta_out.c_str();
    ov.workers = workers;
    if (wall_clock) ov.wall_clock = 1;
    const ra_status st = ra_run_experiment(config_path.c_str(), &ov, &text);
    return finish(st, text);
  }
  const ra_status st =
      *audit_cmd ? ra_audit_run(run_dir.c_str(), &text) : ra_solve_config(config_path.c_str(), &text);
  return finish(st, text);
}
