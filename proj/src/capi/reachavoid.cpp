#include "reachavoid/reachavoid.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "ra/error.hpp"
#include "ra/harness.hpp"

struct ra_env {
  ra::EnvInstance inst;
  ra::AugmentedMdp aug;

  explicit ra_env(ra::EnvInstance e) : inst(std::move(e)), aug(ra::build_augmented_finite(inst.mdp, inst.spec)) {}
};

namespace {

thread_local std::string g_last_error;

ra_status to_status(ra::ErrorCode code) {
  switch (code) {
    case ra::ErrorCode::InvalidArgument: return RA_ERR_INVALID_ARGUMENT;
    case ra::ErrorCode::Parse: return RA_ERR_PARSE;
    case ra::ErrorCode::Io: return RA_ERR_IO;
    case ra::ErrorCode::Infeasible: return RA_ERR_INFEASIBLE;
    case ra::ErrorCode::BarrierDomain: return RA_ERR_DOMAIN;
    case ra::ErrorCode::InsufficientBatch: return RA_ERR_INSUFFICIENT_BATCH;
    case ra::ErrorCode::Unsupported: return RA_ERR_UNSUPPORTED;
    case ra::ErrorCode::Internal: return RA_ERR_INTERNAL;
  }
  return RA_ERR_INTERNAL;
}

template <class Fn>
ra_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const ra::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return RA_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RA_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) ra::fail(ra::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ra_status make_env(ra::EnvInstance inst, ra_env** out) {
  if (const auto issues = ra::validate_mdp(inst.mdp, inst.spec); !issues.empty()) {
    ra::fail(ra::ErrorCode::InvalidArgument, issues.front().message);
  }
  *out = new ra_env(std::move(inst));
  return RA_OK;
}

}  // namespace

extern "C" {

const char* ra_last_error(void) { return g_last_error.c_str(); }

const char* ra_version(void) { return "1.0.0"; }

void ra_string_free(char* s) { std::free(s); }

ra_status ra_env_example1(ra_env** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    return make_env(ra::example1(), out);
  });
}

ra_status ra_env_gridworld(const char* params_json, ra_env** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    const auto doc = params_json ? nlohmann::json::parse(params_json) : nlohmann::json::object();
    return make_env(ra::gridworld(ra::gridworld_spec_from_json(doc)), out);
  });
}

ra_status ra_env_from_json(const char* mdp_json, ra_env** out) {
  return guarded([&] {
    require(out != nullptr && mdp_json != nullptr, "null argument");
    ra::MdpDocument doc = ra::mdp_from_json(nlohmann::json::parse(mdp_json));
    return make_env({std::move(doc.mdp), std::move(doc.spec)}, out);
  });
}

ra_status ra_env_load(const char* path, ra_env** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "null argument");
    ra::MdpDocument doc = ra::load_mdp_file(path);
    return make_env({std::move(doc.mdp), std::move(doc.spec)}, out);
  });
}

void ra_env_free(ra_env* env) { delete env; }

ra_status ra_env_dims(const ra_env* env, int* num_states, int* num_actions, int* horizon) {
  return guarded([&] {
    require(env != nullptr, "null environment");
    if (num_states) *num_states = env->inst.mdp.num_states();
    if (num_actions) *num_actions = env->inst.mdp.num_actions();
    if (horizon) *horizon = env->inst.mdp.horizon();
    return RA_OK;
  });
}

ra_status ra_env_to_json(const ra_env* env, char** json_out) {
  return guarded([&] {
    require(env != nullptr && json_out != nullptr, "null argument");
    *json_out = dup_string(ra::mdp_to_json(env->inst.mdp, env->inst.spec).dump());
    return RA_OK;
  });
}

ra_status ra_max_constraint_value(const ra_env* env, double* out) {
  return guarded([&] {
    require(env != nullptr && out != nullptr, "null argument");
    *out = ra::max_constraint_value(env->aug);
    return RA_OK;
  });
}

ra_status ra_solve_cmdp(const ra_env* env, double delta, double* value, double* constraint, double* lambda) {
  return guarded([&] {
    require(env != nullptr, "null environment");
    const ra::CmdpSolution sol = ra::solve_cmdp(env->aug, delta);
    if (value) *value = sol.value;
    if (constraint) *constraint = sol.constraint;
    if (lambda) *lambda = sol.lambda;
    return RA_OK;
  });
}

ra_status ra_evaluate_policy(const ra_env* env, const double* probs, size_t len, double* reward,
                             double* constraint) {
  return guarded([&] {
    require(env != nullptr && probs != nullptr, "null argument");
    const ra::FiniteMdp& mdp = env->aug.mdp;
    const int H = mdp.horizon();
    const int N = mdp.num_states();
    const int A = mdp.num_actions();
    require(len == static_cast<size_t>(H) * N * A, "probability table has the wrong length");
    ra::MarkovPolicy policy(H, N, A);
    for (int t = 0; t < H; ++t) {
      for (int s = 0; s < N; ++s) {
        auto p = policy.probs(t, s);
        double total = 0.0;
        for (int a = 0; a < A; ++a) {
          p[a] = probs[(static_cast<size_t>(t) * N + s) * A + a];
          require(p[a] >= 0.0, "negative action probability");
          total += p[a];
        }
        require(std::abs(total - 1.0) <= 1e-9, "action probabilities must sum to one");
      }
    }
    const ra::ValuePair v = ra::exact_initial_values(env->aug, policy);
    if (reward) *reward = v.reward;
    if (constraint) *constraint = v.constraint;
    return RA_OK;
  });
}

ra_status ra_check_augmentation(const ra_env* env, uint64_t seed, int n, int* mismatches) {
  return guarded([&] {
    require(env != nullptr && mismatches != nullptr, "null argument");
    require(n >= 0, "negative sample count");
    const ra::AugmentedEnv aenv(env->inst.mdp, env->inst.spec);
    const ra::MarkovPolicy uniform =
        ra::MarkovPolicy::uniform(aenv.horizon(), aenv.num_aug_states(), aenv.num_actions());
    int bad = 0;
    ra::AugTrajectory traj;
    for (int i = 0; i < n; ++i) {
      ra::RandomStream rng(ra::derive_seed(seed, 0, static_cast<std::uint64_t>(i)));
      ra::augmented_rollout_into(aenv, uniform, rng, traj);
      const bool sat = ra::satisfies_reach_avoid(traj.base_states(), env->inst.spec);
      bad += (traj.constraint == 1) != sat ? 1 : 0;
    }
    *mismatches = bad;
    return RA_OK;
  });
}

void ra_run_overrides_init(ra_run_overrides* ov) {
  if (!ov) return;
  ov->has_seed = 0;
  ov->seed = 0;
  ov->output_dir = nullptr;
  ov->audit = -1;
  ov->theta_out = nullptr;
  ov->workers = -1;
  ov->wall_clock = -1;
}

ra_status ra_run_experiment(const char* config_path, const ra_run_overrides* ov, char** summary_json) {
  return guarded([&] {
    require(config_path != nullptr, "null config path");
    ra::RunConfig config = ra::load_run_config(config_path);
    if (ov) {
      if (ov->has_seed) config.seed = ov->seed;
      if (ov->output_dir) config.output_dir = ov->output_dir;
      if (ov->audit >= 0) config.oracle_audit = ov->audit != 0;
      if (ov->theta_out) config.theta_out = ra::theta_out_from_string(ov->theta_out);
      if (ov->workers >= 0) config.workers = ov->workers;
      if (ov->wall_clock >= 0) config.wall_clock = ov->wall_clock != 0;
    }
    const ra::RunOutcome outcome = ra::run_experiment(config);
    if (summary_json) *summary_json = dup_string(outcome.summary.dump(2));
    if (outcome.exit_code == 2) {
      g_last_error = "no feasible step taken, exit reason " + outcome.summary.value("exit_reason", std::string());
      return RA_ERR_INFEASIBLE;
    }
    return RA_OK;
  });
}

ra_status ra_audit_run(const char* run_dir, char** report_json) {
  return guarded([&] {
    require(run_dir != nullptr && report_json != nullptr, "null argument");
    *report_json = dup_string(ra::audit_run_dir(run_dir).dump(2));
    return RA_OK;
  });
}

ra_status ra_solve_config(const char* config_path, char** report_json) {
  return guarded([&] {
    require(config_path != nullptr && report_json != nullptr, "null argument");
    *report_json = dup_string(ra::solve_report(ra::load_run_config(config_path)).dump(2));
    return RA_OK;
  });
}

}  // extern "C"
