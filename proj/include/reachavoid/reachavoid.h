#ifndef REACHAVOID_H
#define REACHAVOID_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(RA_BUILDING_LIBRARY)
#    define RA_API __declspec(dllexport)
#  else
#    define RA_API __declspec(dllimport)
#  endif
#else
#  define RA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ra_status {
  RA_OK = 0,
  RA_ERR_INVALID_ARGUMENT = 1,
  RA_ERR_PARSE = 2,
  RA_ERR_IO = 3,
  RA_ERR_INFEASIBLE = 4,
  RA_ERR_DOMAIN = 5,
  RA_ERR_INSUFFICIENT_BATCH = 6,
  RA_ERR_UNSUPPORTED = 7,
  RA_ERR_INTERNAL = 8
} ra_status;

/* Opaque reach-avoid environment: base MDP plus safe and goal sets. */
typedef struct ra_env ra_env;

/* Message of the last failing call on this thread, or "" after success. */
RA_API const char* ra_last_error(void);
RA_API const char* ra_version(void);

/* Strings returned through char** are owned by the caller. */
RA_API void ra_string_free(char* s);

RA_API ra_status ra_env_example1(ra_env** out);
RA_API ra_status ra_env_gridworld(const char* params_json, ra_env** out);
RA_API ra_status ra_env_from_json(const char* mdp_json, ra_env** out);
RA_API ra_status ra_env_load(const char* path, ra_env** out);
RA_API void ra_env_free(ra_env* env);

RA_API ra_status ra_env_dims(const ra_env* env, int* num_states, int* num_actions, int* horizon);
RA_API ra_status ra_env_to_json(const ra_env* env, char** json_out);

/* Largest reach-avoid probability over all policies. */
RA_API ra_status ra_max_constraint_value(const ra_env* env, double* out);

/* Constrained optimum at threshold delta; RA_ERR_INFEASIBLE when no policy
 * reaches delta. */
RA_API ra_status ra_solve_cmdp(const ra_env* env, double delta, double* value, double* constraint,
                               double* lambda);

/* Exact values of a Markov policy on the augmented space. probs holds
 * horizon * (3 * num_states) * num_actions entries ordered (t, 3*s + y, a). */
RA_API ra_status ra_evaluate_policy(const ra_env* env, const double* probs, size_t len, double* reward,
                                    double* constraint);

/* Counts of trajectories in [0, n) whose terminal aux value disagrees with
 * the reach-avoid predicate on the base path under the uniform policy. */
RA_API ra_status ra_check_augmentation(const ra_env* env, uint64_t seed, int n, int* mismatches);

typedef struct ra_run_overrides {
  int has_seed;
  uint64_t seed;
  const char* output_dir; /* NULL keeps the config value */
  int audit;              /* -1 keep, 0 off, 1 on */
  const char* theta_out;  /* NULL, "break" or "final" */
  int workers;            /* -1 keep */
  int wall_clock;         /* -1 keep, 0 off, 1 on */
} ra_run_overrides;

RA_API void ra_run_overrides_init(ra_run_overrides* ov);

/* Runs the barrier optimizer described by a config file. On RA_OK or
 * RA_ERR_INFEASIBLE the run summary is returned in summary_json. */
RA_API ra_status ra_run_experiment(const char* config_path, const ra_run_overrides* ov, char** summary_json);

RA_API ra_status ra_audit_run(const char* run_dir, char** report_json);
RA_API ra_status ra_solve_config(const char* config_path, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
