#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ra/envs.hpp"
#include "ra/lbsgd.hpp"
#include "ra/oracle.hpp"

namespace ra {

struct EnvConfig {
  std::string name = "example1";  // example1 | gridworld | file
  GridWorldSpec grid;
  std::string file;
};

/// How theta(0) is chosen. "uniform" sets every logit to zero; "slater"
/// puts `logit` on the constraint-maximizing action wherever actions differ
/// in their maximal reach-avoid probability.
struct PolicyInit {
  std::string kind = "slater";
  double logit = 2.5;
};

struct BatchRule {
  double k = 1.0;
  int cap = 20000;
};

struct RunConfig {
  EnvConfig env;
  std::string policy = "tabular_softmax";  // or state_softmax (ignores y)
  PolicyInit init;
  double eta = 0.02;
  double delta = 0.4;
  double beta = 0.1;
  std::optional<int> n;
  BatchRule n_rule;
  int iterations = 500;
  std::uint64_t seed = 0;
  bool oracle_audit = true;
  std::string output_dir = "runs/latest";
  ThetaOut theta_out = ThetaOut::Break;
  int workers = 1;
  bool wall_clock = false;
  std::optional<MfcqParams> mfcq;

  int batch_size() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path);

EnvInstance make_env(const EnvConfig& env);
SoftmaxPolicy make_policy(const RunConfig& config, const AugmentedMdp& aug);

struct RunOutcome {
  int exit_code = 0;  // 0 success, 2 infeasible
  nlohmann::json summary;
};

// Throws ra::Error for configuration or I/O problems.
RunOutcome run_experiment(const RunConfig& config);

struct AuditReport {
  int iterates = 0;
  int safe = 0;
  double safe_fraction = 0.0;
  double min_margin = 0.0;
  std::vector<double> vc_exact;
};

AuditReport audit_iterates(const AugmentedMdp& aug, const SoftmaxPolicy& shape,
                           const std::vector<std::vector<double>>& thetas, double delta);

// Recomputes exact V_c for every iterate logged in a run directory.
nlohmann::json audit_run_dir(const std::string& run_dir);

nlohmann::json solve_report(const RunConfig& config);

// %.17g, or an empty string for NaN.
std::string format_number(double x);

inline constexpr const char* kCsvHeader =
    "iter,vc_hat,alpha_lower,beta_upper,m_hat,gamma,grad_norm,vr_exact,vc_exact,wall_ms";

}  // namespace ra
