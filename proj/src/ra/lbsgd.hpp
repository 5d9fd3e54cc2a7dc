#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ra/estimators.hpp"

namespace ra {

struct MfcqParams {
  double p = 0.0;
  double ell = 0.0;
  std::optional<double> mu_f;
};

struct BarrierConfig {
  double eta = 0.0;
  double delta = 0.0;
  double beta = 0.1;
  int n = 0;
  int iterations = 0;
  std::optional<MfcqParams> mfcq;
  std::optional<double> slater_margin;

  // Throws InvalidArgument or InsufficientBatch.
  void validate() const;
};

enum class ExitReason { Break, IterationCap, Infeasible };
std::string to_string(ExitReason reason);

// Break: stop at the first iteration with a small estimated barrier gradient.
// Final: ignore the break test and always return theta(I).
enum class ThetaOut { Break, Final };
std::string to_string(ThetaOut mode);
ThetaOut theta_out_from_string(const std::string& s);

/// Per-iteration log. Quantities not computed at an iteration are NaN.
struct IterateRecord {
  int iteration = 0;
  double vc_hat = 0.0;
  double alpha_lower = 0.0;
  double beta_upper = 0.0;
  double m_hat = 0.0;
  double gamma = 0.0;
  double grad_norm = 0.0;
  bool stepped = false;
  bool break_condition = false;
  std::optional<double> vr_exact;
  std::optional<double> vc_exact;
  std::optional<double> wall_ms;
  std::vector<double> theta;  // theta(i), the parameters that were evaluated
};

struct RunResult {
  std::vector<double> theta_out;
  std::vector<IterateRecord> records;
  ExitReason exit_reason = ExitReason::IterationCap;
  std::optional<int> break_iteration;
};

struct ConfidenceBounds {
  double alpha_lower = 0.0;
  double beta_upper = 0.0;
};

ConfidenceBounds confidence_bounds(double vc_hat, double delta, std::span<const double> grad_c_hat,
                                   std::span<const double> barrier_grad_hat, const ConcentrationWidths& widths,
                                   double beta);

double local_smoothness_estimate(double alpha_lower, double beta_upper, const SmoothnessConstants& consts,
                                 double eta);

double step_size(double m_hat, double alpha_lower, double beta_upper, const SmoothnessConstants& consts,
                 double grad_norm);

// Right-hand side of the step-size safety invariant.
double valid_region_radius(double alpha_lower, double beta_upper, const SmoothnessConstants& consts);

// max(min_n, min(cap, ceil(K * eta^-4 * ln(1/beta)))); cap <= 0 means none.
int batch_size_helper(double eta, double beta, double k = 1.0, int cap = 0);

struct GuaranteeConstants {
  double c = 0.0;
  double C = 0.0;
  double margin_target = 0.0;  // c * eta
  std::optional<double> eta_bound;
};

GuaranteeConstants guarantee_constants(const SmoothnessConstants& consts, const ScoreBounds& bounds, int horizon,
                                   double eta, const MfcqParams& mfcq, std::optional<double> slater_margin);

// Optional exact evaluation of each iterate, supplied by the caller.
using IterateAudit = std::function<std::pair<double, double>(const SoftmaxPolicy&)>;

struct RunOptions {
  SamplingOptions sampling;
  ThetaOut theta_out = ThetaOut::Break;
  IterateAudit audit;
  bool wall_clock = false;
};

RunResult lbsgd_run(const AugmentedEnv& env, const SoftmaxPolicy& initial, const BarrierConfig& config,
                    const RunOptions& options);

}  // namespace ra
