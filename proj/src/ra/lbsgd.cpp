#include "ra/lbsgd.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "ra/error.hpp"

namespace ra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

}  // namespace

void BarrierConfig::validate() const {
  if (!(eta > 0.0)) fail(ErrorCode::InvalidArgument, "eta must be positive");
  if (!(delta >= 0.0 && delta < 1.0)) fail(ErrorCode::InvalidArgument, "delta must lie in [0,1)");
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorCode::InvalidArgument, "beta must lie in (0,1)");
  if (iterations < 1) fail(ErrorCode::InvalidArgument, "iteration cap must be at least 1");
  const int min_n = min_batch_size(beta);
  if (n < min_n) {
    fail(ErrorCode::InsufficientBatch,
         "batch size " + std::to_string(n) + " is below the minimum " + std::to_string(min_n));
  }
  if (mfcq && !(mfcq->p > 0.0 && mfcq->ell > 0.0)) {
    fail(ErrorCode::InvalidArgument, "MFCQ parameters p and ell must be positive");
  }
}

std::string to_string(ExitReason reason) {
  switch (reason) {
    case ExitReason::Break: return "break";
    case ExitReason::IterationCap: return "iteration_cap";
    case ExitReason::Infeasible: return "infeasible";
  }
  return "unknown";
}

std::string to_string(ThetaOut mode) { return mode == ThetaOut::Break ? "break" : "final"; }

ThetaOut theta_out_from_string(const std::string& s) {
  if (s == "break") return ThetaOut::Break;
  if (s == "final") return ThetaOut::Final;
  fail(ErrorCode::InvalidArgument, "theta_out must be 'break' or 'final'");
}

ConfidenceBounds confidence_bounds(double vc_hat, double delta, std::span<const double> grad_c_hat,
                                   std::span<const double> barrier_grad_hat, const ConcentrationWidths& widths,
                                   double beta) {
  if (grad_c_hat.size() != barrier_grad_hat.size()) fail(ErrorCode::InvalidArgument, "gradient dimensions differ");
  ConfidenceBounds b;
  b.alpha_lower = vc_hat - delta - widths.value_constraint * std::sqrt(std::log(2.0 / beta));
  const double g = norm(barrier_grad_hat);
  double inner = 0.0;
  if (g > 0.0) {
    inner = std::inner_product(grad_c_hat.begin(), grad_c_hat.end(), barrier_grad_hat.begin(), 0.0) / g;
  }
  b.beta_upper = std::abs(inner) + widths.gradient_constraint * std::sqrt(0.25 - std::log(beta));
  return b;
}

double local_smoothness_estimate(double alpha_lower, double beta_upper, const SmoothnessConstants& consts,
                                 double eta) {
  if (!(alpha_lower > 0.0)) fail(ErrorCode::Infeasible, "lower confidence bound is not positive");
  return consts.smooth_reward + 10.0 * consts.smooth_constraint * eta / alpha_lower +
         8.0 * eta * beta_upper * beta_upper / (alpha_lower * alpha_lower);
}

double valid_region_radius(double alpha_lower, double beta_upper, const SmoothnessConstants& consts) {
  return alpha_lower / (std::sqrt(consts.smooth_constraint * alpha_lower) + 2.0 * beta_upper);
}

double step_size(double m_hat, double alpha_lower, double beta_upper, const SmoothnessConstants& consts,
                 double grad_norm) {
  if (!(alpha_lower > 0.0)) fail(ErrorCode::Infeasible, "lower confidence bound is not positive");
  if (!(grad_norm > 0.0)) fail(ErrorCode::InvalidArgument, "gradient norm must be positive");
  return std::min(1.0 / m_hat, valid_region_radius(alpha_lower, beta_upper, consts) / grad_norm);
}

int batch_size_helper(double eta, double beta, double k, int cap) {
  if (!(eta > 0.0)) fail(ErrorCode::InvalidArgument, "eta must be positive");
  if (!(k > 0.0)) fail(ErrorCode::InvalidArgument, "batch constant must be positive");
  const int min_n = min_batch_size(beta);
  const double raw = std::ceil(k * std::pow(eta, -4.0) * std::log(1.0 / beta));
  double n = raw;
  if (cap > 0) n = std::min(n, static_cast<double>(cap));
  n = std::min(n, static_cast<double>(std::numeric_limits<int>::max()));
  return std::max(min_n, static_cast<int>(n));
}

GuaranteeConstants guarantee_constants(const SmoothnessConstants& consts, const ScoreBounds& bounds, int horizon,
                                   double eta, const MfcqParams& mfcq, std::optional<double> slater_margin) {
  GuaranteeConstants out;
  const double lr2 = consts.lipschitz_reward * consts.lipschitz_reward;
  const double mr = consts.smooth_reward;
  out.c = mfcq.ell / (24.0 * consts.lipschitz_constraint);
  const double c = out.c;
  const double worst = std::max(4.0 + 5.0 * mr * c / lr2, 1.0 + std::sqrt(mr * c * eta / (4.0 * lr2)));
  out.C = c / (2.0 * lr2 * (1.0 + 1.0 / c) * worst);
  out.margin_target = c * eta;
  if (mfcq.mu_f && *mfcq.mu_f > 0.0) {
    double bound = std::min(mfcq.p, std::sqrt(8.0 * std::sqrt(static_cast<double>(horizon)) * bounds.gradient /
                                              (out.C * *mfcq.mu_f)));
    if (slater_margin) bound = std::min(bound, *slater_margin);
    out.eta_bound = bound;
  }
  return out;
}

RunResult lbsgd_run(const AugmentedEnv& env, const SoftmaxPolicy& initial, const BarrierConfig& config,
                    const RunOptions& options) {
  config.validate();
  if (initial.horizon() != env.horizon() || initial.num_aug_states() != env.num_aug_states() ||
      initial.num_actions() != env.num_actions()) {
    fail(ErrorCode::InvalidArgument, "policy shape does not match the environment");
  }
  const SmoothnessConstants consts = smoothness_constants(initial.score_bounds(), env.horizon());
  const ConcentrationWidths widths = concentration_widths(config.n, config.beta, consts);

  SoftmaxPolicy policy = initial;
  RunResult result;
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  for (int i = 0; i < config.iterations; ++i) {
    IterateRecord rec;
    rec.iteration = i;
    rec.theta.assign(policy.params().begin(), policy.params().end());
    rec.alpha_lower = rec.beta_upper = rec.m_hat = rec.gamma = rec.grad_norm = kNaN;
    if (options.audit) {
      const auto [vr, vc] = options.audit(policy);
      rec.vr_exact = vr;
      rec.vc_exact = vc;
    }

    SamplingOptions sampling = options.sampling;
    sampling.family = static_cast<std::uint64_t>(i);
    const BatchEstimates est = sample_estimates(env, policy, config.n, sampling);
    rec.vc_hat = est.vc_hat;

    auto finish = [&](ExitReason reason) {
      if (options.wall_clock) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      }
      result.records.push_back(std::move(rec));
      result.exit_reason = reason;
    };

    if (!(est.vc_hat > config.delta)) {
      rec.alpha_lower = est.vc_hat - config.delta - widths.value_constraint * std::sqrt(std::log(2.0 / config.beta));
      finish(ExitReason::Infeasible);
      break;
    }
    const std::vector<double> grad_b =
        barrier_gradient(est.grad_r, est.grad_c, est.vc_hat, config.eta, config.delta);
    const double gnorm = norm(grad_b);
    rec.grad_norm = gnorm;
    const ConfidenceBounds cb = confidence_bounds(est.vc_hat, config.delta, est.grad_c, grad_b, widths, config.beta);
    rec.alpha_lower = cb.alpha_lower;
    rec.beta_upper = cb.beta_upper;
    if (!(cb.alpha_lower > 0.0)) {
      finish(ExitReason::Infeasible);
      break;
    }

    rec.break_condition = gnorm <= config.eta / 2.0;
    if (rec.break_condition && !result.break_iteration) result.break_iteration = i;
    if (rec.break_condition && options.theta_out == ThetaOut::Break) {
      finish(ExitReason::Break);
      break;
    }
    if (gnorm == 0.0) {
      // Zero estimate with the break test disabled: nothing to step along.
      finish(ExitReason::IterationCap);
      continue;
    }

    rec.m_hat = local_smoothness_estimate(cb.alpha_lower, cb.beta_upper, consts, config.eta);
    rec.gamma = step_size(rec.m_hat, cb.alpha_lower, cb.beta_upper, consts, gnorm);
    std::vector<double> theta(policy.params().begin(), policy.params().end());
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] += rec.gamma * grad_b[k];
    policy.set_params(std::move(theta));
    rec.stepped = true;
    finish(ExitReason::IterationCap);
  }
  result.theta_out.assign(policy.params().begin(), policy.params().end());
  return result;
}

}  // namespace ra
