#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ra/augmentation.hpp"
#include "ra/policy.hpp"

namespace ra {

/// n on-policy augmented trajectories together with the parameters that
/// generated them.
struct RolloutBatch {
  std::vector<AugTrajectory> trajectories;
  std::vector<double> theta;

  int size() const { return static_cast<int>(trajectories.size()); }
};

struct SamplingOptions {
  std::uint64_t master_seed = 0;
  // Distinguishes independent batches drawn from one master seed (the
  // optimizer passes the iteration index).
  std::uint64_t family = 0;
  // 0 selects std::thread::hardware_concurrency().
  int workers = 1;
};

// Trajectory i always uses the stream derive_seed(master_seed, family, i).
RolloutBatch collect_batch(const AugmentedEnv& env, const SoftmaxPolicy& policy, int n,
                           const SamplingOptions& options);

double estimate_constraint_value(const RolloutBatch& batch);
std::vector<double> estimate_reward_gradient(const RolloutBatch& batch, const SoftmaxPolicy& policy);
std::vector<double> estimate_constraint_gradient(const RolloutBatch& batch, const SoftmaxPolicy& policy);

struct BatchEstimates {
  double vc_hat = 0.0;
  std::vector<double> grad_r;
  std::vector<double> grad_c;
};

// Rollouts and all three estimators in one pass without storing the batch.
// Bit-identical to collect_batch followed by the three estimators.
BatchEstimates sample_estimates(const AugmentedEnv& env, const SoftmaxPolicy& policy, int n,
                                const SamplingOptions& options);

std::vector<double> barrier_gradient(std::span<const double> grad_r, std::span<const double> grad_c,
                                     double vc_hat, double eta, double delta);

struct SmoothnessConstants {
  double lipschitz_reward = 0.0;    // L_r
  double lipschitz_constraint = 0.0;  // L_c
  double smooth_reward = 0.0;       // M_r
  double smooth_constraint = 0.0;   // M_c
};

SmoothnessConstants smoothness_constants(const ScoreBounds& bounds, int horizon);

struct ConcentrationWidths {
  double value_constraint = 0.0;     // sigma_c^0(n)
  double gradient_reward = 0.0;      // sigma_r^1(n)
  double gradient_constraint = 0.0;  // sigma_c^1(n)
  int min_batch = 0;
};

int min_batch_size(double beta);
ConcentrationWidths concentration_widths(int n, double beta, const SmoothnessConstants& consts);

// Fixed-shape pairwise reduction shared by every estimator path. Exposed for
// the determinism tests.
inline constexpr int kReductionChunk = 256;

}  // namespace ra
