#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ra/augmentation.hpp"
#include "ra/policy.hpp"

namespace ra {

/// Backward-induction values of a fixed Markov policy for both the reward
/// and the terminal-constraint channel. V is indexed t in [0, H], Q and the
/// advantages t in [0, H-1].
class ExactValues {
 public:
  ExactValues(int horizon, int num_states, int num_actions);

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  double& v_r(int t, int s) { return v_r_[vidx(t, s)]; }
  double& v_c(int t, int s) { return v_c_[vidx(t, s)]; }
  double& q_r(int t, int s, int a) { return q_r_[qidx(t, s, a)]; }
  double& q_c(int t, int s, int a) { return q_c_[qidx(t, s, a)]; }
  double v_r(int t, int s) const { return v_r_[vidx(t, s)]; }
  double v_c(int t, int s) const { return v_c_[vidx(t, s)]; }
  double q_r(int t, int s, int a) const { return q_r_[qidx(t, s, a)]; }
  double q_c(int t, int s, int a) const { return q_c_[qidx(t, s, a)]; }
  double adv_r(int t, int s, int a) const { return q_r(t, s, a) - v_r(t, s); }
  double adv_c(int t, int s, int a) const { return q_c(t, s, a) - v_c(t, s); }

 private:
  std::size_t vidx(int t, int s) const { return static_cast<std::size_t>(t) * num_states_ + s; }
  std::size_t qidx(int t, int s, int a) const {
    return (static_cast<std::size_t>(t) * num_states_ + s) * num_actions_ + a;
  }

  int horizon_;
  int num_states_;
  int num_actions_;
  std::vector<double> v_r_, v_c_, q_r_, q_c_;
};

ExactValues exact_policy_eval(const FiniteMdp& mdp, const MarkovPolicy& policy,
                              std::span<const double> terminal_constraint);
inline ExactValues exact_policy_eval(const AugmentedMdp& aug, const MarkovPolicy& policy) {
  return exact_policy_eval(aug.mdp, policy, aug.terminal_constraint);
}

/// State-action occupancy d_t(s, a) from the MDP's initial state.
class OccupancyMeasure {
 public:
  OccupancyMeasure(int horizon, int num_states, int num_actions);

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double& at(int t, int s, int a) { return d_[idx(t, s, a)]; }
  double at(int t, int s, int a) const { return d_[idx(t, s, a)]; }
  double state_mass(int t, int s) const;

  // w * this + (1 - w) * other
  OccupancyMeasure blend(const OccupancyMeasure& other, double w) const;

 private:
  std::size_t idx(int t, int s, int a) const {
    return (static_cast<std::size_t>(t) * num_states_ + s) * num_actions_ + a;
  }
  int horizon_;
  int num_states_;
  int num_actions_;
  std::vector<double> d_;
};

OccupancyMeasure exact_occupancy(const FiniteMdp& mdp, const MarkovPolicy& policy);

struct PolicyGradient {
  std::vector<double> reward;
  std::vector<double> constraint;
};

PolicyGradient exact_policy_gradient(const AugmentedMdp& aug, const SoftmaxPolicy& policy);

// Exact V_r,0 and V_c,0 at the initial augmented state.
struct ValuePair {
  double reward = 0.0;
  double constraint = 0.0;
};
ValuePair exact_initial_values(const AugmentedMdp& aug, const MarkovPolicy& policy);

/// Deterministic Markov policy on the augmented space: one action per (t, s~).
struct DeterministicPolicy {
  int horizon = 0;
  int num_states = 0;
  std::vector<ActionId> action;

  ActionId at(int t, int s) const { return action[static_cast<std::size_t>(t) * num_states + s]; }
  MarkovPolicy to_markov(int num_actions) const;
};

/// Constrained optimum as a trajectory-level mixture of at most two
/// deterministic policies: run policies[0] with probability weights[0], etc.
struct CmdpSolution {
  double value = 0.0;
  double constraint = 0.0;
  double lambda = 0.0;
  std::vector<DeterministicPolicy> policies;
  std::vector<double> weights;
  std::vector<ValuePair> component_values;

  OccupancyMeasure occupancy(const AugmentedMdp& aug) const;
  // Single randomized Markov policy with the mixture's occupancy.
  MarkovPolicy markov_policy(const AugmentedMdp& aug) const;
};

struct DualSettings {
  int iterations = 60;
  // Initial upper end of the multiplier bracket; 0 means H + 1.
  double lambda_max = 0.0;
};

CmdpSolution solve_cmdp(const AugmentedMdp& aug, double delta, const DualSettings& settings = {});

struct SlaterReport {
  double max_value = 0.0;
  std::optional<double> margin;  // nu_s = max_value - delta
  bool satisfied = true;
};

double max_constraint_value(const AugmentedMdp& aug);
SlaterReport slater_check(const AugmentedMdp& aug, double delta);

// Greedy deterministic policy for the scalarized terminal payoff
// r + lambda * c, ties broken toward the lowest action index.
DeterministicPolicy greedy_lagrangian_policy(const AugmentedMdp& aug, double lambda);

/// Independent checks by enumeration.
struct BruteForceResult {
  double value = 0.0;
  double constraint = 0.0;
  std::uint64_t policies_evaluated = 0;
  bool feasible = false;
};

// Enumerates all deterministic Markov policies on the reachable (t, s~)
// decision points and returns the best trajectory-level mixture of at most
// two of them that meets the constraint.
BruteForceResult brute_force_cmdp(const AugmentedMdp& aug, double delta, std::uint64_t max_policies = 1u << 22);

// Grid search over randomized Markov policies of the base MDP (ignoring the
// aux component), with action probabilities on a simplex grid of spacing
// 1/resolution at every reachable decision point.
struct StateMarkovSearch {
  BruteForceResult best;
  MarkovPolicy policy;  // on the augmented space, constant in y
};
StateMarkovSearch brute_force_state_markov(const FiniteMdp& mdp, const ReachAvoidSpec& spec, double delta,
                                           int resolution, std::uint64_t max_policies = 5'000'000);

struct FisherReport {
  std::vector<std::vector<double>> matrices;  // row-major block-size^2 per t
  std::vector<std::vector<double>> eigenvalues;
  std::vector<std::optional<double>> min_nonzero_eigenvalue;
  std::optional<double> mu_f;
};

inline constexpr double kEigenCutoff = 1e-10;

FisherReport fisher_report(const AugmentedMdp& aug, const SoftmaxPolicy& policy);

struct TransferErrorReport {
  // residual[k][t], k = 0 reward, k = 1 constraint
  std::vector<std::vector<double>> residual;
  double max_residual = 0.0;
};

TransferErrorReport transfer_error_report(const AugmentedMdp& aug, const SoftmaxPolicy& policy,
                                          const OccupancyMeasure& optimal_occupancy);

struct TransferBiasEstimate {
  double epsilon_bias = 0.0;  // max residual over sampled parameters
  int samples = 0;
  int attempts = 0;
};

// Samples theta ~ N(0, scale^2 I), keeps draws with V_c >= delta, and
// reports the largest residual seen. An estimate, not a certified supremum.
TransferBiasEstimate estimate_transfer_bias(const AugmentedMdp& aug, const SoftmaxPolicy& policy_class,
                                            const OccupancyMeasure& optimal_occupancy, double delta, int samples,
                                            std::uint64_t seed, double scale = 2.0);

}  // namespace ra
