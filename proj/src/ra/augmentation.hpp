#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ra/mdp.hpp"
#include "ra/rng.hpp"

namespace ra {

/// Reach-avoid status carried alongside the base state.
enum class Aux : std::uint8_t {
  Unsafe = 0,   // left K before reaching G
  Pending = 1,  // inside K \ G so far
  Goal = 2,     // reached G while safe
};

inline constexpr int kAuxCount = 3;

Aux aux_update(StateId s_next, Aux y, const ReachAvoidSpec& spec);
Aux initial_aux(StateId s0, const ReachAvoidSpec& spec);
// Membership of (y, y_next) in the valid auxiliary transition set, which
// depends on the successor base state when y is Pending.
bool valid_aux_transition(Aux y, Aux y_next, StateId s_next, const ReachAvoidSpec& spec);

/// (s, y) flattened as 3*s + y so the aux component varies fastest.
struct AugState {
  StateId s = 0;
  Aux y = Aux::Pending;

  int id() const { return kAuxCount * s + static_cast<int>(y); }
  static AugState from_id(int id) { return {id / kAuxCount, static_cast<Aux>(id % kAuxCount)}; }
  bool operator==(const AugState&) const = default;
};

/// Randomized Markov policy on the augmented space: a probability vector
/// for every (t, augmented state).
class MarkovPolicy {
 public:
  MarkovPolicy() = default;
  MarkovPolicy(int horizon, int num_aug_states, int num_actions);

  static MarkovPolicy uniform(int horizon, int num_aug_states, int num_actions);

  int horizon() const { return horizon_; }
  int num_aug_states() const { return num_aug_states_; }
  int num_actions() const { return num_actions_; }

  std::span<const double> probs(int t, int aug_id) const {
    return {probs_.data() + offset(t, aug_id), static_cast<std::size_t>(num_actions_)};
  }
  std::span<double> probs(int t, int aug_id) {
    return {probs_.data() + offset(t, aug_id), static_cast<std::size_t>(num_actions_)};
  }

 private:
  std::size_t offset(int t, int aug_id) const {
    return (static_cast<std::size_t>(t) * num_aug_states_ + aug_id) * num_actions_;
  }

  int horizon_ = 0;
  int num_aug_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> probs_;
};

/// Product-space environment. The augmented kernel is never materialized
/// here: sampling draws s' from the base kernel and then applies aux_update.
class AugmentedEnv {
 public:
  AugmentedEnv(FiniteMdp base, ReachAvoidSpec spec);

  const FiniteMdp& base() const { return base_; }
  const ReachAvoidSpec& spec() const { return spec_; }
  int horizon() const { return base_.horizon(); }
  int num_actions() const { return base_.num_actions(); }
  int num_aug_states() const { return kAuxCount * base_.num_states(); }
  AugState initial_state() const;

 private:
  FiniteMdp base_;
  ReachAvoidSpec spec_;
};

struct AugTrajectory {
  std::vector<AugState> states;     // (s_0,y_0) .. (s_H,y_H)
  std::vector<ActionId> actions;    // a_0 .. a_{H-1}
  std::vector<double> stage_rewards;
  double terminal_reward = 0.0;
  int constraint = 0;               // c(s~_H) = 1{y_H = 2}

  std::vector<StateId> base_states() const;
};

// Reuses `out`'s storage; the estimator hot path calls this once per sample.
void augmented_rollout_into(const AugmentedEnv& env, const MarkovPolicy& policy, RandomStream& rng,
                            AugTrajectory& out);
AugTrajectory augmented_rollout(const AugmentedEnv& env, const MarkovPolicy& policy, RandomStream& rng);

int terminal_constraint(const AugTrajectory& traj);

/// Explicit augmented MDP over S x {0,1,2} with the terminal constraint
/// c(s~) = 1{y = 2} stored per augmented state.
struct AugmentedMdp {
  FiniteMdp mdp;
  std::vector<double> terminal_constraint;
  int num_base_states = 0;

  int initial_id() const { return mdp.initial_state(); }
};

AugmentedMdp build_augmented_finite(const FiniteMdp& mdp, const ReachAvoidSpec& spec);
inline AugmentedMdp build_augmented_finite(const AugmentedEnv& env) {
  return build_augmented_finite(env.base(), env.spec());
}

/// History-dependent policy on the base states induced by a Markov policy on
/// the augmented space: the aux value is rebuilt from the visited states.
class LiftedPolicy {
 public:
  LiftedPolicy(MarkovPolicy aug_policy, ReachAvoidSpec spec);

  // b_t for the history s_0..s_t.
  Aux belief(std::span<const StateId> history) const;
  // Action law at t = history.size() - 1.
  std::span<const double> action_distribution(std::span<const StateId> history) const;

  const MarkovPolicy& augmented() const { return aug_; }

 private:
  MarkovPolicy aug_;
  ReachAvoidSpec spec_;
};

LiftedPolicy lift_policy(const MarkovPolicy& aug_policy, const ReachAvoidSpec& spec);

// Simulates the base MDP under a lifted policy (no aux state in the loop).
Trajectory lifted_rollout(const FiniteMdp& mdp, const LiftedPolicy& policy, RandomStream& rng);

}  // namespace ra
