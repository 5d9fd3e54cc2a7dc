#include "ra/augmentation.hpp"

#include <algorithm>

#include "ra/error.hpp"

namespace ra {

Aux aux_update(StateId s_next, Aux y, const ReachAvoidSpec& spec) {
  if (y == Aux::Goal || (y == Aux::Pending && spec.in_goal(s_next))) return Aux::Goal;
  if (y == Aux::Pending && spec.in_safe_not_goal(s_next)) return Aux::Pending;
  return Aux::Unsafe;
}

Aux initial_aux(StateId s0, const ReachAvoidSpec& spec) {
  if (spec.in_goal(s0)) return Aux::Goal;
  if (spec.in_safe_not_goal(s0)) return Aux::Pending;
  return Aux::Unsafe;
}

bool valid_aux_transition(Aux y, Aux y_next, StateId s_next, const ReachAvoidSpec& spec) {
  if (y == Aux::Unsafe) return y_next == Aux::Unsafe;
  if (y == Aux::Goal) return y_next == Aux::Goal;
  const int expected = (spec.in_safe_not_goal(s_next) ? 1 : 0) + 2 * (spec.in_goal(s_next) ? 1 : 0);
  return static_cast<int>(y_next) == expected;
}

MarkovPolicy::MarkovPolicy(int horizon, int num_aug_states, int num_actions)
    : horizon_(horizon),
      num_aug_states_(num_aug_states),
      num_actions_(num_actions),
      probs_(static_cast<std::size_t>(horizon) * num_aug_states * num_actions, 0.0) {}

MarkovPolicy MarkovPolicy::uniform(int horizon, int num_aug_states, int num_actions) {
  MarkovPolicy p(horizon, num_aug_states, num_actions);
  std::fill(p.probs_.begin(), p.probs_.end(), 1.0 / num_actions);
  return p;
}

AugmentedEnv::AugmentedEnv(FiniteMdp base, ReachAvoidSpec spec)
    : base_(std::move(base)), spec_(std::move(spec)) {
  if (static_cast<int>(spec_.safe.size()) != base_.num_states() ||
      static_cast<int>(spec_.goal.size()) != base_.num_states()) {
    fail(ErrorCode::InvalidArgument, "reach-avoid masks do not match the MDP");
  }
}

AugState AugmentedEnv::initial_state() const {
  const StateId s0 = base_.initial_state();
  return {s0, initial_aux(s0, spec_)};
}

std::vector<StateId> AugTrajectory::base_states() const {
  std::vector<StateId> out;
  out.reserve(states.size());
  for (const auto& st : states) out.push_back(st.s);
  return out;
}

void augmented_rollout_into(const AugmentedEnv& env, const MarkovPolicy& policy, RandomStream& rng,
                            AugTrajectory& out) {
  const int H = env.horizon();
  if (policy.horizon() != H || policy.num_aug_states() != env.num_aug_states() ||
      policy.num_actions() != env.num_actions()) {
    fail(ErrorCode::InvalidArgument, "policy shape does not match the augmented environment");
  }
  const FiniteMdp& mdp = env.base();
  out.states.resize(H + 1);
  out.actions.resize(H);
  out.stage_rewards.resize(H);

  AugState cur = env.initial_state();
  out.states[0] = cur;
  for (int t = 0; t < H; ++t) {
    const auto a = static_cast<ActionId>(rng.categorical(policy.probs(t, cur.id())));
    out.actions[t] = a;
    out.stage_rewards[t] = mdp.stage_reward(t, cur.s, a);
    const StateId next = sample_next(mdp, cur.s, a, rng);
    cur = {next, aux_update(next, cur.y, env.spec())};
    out.states[t + 1] = cur;
  }
  out.terminal_reward = mdp.terminal_reward(cur.s);
  out.constraint = cur.y == Aux::Goal ? 1 : 0;
}

AugTrajectory augmented_rollout(const AugmentedEnv& env, const MarkovPolicy& policy, RandomStream& rng) {
  AugTrajectory traj;
  augmented_rollout_into(env, policy, rng, traj);
  return traj;
}

int terminal_constraint(const AugTrajectory& traj) {
  if (traj.states.empty()) fail(ErrorCode::InvalidArgument, "empty trajectory");
  return traj.states.back().y == Aux::Goal ? 1 : 0;
}

AugmentedMdp build_augmented_finite(const FiniteMdp& mdp, const ReachAvoidSpec& spec) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  const AugState init{mdp.initial_state(), initial_aux(mdp.initial_state(), spec)};
  AugmentedMdp out{FiniteMdp(kAuxCount * S, A, mdp.horizon(), init.id()),
                   std::vector<double>(static_cast<std::size_t>(kAuxCount) * S, 0.0), S};

  for (StateId s = 0; s < S; ++s) {
    for (int yi = 0; yi < kAuxCount; ++yi) {
      const AugState from{s, static_cast<Aux>(yi)};
      for (ActionId a = 0; a < A; ++a) {
        for (StateId next = 0; next < S; ++next) {
          const double p = mdp.transition(s, a, next);
          if (p == 0.0) continue;
          for (int yn = 0; yn < kAuxCount; ++yn) {
            const auto y_next = static_cast<Aux>(yn);
            if (y_next != aux_update(next, from.y, spec)) continue;
            if (!valid_aux_transition(from.y, y_next, next, spec)) continue;
            out.mdp.set_transition(from.id(), a, AugState{next, y_next}.id(), p);
          }
        }
        for (int t = 0; t < mdp.horizon(); ++t) out.mdp.set_stage_reward(t, from.id(), a, mdp.stage_reward(t, s, a));
      }
      out.mdp.set_terminal_reward(from.id(), mdp.terminal_reward(s));
      out.terminal_constraint[from.id()] = from.y == Aux::Goal ? 1.0 : 0.0;
    }
  }
  return out;
}

LiftedPolicy::LiftedPolicy(MarkovPolicy aug_policy, ReachAvoidSpec spec)
    : aug_(std::move(aug_policy)), spec_(std::move(spec)) {}

Aux LiftedPolicy::belief(std::span<const StateId> history) const {
  if (history.empty()) fail(ErrorCode::InvalidArgument, "empty history");
  Aux b = initial_aux(history[0], spec_);
  for (std::size_t i = 1; i < history.size(); ++i) b = aux_update(history[i], b, spec_);
  return b;
}

std::span<const double> LiftedPolicy::action_distribution(std::span<const StateId> history) const {
  const int t = static_cast<int>(history.size()) - 1;
  if (t < 0 || t >= aug_.horizon()) fail(ErrorCode::InvalidArgument, "history length outside the horizon");
  return aug_.probs(t, AugState{history.back(), belief(history)}.id());
}

LiftedPolicy lift_policy(const MarkovPolicy& aug_policy, const ReachAvoidSpec& spec) {
  return LiftedPolicy(aug_policy, spec);
}

Trajectory lifted_rollout(const FiniteMdp& mdp, const LiftedPolicy& policy, RandomStream& rng) {
  Trajectory traj;
  traj.states.push_back(mdp.initial_state());
  for (int t = 0; t < mdp.horizon(); ++t) {
    const StateId s = traj.states.back();
    const auto a = static_cast<ActionId>(rng.categorical(policy.action_distribution(traj.states)));
    traj.actions.push_back(a);
    traj.rewards.push_back(mdp.stage_reward(t, s, a));
    traj.states.push_back(sample_next(mdp, s, a, rng));
  }
  return traj;
}

}  // namespace ra
