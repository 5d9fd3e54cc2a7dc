#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ra/rng.hpp"

namespace ra {

using StateId = int;
using ActionId = int;

inline constexpr double kRowSumTolerance = 1e-9;

/// Explicit finite-horizon MDP with dense kernel P(s'|s,a), time-indexed stage
/// rewards r_t(s,a) for t < H and a terminal reward r_H(s).
class FiniteMdp {
 public:
  FiniteMdp() = default;
  FiniteMdp(int num_states, int num_actions, int horizon, StateId initial_state = 0);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }
  StateId initial_state() const { return initial_state_; }
  void set_initial_state(StateId s) { initial_state_ = s; }

  double transition(StateId s, ActionId a, StateId next) const {
    return kernel_[row_offset(s, a) + next];
  }
  void set_transition(StateId s, ActionId a, StateId next, double p) {
    kernel_[row_offset(s, a) + next] = p;
  }
  std::span<const double> row(StateId s, ActionId a) const {
    return {kernel_.data() + row_offset(s, a), static_cast<std::size_t>(num_states_)};
  }

  double stage_reward(int t, StateId s, ActionId a) const {
    return stage_rewards_[(static_cast<std::size_t>(t) * num_states_ + s) * num_actions_ + a];
  }
  void set_stage_reward(int t, StateId s, ActionId a, double r) {
    stage_rewards_[(static_cast<std::size_t>(t) * num_states_ + s) * num_actions_ + a] = r;
  }
  double terminal_reward(StateId s) const { return terminal_reward_[s]; }
  void set_terminal_reward(StateId s, double r) { terminal_reward_[s] = r; }

  // Rescales rows whose sum is within kRowSumTolerance of one. Rows further
  // off are left untouched so validation still reports them.
  void renormalize_rows();

  bool operator==(const FiniteMdp&) const = default;

 private:
  std::size_t row_offset(StateId s, ActionId a) const {
    return (static_cast<std::size_t>(s) * num_actions_ + a) * num_states_;
  }

  int num_states_ = 0;
  int num_actions_ = 0;
  int horizon_ = 0;
  StateId initial_state_ = 0;
  std::vector<double> kernel_;
  std::vector<double> stage_rewards_;
  std::vector<double> terminal_reward_;
};

/// Safe set K and goal set G as membership masks over the states.
struct ReachAvoidSpec {
  std::vector<bool> safe;
  std::vector<bool> goal;

  static ReachAvoidSpec from_sets(int num_states, std::span<const StateId> safe_set,
                                  std::span<const StateId> goal_set);

  bool in_safe(StateId s) const { return safe[s]; }
  bool in_goal(StateId s) const { return goal[s]; }
  bool in_safe_not_goal(StateId s) const { return safe[s] && !goal[s]; }

  std::vector<StateId> safe_set() const;
  std::vector<StateId> goal_set() const;

  bool operator==(const ReachAvoidSpec&) const = default;
};

struct Trajectory {
  std::vector<StateId> states;   // s_0 .. s_H
  std::vector<ActionId> actions;  // a_0 .. a_{H-1}
  std::vector<double> rewards;    // r_t(s_t, a_t)
};

struct Violation {
  enum class Kind { Shape, NegativeProbability, RowSum, RewardRange, GoalNotSafe, StateIndex };
  Kind kind;
  std::string message;
};

std::vector<Violation> validate_mdp(const FiniteMdp& mdp, const ReachAvoidSpec& spec);

// True iff some s_t is in G with every earlier state in K \ G.
bool satisfies_reach_avoid(std::span<const StateId> states, const ReachAvoidSpec& spec);
inline bool satisfies_reach_avoid(const Trajectory& traj, const ReachAvoidSpec& spec) {
  return satisfies_reach_avoid(traj.states, spec);
}

StateId sample_next(const FiniteMdp& mdp, StateId s, ActionId a, RandomStream& rng);

// JSON document with keys num_states, num_actions, horizon, kernel,
// stage_rewards, terminal_reward, safe_set, goal_set and optional
// initial_state. Throws ra::Error(Parse) on malformed input.
struct MdpDocument {
  FiniteMdp mdp;
  ReachAvoidSpec spec;
};

MdpDocument mdp_from_json(const nlohmann::json& doc);
nlohmann::json mdp_to_json(const FiniteMdp& mdp, const ReachAvoidSpec& spec);
MdpDocument load_mdp_file(const std::string& path);
void save_mdp_file(const std::string& path, const FiniteMdp& mdp, const ReachAvoidSpec& spec);

}  // namespace ra
