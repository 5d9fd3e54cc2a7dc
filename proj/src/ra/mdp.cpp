#include "ra/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ra/error.hpp"

namespace ra {

using nlohmann::json;

FiniteMdp::FiniteMdp(int num_states, int num_actions, int horizon, StateId initial_state)
    : num_states_(num_states),
      num_actions_(num_actions),
      horizon_(horizon),
      initial_state_(initial_state) {
  if (num_states < 1 || num_actions < 1 || horizon < 1) {
    fail(ErrorCode::InvalidArgument, "MDP needs at least one state, one action and H >= 1");
  }
  const auto S = static_cast<std::size_t>(num_states);
  const auto A = static_cast<std::size_t>(num_actions);
  kernel_.assign(S * A * S, 0.0);
  stage_rewards_.assign(static_cast<std::size_t>(horizon) * S * A, 0.0);
  terminal_reward_.assign(S, 0.0);
}

void FiniteMdp::renormalize_rows() {
  for (StateId s = 0; s < num_states_; ++s) {
    for (ActionId a = 0; a < num_actions_; ++a) {
      double* row = kernel_.data() + row_offset(s, a);
      double sum = 0.0;
      bool negative = false;
      for (int j = 0; j < num_states_; ++j) {
        sum += row[j];
        negative = negative || row[j] < 0.0;
      }
      if (negative || sum == 1.0 || std::abs(sum - 1.0) > kRowSumTolerance) continue;
      for (int j = 0; j < num_states_; ++j) row[j] /= sum;
    }
  }
}

ReachAvoidSpec ReachAvoidSpec::from_sets(int num_states, std::span<const StateId> safe_set,
                                         std::span<const StateId> goal_set) {
  ReachAvoidSpec spec;
  spec.safe.assign(num_states, false);
  spec.goal.assign(num_states, false);
  for (StateId s : safe_set) {
    if (s < 0 || s >= num_states) fail(ErrorCode::InvalidArgument, "safe_set index out of range");
    spec.safe[s] = true;
  }
  for (StateId s : goal_set) {
    if (s < 0 || s >= num_states) fail(ErrorCode::InvalidArgument, "goal_set index out of range");
    spec.goal[s] = true;
  }
  return spec;
}

std::vector<StateId> ReachAvoidSpec::safe_set() const {
  std::vector<StateId> out;
  for (std::size_t s = 0; s < safe.size(); ++s)
    if (safe[s]) out.push_back(static_cast<StateId>(s));
  return out;
}

std::vector<StateId> ReachAvoidSpec::goal_set() const {
  std::vector<StateId> out;
  for (std::size_t s = 0; s < goal.size(); ++s)
    if (goal[s]) out.push_back(static_cast<StateId>(s));
  return out;
}

std::vector<Violation> validate_mdp(const FiniteMdp& mdp, const ReachAvoidSpec& spec) {
  std::vector<Violation> report;
  auto add = [&](Violation::Kind kind, const std::string& msg) { report.push_back({kind, msg}); };

  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  if (static_cast<int>(spec.safe.size()) != S || static_cast<int>(spec.goal.size()) != S) {
    add(Violation::Kind::Shape, "safe/goal masks do not match the number of states");
    return report;
  }
  if (mdp.initial_state() < 0 || mdp.initial_state() >= S) {
    add(Violation::Kind::StateIndex, "initial_state out of range");
  }

  for (StateId s = 0; s < S; ++s) {
    for (ActionId a = 0; a < A; ++a) {
      double sum = 0.0;
      for (StateId j = 0; j < S; ++j) {
        const double p = mdp.transition(s, a, j);
        if (p < 0.0 || !std::isfinite(p)) {
          std::ostringstream os;
          os << "kernel(" << s << "," << a << "," << j << ") = " << p << " is not a probability";
          add(Violation::Kind::NegativeProbability, os.str());
        }
        sum += p;
      }
      if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
        std::ostringstream os;
        os.precision(17);
        os << "kernel row (" << s << "," << a << ") sums to " << sum;
        add(Violation::Kind::RowSum, os.str());
      }
    }
  }

  auto check_reward = [&](double r, const std::string& where) {
    if (!(r >= 0.0 && r <= 1.0)) add(Violation::Kind::RewardRange, where + " outside [0,1]");
  };
  for (int t = 0; t < mdp.horizon(); ++t)
    for (StateId s = 0; s < S; ++s)
      for (ActionId a = 0; a < A; ++a)
        check_reward(mdp.stage_reward(t, s, a), "stage_reward(" + std::to_string(t) + "," +
                                                    std::to_string(s) + "," + std::to_string(a) + ")");
  for (StateId s = 0; s < S; ++s)
    check_reward(mdp.terminal_reward(s), "terminal_reward(" + std::to_string(s) + ")");

  for (StateId s = 0; s < S; ++s) {
    if (spec.goal[s] && !spec.safe[s]) {
      add(Violation::Kind::GoalNotSafe, "goal state " + std::to_string(s) + " is not in the safe set");
    }
  }
  return report;
}

bool satisfies_reach_avoid(std::span<const StateId> states, const ReachAvoidSpec& spec) {
  for (StateId s : states) {
    if (spec.in_goal(s)) return true;
    if (!spec.in_safe(s)) return false;
  }
  return false;
}

StateId sample_next(const FiniteMdp& mdp, StateId s, ActionId a, RandomStream& rng) {
  if (s < 0 || s >= mdp.num_states() || a < 0 || a >= mdp.num_actions()) {
    fail(ErrorCode::InvalidArgument, "sample_next: state or action out of range");
  }
  return static_cast<StateId>(rng.categorical(mdp.row(s, a)));
}

namespace {

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) fail(ErrorCode::Parse, std::string("missing key '") + key + "'");
  return *it;
}

int require_count(const json& doc, const char* key) {
  const json& v = require(doc, key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    fail(ErrorCode::Parse, std::string("'") + key + "' must be a positive integer");
  }
  return v.get<int>();
}

const json& require_array(const json& v, std::size_t size, const std::string& what) {
  if (!v.is_array() || v.size() != size) {
    fail(ErrorCode::Parse, what + " must be an array of length " + std::to_string(size));
  }
  return v;
}

double require_number(const json& v, const std::string& what) {
  if (!v.is_number()) fail(ErrorCode::Parse, what + " must be a number");
  return v.get<double>();
}

std::vector<StateId> require_index_list(const json& v, int num_states, const char* key) {
  if (!v.is_array()) fail(ErrorCode::Parse, std::string("'") + key + "' must be an array");
  std::vector<StateId> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) fail(ErrorCode::Parse, std::string("'") + key + "' entries must be integers");
    const int s = e.get<int>();
    if (s < 0 || s >= num_states) fail(ErrorCode::Parse, std::string("'") + key + "' index out of range");
    out.push_back(s);
  }
  return out;
}

}  // namespace

MdpDocument mdp_from_json(const json& doc) {
  if (!doc.is_object()) fail(ErrorCode::Parse, "MDP document must be an object");
  const int S = require_count(doc, "num_states");
  const int A = require_count(doc, "num_actions");
  const int H = require_count(doc, "horizon");
  int s0 = 0;
  if (auto it = doc.find("initial_state"); it != doc.end()) {
    if (!it->is_number_integer()) fail(ErrorCode::Parse, "'initial_state' must be an integer");
    s0 = it->get<int>();
    if (s0 < 0 || s0 >= S) fail(ErrorCode::Parse, "'initial_state' out of range");
  }

  MdpDocument out{FiniteMdp(S, A, H, s0), {}};
  const json& kernel = require_array(require(doc, "kernel"), S, "kernel");
  for (StateId s = 0; s < S; ++s) {
    const json& per_action = require_array(kernel[s], A, "kernel[s]");
    for (ActionId a = 0; a < A; ++a) {
      const json& row = require_array(per_action[a], S, "kernel[s][a]");
      for (StateId j = 0; j < S; ++j) out.mdp.set_transition(s, a, j, require_number(row[j], "kernel entry"));
    }
  }
  const json& stage = require_array(require(doc, "stage_rewards"), H, "stage_rewards");
  for (int t = 0; t < H; ++t) {
    const json& per_state = require_array(stage[t], S, "stage_rewards[t]");
    for (StateId s = 0; s < S; ++s) {
      const json& per_action = require_array(per_state[s], A, "stage_rewards[t][s]");
      for (ActionId a = 0; a < A; ++a)
        out.mdp.set_stage_reward(t, s, a, require_number(per_action[a], "stage reward"));
    }
  }
  const json& terminal = require_array(require(doc, "terminal_reward"), S, "terminal_reward");
  for (StateId s = 0; s < S; ++s) out.mdp.set_terminal_reward(s, require_number(terminal[s], "terminal reward"));

  const auto safe = require_index_list(require(doc, "safe_set"), S, "safe_set");
  const auto goal = require_index_list(require(doc, "goal_set"), S, "goal_set");
  out.spec = ReachAvoidSpec::from_sets(S, safe, goal);
  out.mdp.renormalize_rows();
  return out;
}

json mdp_to_json(const FiniteMdp& mdp, const ReachAvoidSpec& spec) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  json kernel = json::array();
  for (StateId s = 0; s < S; ++s) {
    json per_action = json::array();
    for (ActionId a = 0; a < A; ++a) {
      const auto row = mdp.row(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    kernel.push_back(std::move(per_action));
  }
  json stage = json::array();
  for (int t = 0; t < mdp.horizon(); ++t) {
    json per_state = json::array();
    for (StateId s = 0; s < S; ++s) {
      std::vector<double> r(A);
      for (ActionId a = 0; a < A; ++a) r[a] = mdp.stage_reward(t, s, a);
      per_state.push_back(r);
    }
    stage.push_back(std::move(per_state));
  }
  std::vector<double> terminal(S);
  for (StateId s = 0; s < S; ++s) terminal[s] = mdp.terminal_reward(s);

  json doc;
  doc["num_states"] = S;
  doc["num_actions"] = A;
  doc["horizon"] = mdp.horizon();
  doc["initial_state"] = mdp.initial_state();
  doc["kernel"] = std::move(kernel);
  doc["stage_rewards"] = std::move(stage);
  doc["terminal_reward"] = terminal;
  doc["safe_set"] = spec.safe_set();
  doc["goal_set"] = spec.goal_set();
  return doc;
}

MdpDocument load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open MDP file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "MDP file '" + path + "': " + e.what());
  }
  return mdp_from_json(doc);
}

void save_mdp_file(const std::string& path, const FiniteMdp& mdp, const ReachAvoidSpec& spec) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write MDP file '" + path + "'");
  out << mdp_to_json(mdp, spec).dump(2) << '\n';
}

}  // namespace ra
