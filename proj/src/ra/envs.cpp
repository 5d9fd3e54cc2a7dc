#include "ra/envs.hpp"

#include <algorithm>

#include "ra/error.hpp"

namespace ra {

using nlohmann::json;

EnvInstance example1() {
  FiniteMdp mdp(6, 2, 3, 0);
  for (int a = 0; a < 2; ++a) {
    mdp.set_transition(0, a, 1, 0.5);
    mdp.set_transition(0, a, 2, 0.5);
    mdp.set_transition(1, a, 3, 1.0);
    mdp.set_transition(2, a, 3, 1.0);
    mdp.set_transition(4, a, 4, 1.0);
    mdp.set_transition(5, a, 5, 1.0);
  }
  mdp.set_transition(3, 0, 4, 1.0);
  mdp.set_transition(3, 1, 5, 1.0);
  mdp.set_terminal_reward(5, 1.0);
  const std::vector<StateId> safe{0, 1, 3, 4};
  const std::vector<StateId> goal{4};
  return {std::move(mdp), ReachAvoidSpec::from_sets(6, safe, goal)};
}

namespace {

bool in_grid(const GridWorldSpec& g, Cell c) {
  return c.row >= 0 && c.row < g.height && c.col >= 0 && c.col < g.width;
}

void check_cell(const GridWorldSpec& g, Cell c, const char* what) {
  if (!in_grid(g, c)) {
    fail(ErrorCode::InvalidArgument, std::string(what) + " cell (" + std::to_string(c.row) + "," +
                                         std::to_string(c.col) + ") is outside the grid");
  }
}

constexpr int kRowStep[4] = {-1, 0, 1, 0};
constexpr int kColStep[4] = {0, 1, 0, -1};

}  // namespace

EnvInstance gridworld(const GridWorldSpec& g) {
  if (g.width < 1 || g.height < 1) fail(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  if (!(g.slip >= 0.0 && g.slip < 1.0)) fail(ErrorCode::InvalidArgument, "slip must lie in [0,1)");
  if (g.horizon < 1) fail(ErrorCode::InvalidArgument, "horizon must be at least 1");
  if (!(g.bonus_reward >= 0.0 && g.bonus_reward <= 1.0) || !(g.stage_reward >= 0.0 && g.stage_reward <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "rewards must lie in [0,1]");
  }
  check_cell(g, g.start, "start");
  for (Cell c : g.obstacles) check_cell(g, c, "obstacle");
  for (Cell c : g.goals) {
    check_cell(g, c, "goal");
    if (std::find(g.obstacles.begin(), g.obstacles.end(), c) != g.obstacles.end()) {
      fail(ErrorCode::InvalidArgument, "goal cell coincides with an obstacle");
    }
  }
  if (g.bonus) check_cell(g, *g.bonus, "bonus");

  const int S = g.width * g.height;
  std::vector<char> blocked(S, 0);
  std::vector<char> goal(S, 0);
  for (Cell c : g.obstacles) blocked[g.state_of(c)] = 1;
  for (Cell c : g.goals) goal[g.state_of(c)] = 1;

  FiniteMdp mdp(S, 4, g.horizon, g.state_of(g.start));
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const int s = g.state_of({r, c});
      for (int a = 0; a < 4; ++a) {
        if (blocked[s] || (g.absorbing_goals && goal[s])) {
          mdp.set_transition(s, a, s, 1.0);
          continue;
        }
        auto move = [&](int dir, double p) {
          if (p == 0.0) return;
          Cell n{r + kRowStep[dir], c + kColStep[dir]};
          const int to = in_grid(g, n) ? g.state_of(n) : s;
          mdp.set_transition(s, a, to, mdp.transition(s, a, to) + p);
        };
        move(a, 1.0 - g.slip);
        move((a + 1) % 4, 0.5 * g.slip);
        move((a + 3) % 4, 0.5 * g.slip);
      }
    }
  }
  for (int t = 0; t < g.horizon; ++t)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < 4; ++a) mdp.set_stage_reward(t, s, a, g.stage_reward);
  if (g.bonus) mdp.set_terminal_reward(g.state_of(*g.bonus), g.bonus_reward);

  std::vector<StateId> safe_set;
  std::vector<StateId> goal_set;
  for (int s = 0; s < S; ++s) {
    if (!blocked[s]) safe_set.push_back(s);
    if (goal[s]) goal_set.push_back(s);
  }
  return {std::move(mdp), ReachAvoidSpec::from_sets(S, safe_set, goal_set)};
}

namespace {

Cell cell_from_json(const json& j) {
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 2) fail(ErrorCode::Parse, "cells are [row, col] pairs");
  return {v[0], v[1]};
}

json cell_to_json(Cell c) { return json::array({c.row, c.col}); }

}  // namespace

GridWorldSpec gridworld_spec_from_json(const json& doc) {
  GridWorldSpec g;
  try {
    g.width = doc.value("width", g.width);
    g.height = doc.value("height", g.height);
    g.slip = doc.value("slip", g.slip);
    g.horizon = doc.value("horizon", g.horizon);
    if (doc.contains("start")) g.start = cell_from_json(doc.at("start"));
    if (doc.contains("obstacles")) {
      g.obstacles.clear();
      for (const auto& c : doc.at("obstacles")) g.obstacles.push_back(cell_from_json(c));
    }
    if (doc.contains("goals")) {
      g.goals.clear();
      for (const auto& c : doc.at("goals")) g.goals.push_back(cell_from_json(c));
    }
    g.absorbing_goals = doc.value("absorbing_goals", g.absorbing_goals);
    if (doc.contains("bonus") && !doc.at("bonus").is_null()) g.bonus = cell_from_json(doc.at("bonus"));
    g.bonus_reward = doc.value("bonus_reward", g.bonus_reward);
    g.stage_reward = doc.value("stage_reward", g.stage_reward);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("gridworld parameters: ") + e.what());
  }
  return g;
}

json gridworld_spec_to_json(const GridWorldSpec& g) {
  json doc;
  doc["width"] = g.width;
  doc["height"] = g.height;
  doc["slip"] = g.slip;
  doc["horizon"] = g.horizon;
  doc["start"] = cell_to_json(g.start);
  doc["obstacles"] = json::array();
  for (Cell c : g.obstacles) doc["obstacles"].push_back(cell_to_json(c));
  doc["goals"] = json::array();
  for (Cell c : g.goals) doc["goals"].push_back(cell_to_json(c));
  doc["absorbing_goals"] = g.absorbing_goals;
  doc["bonus"] = g.bonus ? cell_to_json(*g.bonus) : json(nullptr);
  doc["bonus_reward"] = g.bonus_reward;
  doc["stage_reward"] = g.stage_reward;
  return doc;
}

}  // namespace ra
