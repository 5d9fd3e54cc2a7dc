#pragma once

#include <optional>
#include <vector>

#include "json.hpp"

#include "ra/mdp.hpp"

namespace ra {

struct EnvInstance {
  FiniteMdp mdp;
  ReachAvoidSpec spec;
};

// Six-state, two-action, H = 3 reach-avoid example. States s0..s5 map to ids
// 0..5; s4 and s5 absorb.
EnvInstance example1();

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

/// Grid with lateral slip. Actions 0 up, 1 right, 2 down, 3 left. Cell
/// (row, col) has state id row * width + col.
struct GridWorldSpec {
  int width = 4;
  int height = 4;
  double slip = 0.1;
  int horizon = 6;
  Cell start{0, 0};
  std::vector<Cell> obstacles{{1, 1}};
  std::vector<Cell> goals{{3, 3}};
  bool absorbing_goals = false;
  std::optional<Cell> bonus;
  double bonus_reward = 1.0;
  double stage_reward = 0.0;

  int state_of(Cell c) const { return c.row * width + c.col; }
};

EnvInstance gridworld(const GridWorldSpec& spec);

GridWorldSpec gridworld_spec_from_json(const nlohmann::json& doc);
nlohmann::json gridworld_spec_to_json(const GridWorldSpec& spec);

}  // namespace ra
