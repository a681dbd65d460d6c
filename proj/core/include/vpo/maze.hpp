/*
 * Copyright 2026 The VPO Maze Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// The 9x9 item-collection maze: generation, validation, shortest paths,
// simulation and the 4-component reward.

#include <array>
#include <bitset>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace vpo {

inline constexpr int kMazeSize = 9;
inline constexpr int kMazeCells = kMazeSize * kMazeSize;
inline constexpr int kRewardDim = 4;

enum class Cell : uint8_t { Empty, Wall, Start, Exit, Gold, Diamond, Lava, Bonus };
inline constexpr int kCellKinds = 8;

char glyph(Cell cell);
std::optional<Cell> cell_from_glyph(char g);

struct Pos {
  int r = 0;
  int c = 0;
  friend constexpr auto operator<=>(const Pos&, const Pos&) = default;
  constexpr int index() const { return r * kMazeSize + c; }
  constexpr bool in_grid() const { return r >= 0 && r < kMazeSize && c >= 0 && c < kMazeSize; }
  static constexpr Pos from_index(int i) { return {i / kMazeSize, i % kMazeSize}; }
};

enum class Move : uint8_t { Up, Down, Left, Right };
inline constexpr std::array<Move, 4> kMoves{Move::Up, Move::Down, Move::Left, Move::Right};

constexpr Pos step(Pos p, Move m) {
  switch (m) {
    case Move::Up: return {p.r - 1, p.c};
    case Move::Down: return {p.r + 1, p.c};
    case Move::Left: return {p.r, p.c - 1};
    case Move::Right: return {p.r, p.c + 1};
  }
  return p;
}

const char* move_name(Move m);
std::optional<Move> move_from_name(std::string_view name);
std::string moves_to_string(std::span<const Move> moves);
std::vector<Move> moves_from_string(std::string_view text);

using CellSet = std::bitset<kMazeCells>;
using RewardVector = std::array<double, kRewardDim>;

struct Maze {
  std::array<Cell, kMazeCells> grid{};
  Pos start;
  Pos exit;
  Pos gold_corner;
  Pos diamond_corner;
  int n_gold = 0;
  int n_diamond = 0;
  int n_lava = 0;
  int n_cycles = 0;
  int budget = 0;
  int via_gold = 0;
  int via_diamond = 0;
  int via_both = 0;
  uint64_t seed = 0;

  Cell at(Pos p) const { return grid[static_cast<size_t>(p.index())]; }
  Cell& at(Pos p) { return grid[static_cast<size_t>(p.index())]; }
  bool open(Pos p) const { return p.in_grid() && at(p) != Cell::Wall; }

  friend bool operator==(const Maze&, const Maze&) = default;
};

/// Generation ranges. Defaults are the dataset's ranges.
struct GenParams {
  int cycles_min = 18;
  int cycles_max = 28;
  int items_min = 3;
  int items_max = 5;
  int lava_min = 3;
  int lava_max = 5;
  int item_radius = 2;
  int interior_lo = 2;
  int interior_hi = 6;
  int budget_slack = 7;
};

enum class RejectReason { ViaBothWithinBudget, NoLavaFreePath, ItemPlacement };
const char* reject_reason_name(RejectReason reason);

struct Rejection {
  RejectReason reason;
  std::string detail;
};

using GenerateResult = std::variant<Maze, Rejection>;

GenerateResult generate_maze(uint64_t seed, const GenParams& params = {});

/// Step budget for the given detours.
constexpr int budget_for(int via_gold, int via_diamond, int slack = 7) {
  return (via_gold > via_diamond ? via_gold : via_diamond) + slack;
}

/// The budget screen: a maze survives only if visiting both corners does not
/// fit in the budget.
std::optional<Rejection> screen_budget(int via_both, int budget);

inline constexpr int kUnreachable = -1;
using DistanceMap = std::array<int, kMazeCells>;

/// BFS distances from `from` to every cell; walls (and lava, when requested)
/// are blocked. Unreachable cells hold kUnreachable.
DistanceMap distance_map(const Maze& maze, Pos from, bool avoid_lava = false);

std::optional<int> shortest_path_len(const Maze& maze, Pos from, Pos to, bool avoid_lava = false);

/// Invariant violations of an accepted maze; empty means valid. via_* and the
/// budget are re-derived by BFS.
std::vector<std::string> validate_maze(const Maze& maze, const GenParams& params = {});

struct Splits {
  std::vector<Maze> train;
  std::vector<Maze> test;
};

inline constexpr uint64_t kTrainSeedBase = 42;
inline constexpr uint64_t kTestSeedBase = 4242;

/// First `count` accepted mazes scanning seeds first, first+1, ...
/// Throws std::runtime_error after `max_scan` seeds without filling the split.
std::vector<Maze> accepted_mazes(uint64_t first_seed, int count, const GenParams& params = {},
                                 int max_scan = 0, int threads = 1);

Splits make_splits(int train_n, int test_n, const GenParams& params = {}, int threads = 1);

struct Trajectory {
  std::vector<Move> moves;
  std::vector<Pos> visited;  // includes the start cell
  bool reached_exit = false;
  int gold_collected = 0;
  int diamonds_collected = 0;
  int lava_stepped = 0;
  int steps_used = 0;
};

/// Incremental walker shared by simulate() and the policy sampler.
class Walker {
 public:
  explicit Walker(const Maze& maze);

  /// Applies one move; blocked moves leave the position and consume a step.
  /// Returns false if the walk had already terminated.
  bool apply(Move m);
  bool done() const { return trajectory_.reached_exit || steps_remaining() <= 0; }
  int steps_remaining() const { return maze_->budget - trajectory_.steps_used; }
  Pos position() const { return position_; }
  const CellSet& touched() const { return touched_; }
  const Trajectory& trajectory() const { return trajectory_; }
  Trajectory take() && { return std::move(trajectory_); }

 private:
  const Maze* maze_;
  Pos position_;
  CellSet touched_;
  Trajectory trajectory_;
};

Trajectory simulate(const Maze& maze, std::span<const Move> moves);

RewardVector reward_vector(const Maze& maze, const Trajectory& trajectory);

class MazeParseError : public std::runtime_error {
 public:
  MazeParseError(const std::string& what, int row = -1, int col = -1);
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_;
  int col_;
};

/// Nine lines of space-separated glyphs.
std::string render_ascii(const Maze& maze);

/// Parses a grid rendered by render_ascii. Metadata not visible in the grid
/// (seed, cycle count) is zero; corners, counts, via_* and budget are derived.
Maze parse_ascii(std::string_view text);

/// Grid followed by the JSON sidecar.
std::string serialize_maze(const Maze& maze);
Maze deserialize_maze(std::string_view text);

}  // namespace vpo
