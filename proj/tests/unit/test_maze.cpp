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

#include <gtest/gtest.h>

#include <set>

#include "maze_oracle.hpp"
#include "vpo/maze.hpp"
#include "vpo/rng.hpp"

namespace vpo {
namespace {

constexpr const char* kOpenGrid =
    "S . . . . . . G G\n"
    ". . . . . . . . G\n"
    ". . L . . . . . .\n"
    ". . . . . . . . .\n"
    ". . . . B . . . .\n"
    ". . . . . L . . .\n"
    ". . . L . . . . .\n"
    "D . . . . . . . .\n"
    "D D . . . . . . E\n";

std::vector<Move> repeat(Move m, int n) { return std::vector<Move>(static_cast<size_t>(n), m); }

std::vector<Move> concat(std::initializer_list<std::vector<Move>> parts) {
  std::vector<Move> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Maze first_accepted(uint64_t seed) {
  for (;; ++seed) {
    auto r = generate_maze(seed);
    if (auto* m = std::get_if<Maze>(&r)) return *m;
  }
}

TEST(MazeGenerate, AcceptedMazePassesBothValidators) {
  const Maze m = first_accepted(kTrainSeedBase);
  EXPECT_TRUE(validate_maze(m).empty());
  EXPECT_TRUE(testing::oracle_violations(m).empty());
}

TEST(MazeGenerate, BudgetIsLongerDetourPlusSeven) {
  for (uint64_t s = 0; s < 50; ++s) {
    auto r = generate_maze(1000 + s);
    if (auto* m = std::get_if<Maze>(&r)) EXPECT_EQ(m->budget, std::max(m->via_gold, m->via_diamond) + 7);
  }
  EXPECT_EQ(budget_for(18, 20), 27);
  EXPECT_EQ(budget_for(22, 16), 29);
}

TEST(MazeGenerate, ViaBothEqualToBudgetIsRejected) {
  const auto r = screen_budget(25, 25);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->reason, RejectReason::ViaBothWithinBudget);
  EXPECT_STREQ(reject_reason_name(r->reason), "via_both");
  EXPECT_FALSE(screen_budget(26, 25).has_value());
  EXPECT_TRUE(screen_budget(20, 25).has_value());
}

TEST(MazeGenerate, RejectionsNameTheFailedCheck) {
  std::set<std::string> seen;
  for (uint64_t s = 0; s < 400; ++s) {
    auto r = generate_maze(s);
    if (auto* rej = std::get_if<Rejection>(&r)) {
      seen.insert(reject_reason_name(rej->reason));
      EXPECT_FALSE(rej->detail.empty());
    }
  }
  EXPECT_FALSE(seen.empty());
  for (const auto& name : seen) EXPECT_TRUE(name == "via_both" || name == "lava_path" || name == "item_placement");
}

TEST(MazeGenerate, DeterministicPerSeed) {
  auto a = generate_maze(77);
  auto b = generate_maze(77);
  ASSERT_EQ(a.index(), b.index());
  if (a.index() == 0) EXPECT_EQ(std::get<Maze>(a), std::get<Maze>(b));
}

TEST(MazeGenerate, ThousandSeedsMatchReferenceBfs) {
  const auto mazes = accepted_mazes(kTrainSeedBase, 1000);
  ASSERT_EQ(mazes.size(), 1000u);
  for (const auto& m : mazes) {
    const auto bad = testing::oracle_violations(m);
    EXPECT_TRUE(bad.empty()) << "seed " << m.seed << ": " << bad.front();
    EXPECT_TRUE(validate_maze(m).empty()) << "seed " << m.seed;
  }
}

TEST(MazeSplits, SeedStreamsAndDisjointness) {
  const Splits s = make_splits(5, 5);
  ASSERT_EQ(s.train.size(), 5u);
  ASSERT_EQ(s.test.size(), 5u);
  EXPECT_GE(s.train.front().seed, kTrainSeedBase);
  EXPECT_GE(s.test.front().seed, kTestSeedBase);
  for (size_t i = 1; i < s.train.size(); ++i) EXPECT_LT(s.train[i - 1].seed, s.train[i].seed);
  for (const auto& a : s.train) {
    for (const auto& b : s.test) EXPECT_NE(a.grid, b.grid);
  }
}

TEST(MazeSplits, OneAndOneIsDeterministic) {
  const Splits a = make_splits(1, 1);
  const Splits b = make_splits(1, 1);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(MazeSplits, RerunGivesIdenticalSerializations) {
  const Splits a = make_splits(10, 10);
  const Splits b = make_splits(10, 10, {}, 4);
  for (size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(serialize_maze(a.train[i]), serialize_maze(b.train[i]));
    EXPECT_EQ(serialize_maze(a.test[i]), serialize_maze(b.test[i]));
  }
}

TEST(MazeSplits, ExhaustionGuardThrows) {
  GenParams impossible;
  impossible.budget_slack = 100;  // via_both can never exceed the budget
  EXPECT_THROW(accepted_mazes(0, 1, impossible, 50), std::runtime_error);
}

TEST(ShortestPath, IdentityAndAdjacent) {
  const Maze m = parse_ascii(kOpenGrid);
  EXPECT_EQ(shortest_path_len(m, {3, 3}, {3, 3}), 0);
  EXPECT_EQ(shortest_path_len(m, {3, 3}, {3, 4}), 1);
  EXPECT_EQ(shortest_path_len(m, {0, 0}, {8, 8}), 16);
}

TEST(ShortestPath, LavaAvoidanceAndUnreachable) {
  const Maze m = parse_ascii(
      "S . . . . . . G G\n"
      "# # # # # # # . G\n"
      ". . . . . . . . .\n"
      ". . . . . . . . .\n"
      ". . . . B . . . .\n"
      "# # # # # # # # .\n"
      "L L L L L L L L L\n"
      "D . . . . . . . .\n"
      "D D . . . . . . E\n");
  EXPECT_EQ(shortest_path_len(m, {0, 0}, {8, 8}, false), 16);
  EXPECT_FALSE(shortest_path_len(m, {0, 0}, {8, 8}, true).has_value());
}

TEST(ShortestPath, AcceptedMazesHaveLavaFreeRouteWithinBudget) {
  for (const auto& m : accepted_mazes(kTestSeedBase, 25)) {
    const auto d = shortest_path_len(m, m.start, m.exit, true);
    ASSERT_TRUE(d.has_value());
    EXPECT_LE(*d, m.budget);
  }
}

TEST(Simulate, NeverReachingExitGivesZeroReward) {
  const Maze m = parse_ascii(kOpenGrid);
  const auto t = simulate(m, repeat(Move::Right, 3));
  EXPECT_FALSE(t.reached_exit);
  const RewardVector zero{0, 0, 0, 0};
  EXPECT_EQ(reward_vector(m, t), zero);
}

TEST(Simulate, BlockedFirstMoveConsumesAStep) {
  const Maze m = parse_ascii(kOpenGrid);
  const std::vector<Move> up{Move::Up};
  const auto t = simulate(m, up);
  EXPECT_EQ(t.steps_used, 1);
  EXPECT_EQ(t.visited.back(), m.start);
}

TEST(Simulate, RevisitedGoldCountsOnce) {
  const Maze m = parse_ascii(kOpenGrid);
  const auto moves = concat({repeat(Move::Right, 7), {Move::Left, Move::Right, Move::Left, Move::Right}});
  const auto t = simulate(m, moves);
  EXPECT_EQ(t.gold_collected, 1);
}

TEST(Simulate, TruncatesAtExitAndBudget) {
  Maze m = parse_ascii(kOpenGrid);
  const auto path = concat({repeat(Move::Right, 8), repeat(Move::Down, 8), repeat(Move::Left, 3)});
  const auto t = simulate(m, path);
  EXPECT_TRUE(t.reached_exit);
  EXPECT_EQ(t.steps_used, 16);
  EXPECT_EQ(t.moves.size(), 16u);
  const auto r = reward_vector(m, t);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_DOUBLE_EQ(r[1], 3.0 / m.n_gold);
  EXPECT_EQ(r[2], 0.0);
  EXPECT_EQ(r[3], 1.0);

  m.budget = 5;
  const auto cut = simulate(m, path);
  EXPECT_EQ(cut.steps_used, 5);
  EXPECT_FALSE(cut.reached_exit);
}

TEST(Reward, Examples) {
  Maze m;
  m.n_gold = 4;
  m.n_diamond = 3;
  m.n_lava = 3;
  Trajectory t;
  t.reached_exit = true;
  t.gold_collected = 2;
  t.lava_stepped = 1;
  const auto r = reward_vector(m, t);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[1], 0.5);
  EXPECT_EQ(r[2], 0.0);
  EXPECT_NEAR(r[3], 2.0 / 3.0, 1e-15);

  Trajectory clean;
  clean.reached_exit = true;
  const RewardVector expect{1, 0, 0, 1};
  EXPECT_EQ(reward_vector(m, clean), expect);
}

TEST(SimulateProperty, TotalDeterministicAndBounded) {
  const auto mazes = accepted_mazes(kTrainSeedBase, 20);
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const Maze& m = mazes[rng.below(mazes.size())];
    std::vector<Move> moves(rng.below(60));
    for (auto& mv : moves) mv = kMoves[rng.below(4)];
    const auto t = simulate(m, moves);
    const auto again = simulate(m, moves);
    EXPECT_EQ(t.visited, again.visited);
    EXPECT_LE(t.steps_used, m.budget);
    EXPECT_LE(t.gold_collected, m.n_gold);
    EXPECT_LE(t.diamonds_collected, m.n_diamond);
    EXPECT_LE(t.lava_stepped, m.n_lava);
    for (Pos p : t.visited) EXPECT_TRUE(p.in_grid());
    const auto r = reward_vector(m, t);
    for (double v : r) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_TRUE(r[0] == 0.0 || r[0] == 1.0);
    const bool zero = r == RewardVector{0, 0, 0, 0};
    EXPECT_EQ(zero, !t.reached_exit);
  }
}

TEST(SimulateProperty, ExtendingBeforeExitNeverLowersCounts) {
  const auto mazes = accepted_mazes(kTrainSeedBase, 10);
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const Maze& m = mazes[rng.below(mazes.size())];
    std::vector<Move> moves(rng.below(40));
    for (auto& mv : moves) mv = kMoves[rng.below(4)];
    const auto before = simulate(m, moves);
    if (before.reached_exit) continue;
    moves.push_back(kMoves[rng.below(4)]);
    const auto after = simulate(m, moves);
    EXPECT_GE(after.gold_collected, before.gold_collected);
    EXPECT_GE(after.diamonds_collected, before.diamonds_collected);
    EXPECT_GE(after.lava_stepped, before.lava_stepped);
  }
}

TEST(MazeAscii, RoundTripKeepsGrid) {
  for (const auto& m : accepted_mazes(kTrainSeedBase, 20)) {
    const Maze back = parse_ascii(render_ascii(m));
    EXPECT_EQ(back.grid, m.grid);
    EXPECT_EQ(back.budget, m.budget);
    EXPECT_EQ(deserialize_maze(serialize_maze(m)), m);
  }
}

TEST(MazeAscii, TwoStartsIsAnError) {
  std::string text = kOpenGrid;
  text[2] = 'S';
  try {
    parse_ascii(text);
    FAIL() << "expected a parse error";
  } catch (const MazeParseError& e) {
    EXPECT_NE(std::string(e.what()).find("one S"), std::string::npos);
  }
}

TEST(MazeAscii, EightRowsIsAnError) {
  std::string text = kOpenGrid;
  text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(parse_ascii(text), MazeParseError);
}

TEST(MazeAscii, BadGlyphReportsRowAndColumn) {
  std::string text = kOpenGrid;
  text[18 * 2 + 4] = 'X';  // row 2, column 2
  try {
    parse_ascii(text);
    FAIL() << "expected a parse error";
  } catch (const MazeParseError& e) {
    EXPECT_EQ(e.row(), 2);
    EXPECT_EQ(e.col(), 2);
  }
}

TEST(MazeAscii, SidecarMismatchIsAnError) {
  const Maze m = first_accepted(kTrainSeedBase);
  std::string text = serialize_maze(m);
  const std::string key = "\"counts\":{\"gold\":";
  const auto at = text.find(key);
  ASSERT_NE(at, std::string::npos);
  text[at + key.size()] = '9';
  EXPECT_THROW(deserialize_maze(text), MazeParseError);
}

}  // namespace
}  // namespace vpo
