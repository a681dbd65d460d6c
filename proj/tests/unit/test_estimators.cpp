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

#include <cmath>
#include <numeric>

#include "vpo/estimators.hpp"

namespace vpo {
namespace {

SampledAnswer answer(const std::string& moves, RewardVector r) {
  SampledAnswer a;
  a.trajectory.moves = moves_from_string(moves);
  a.reward = r;
  return a;
}

CandidateSet chain(std::vector<SampledAnswer> answers) {
  CandidateSet s;
  s.answers = std::move(answers);
  return s;
}

const ScalarPreset& uniform() { return preset_by_name("maze_uniform"); }

TEST(GrpoAdvantages, TwoPoint) {
  const Vec s{1, 0};
  const auto a = grpo_advantages(s);
  EXPECT_NEAR(a.advantages[0], 1.0, 1e-5);
  EXPECT_NEAR(a.advantages[1], -1.0, 1e-5);
  EXPECT_EQ(a.mean, 0.5);
  EXPECT_EQ(a.std, 0.5);
}

TEST(GrpoAdvantages, ConstantScoresGiveZero) {
  const Vec s(8, 0.5);
  for (double v : grpo_advantages(s).advantages) EXPECT_EQ(v, 0.0);
}

TEST(GrpoAdvantages, OneSuccessInFour) {
  const Vec s{0, 0, 0, 1};
  const auto a = grpo_advantages(s);
  // mean 1/4, population sd sqrt(3)/4
  const double sd = std::sqrt(3.0) / 4.0;
  EXPECT_NEAR(a.std, sd, 1e-15);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.advantages[static_cast<size_t>(i)], -0.25 / (sd + 1e-6), 1e-12);
  EXPECT_NEAR(a.advantages[3], 0.75 / (sd + 1e-6), 1e-12);
  EXPECT_NEAR(a.advantages[0], -0.5774, 1e-4);
  EXPECT_NEAR(a.advantages[3], 1.7320, 1e-4);
}

TEST(GrpoAdvantages, SingleScoreThrows) {
  const Vec s{1.0};
  EXPECT_THROW(grpo_advantages(s), std::invalid_argument);
}

TEST(GrpoAdvantages, MeanZeroAndAffineInvariant) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    Vec s(8);
    for (auto& v : s) v = rng.uniform();
    const auto base = grpo_advantages(s);
    EXPECT_LT(std::abs(std::accumulate(base.advantages.begin(), base.advantages.end(), 0.0)), 1e-9);
    const double a = 0.1 + 5 * rng.uniform();
    const double b = rng.uniform() - 0.5;
    Vec moved = s;
    for (auto& v : moved) v = a * v + b;
    // exact invariance needs eps = 0
    const auto plain = grpo_advantages(s, 0.0);
    const auto other = grpo_advantages(moved, 0.0);
    for (size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(other.advantages[i], plain.advantages[i], 1e-9);
  }
}

TEST(ScoreGrpo, Examples) {
  EXPECT_DOUBLE_EQ(score_grpo(chain({answer("RIGHT", {1, 0.5, 0, 1})}), uniform()), 0.625);
  EXPECT_EQ(score_grpo(chain({answer("UP", {0, 0, 0, 0})}), uniform()), 0.0);
  EXPECT_THROW(score_grpo(chain({answer("UP", {0, 0, 0, 0}), answer("UP", {0, 0, 0, 0})}), uniform()),
               std::invalid_argument);
}

TEST(ScoreRandomW, VertexWeightAndExpectation) {
  const auto set = chain({answer("DOWN", {1, 0.2, 0.6, 0.8})});
  EXPECT_EQ(score_random_w(set, WeightVector(Vec{1, 0, 0, 0})), 1.0);
  Rng rng(2);
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = score_random_w(set, sample_dirichlet(rng, 1.0, 4));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, uniform_mean(set.answers[0].reward), 4 * se);
}

TEST(ScoreMultiRlvr, DedupAndAggregation) {
  const RewardVector r06{1, 0.4, 0, 1};  // gold scalar 0.6
  EXPECT_NEAR(score_multi_rlvr(chain({answer("UP", r06), answer("UP", r06), answer("UP", r06)}), uniform()), 0.6,
              1e-15);
  const RewardVector r02{0.8, 0, 0, 0};
  const RewardVector r08{1, 1, 0.2, 1};
  const auto mixed = chain({answer("UP", r02), answer("DOWN", r08), answer("UP", r02)});
  EXPECT_NEAR(score_multi_rlvr(mixed, uniform(), Aggregation::Mean), 0.5, 1e-15);
  EXPECT_NEAR(score_multi_rlvr(mixed, uniform(), Aggregation::Max), 0.8, 1e-15);
  const auto reordered = chain({answer("DOWN", r08), answer("UP", r02)});
  EXPECT_EQ(score_multi_rlvr(reordered, uniform()), score_multi_rlvr(mixed, uniform()));
  EXPECT_THROW(score_multi_rlvr(chain({}), uniform()), std::invalid_argument);
}

TEST(ScoreVpo, SingleAnswerConvergesToGoldScalar) {
  const auto set = chain({answer("UP", {1, 0.25, 0.5, 1})});
  Rng rng(3);
  const auto draws = sample_dirichlet_batch(rng, 1.0, 4, 100000);
  EXPECT_NEAR(score_vpo(set, draws), gold_scalar(set.answers[0].reward, uniform()), 3e-3);
  EXPECT_NEAR(score_vpo_exact(set), gold_scalar(set.answers[0].reward, uniform()), 1e-15);
}

TEST(ScoreVpo, VertexSetBeatsEverySingleton) {
  const auto set = chain({answer("UP", {1, 0, 0, 0}), answer("DOWN", {0, 1, 0, 0}), answer("LEFT", {0, 0, 1, 0}),
                          answer("RIGHT", {0, 0, 0, 1})});
  const double whole = score_vpo_exact(set);
  for (const auto& a : set.answers) EXPECT_GT(whole, score_vpo_exact(chain({a})));
}

TEST(ScoreVpo, DominatedDuplicateLeavesScore) {
  Rng rng(4);
  const auto draws = sample_dirichlet_batch(rng, 1.0, 4, 128);
  auto set = chain({answer("UP", {1, 0.4, 0.2, 1}), answer("DOWN", {1, 0.1, 0.9, 0.6})});
  const double before = score_vpo(set, draws);
  set.answers.push_back(answer("LEFT", {1, 0.1, 0.1, 0.5}));
  EXPECT_EQ(score_vpo(set, draws), before);
}

TEST(ScoreGdpo, ConstantDimensionContributesNothing) {
  const std::vector<Vec> rows{{1, 0.2, 0.5, 1}, {1, 0.8, 0.1, 1}, {1, 0.4, 0.3, 1}};
  const Vec w{0.25, 0.25, 0.25, 0.25};
  const auto adv = score_gdpo(rows, w);
  const Vec z1 = grpo_advantages(Vec{0.2, 0.8, 0.4}).advantages;
  const Vec z2 = grpo_advantages(Vec{0.5, 0.1, 0.3}).advantages;
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(adv[i], 0.25 * (z1[i] + z2[i]), 1e-15);
}

TEST(ScoreGdpo, OneDimensionIsGrpo) {
  const std::vector<Vec> rows{{0.1}, {0.7}, {0.4}, {0.4}};
  const Vec w{1.0};
  const auto adv = score_gdpo(rows, w);
  const auto ref = grpo_advantages(Vec{0.1, 0.7, 0.4, 0.4}).advantages;
  for (size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(adv[i], ref[i]);
}

TEST(ScoreGdpo, RescalingADimensionLeavesAdvantages) {
  const std::vector<Vec> rows{{1, 0.2, 0.5, 1}, {0, 0.8, 0.1, 1}, {1, 0.4, 0.3, 0.5}};
  auto scaled = rows;
  for (auto& r : scaled) r[2] *= 10;
  const Vec w{0.25, 0.25, 0.25, 0.25};
  const auto a = score_gdpo(rows, w, 0.0);
  const auto b = score_gdpo(scaled, w, 0.0);
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  const std::vector<Vec> one{{1, 0, 0, 0}};
  EXPECT_THROW(score_gdpo(one, w), std::invalid_argument);
}

TEST(GoalCondition, ScoresAndModeCheck) {
  const RewardVector r{1, 0.5, 0, 1};
  auto set = chain({answer("UP", r)});
  set.goal = goal_condition(EstimatorMode::GoalConditioned, uniform_weights(4));
  EXPECT_DOUBLE_EQ(score_goal_conditioned(set), gold_scalar(r, uniform()));
  set.goal = WeightVector(Vec{1, 0, 0, 0});
  EXPECT_EQ(score_goal_conditioned(set), 1.0);
  auto other = set;
  other.goal = WeightVector(Vec{0, 0, 1, 0});
  EXPECT_NE(score_goal_conditioned(other), score_goal_conditioned(set));
  EXPECT_THROW(goal_condition(EstimatorMode::Vpo, uniform_weights(4)), std::invalid_argument);
}

TEST(ScoreGroup, GoalOutsideGoalModeIsRejected) {
  RolloutGroup g;
  g.sets = {chain({answer("UP", {1, 0, 0, 1})}), chain({answer("DOWN", {0, 0, 0, 0})})};
  g.sets[0].goal = uniform_weights(4);
  EXPECT_THROW(score_group(g, {EstimatorMode::Grpo}), std::invalid_argument);
}

TEST(ScoreGroup, VpoWithExactSingletonsMatchesGrpo) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    Vec vpo_scores;
    RolloutGroup g;
    for (int i = 0; i < 8; ++i) {
      RewardVector r{rng.uniform() < 0.7 ? 1.0 : 0.0, rng.uniform(), rng.uniform(), rng.uniform()};
      if (r[0] == 0.0) r = {0, 0, 0, 0};
      g.sets.push_back(chain({answer("UP", r)}));
      vpo_scores.push_back(score_vpo_exact(g.sets.back()));
    }
    score_group(g, {EstimatorMode::Grpo});
    const auto vpo = grpo_advantages(vpo_scores);
    for (size_t i = 0; i < 8; ++i) EXPECT_NEAR(vpo.advantages[i], g.advantages[i], 1e-9);
  }
}

TEST(ScoreGroup, VpoPermutationPermutesScores) {
  Rng rng(6);
  RolloutGroup g;
  g.shared_weights = sample_dirichlet_batch(rng, 1.0, 4, 128);
  for (int i = 0; i < 6; ++i) {
    g.sets.push_back(chain({answer("UP", {1, rng.uniform(), rng.uniform(), 1}),
                            answer("DOWN", {1, rng.uniform(), rng.uniform(), rng.uniform()})}));
  }
  score_group(g, {EstimatorMode::Vpo});
  RolloutGroup p = g;
  std::reverse(p.sets.begin(), p.sets.end());
  score_group(p, {EstimatorMode::Vpo});
  for (size_t i = 0; i < 6; ++i) EXPECT_EQ(p.scores[i], g.scores[5 - i]);
}

TEST(ScoreGroup, GdpoSkipsScalarNormalization) {
  RolloutGroup g;
  g.sets = {chain({answer("UP", {1, 0.2, 0, 1})}), chain({answer("DOWN", {1, 0.6, 0, 0.5})}),
            chain({answer("LEFT", {0, 0, 0, 0})})};
  score_group(g, {EstimatorMode::Gdpo});
  std::vector<Vec> rows;
  for (const auto& s : g.sets) rows.push_back(s.reward_vectors().front());
  const auto expect = score_gdpo(rows, uniform().weights);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(g.advantages[i], expect[i]);
}

}  // namespace
}  // namespace vpo
