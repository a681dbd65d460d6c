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

// Per-rollout scores for every training method and the group-normalized
// advantage they all feed.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpo/policy.hpp"
#include "vpo/reward.hpp"

namespace vpo {

enum class EstimatorMode { Grpo, RandomW, MultiRlvr, Vpo, Gdpo, GoalConditioned };

const char* estimator_name(EstimatorMode mode);
EstimatorMode estimator_from_name(std::string_view name);
/// Modes that score a single answer per rollout.
bool single_answer_mode(EstimatorMode mode);

enum class Aggregation { Mean, Max };
const char* aggregation_name(Aggregation a);
Aggregation aggregation_from_name(std::string_view name);

struct AdvantageResult {
  Vec advantages;
  double mean = 0.0;
  double std = 0.0;  // population
  double eps = 0.0;
};

/// (score_i - mean) / (population std + eps). Requires at least two scores.
AdvantageResult grpo_advantages(std::span<const double> scores, double eps = 1e-6);

/// Gold scalar of the single answer.
double score_grpo(const CandidateSet& set, const ScalarPreset& preset);

/// w . r of the single answer, with w drawn fresh for this rollout.
double score_random_w(const CandidateSet& set, const WeightVector& w);

/// De-duplicates answers by exact move sequence, then aggregates the gold
/// scalar over the survivors.
double score_multi_rlvr(const CandidateSet& set, const ScalarPreset& preset, Aggregation aggregation = Aggregation::Mean);

/// Monte-Carlo set reward under weight draws shared by the whole group.
double score_vpo(const CandidateSet& set, std::span<const WeightVector> shared);

/// Exact-oracle variant of score_vpo (d <= 4).
double score_vpo_exact(const CandidateSet& set);

/// Per-dimension z-scores within the group combined with w*. Returns the
/// advantages directly. `rewards` holds one row per rollout.
Vec score_gdpo(std::span<const Vec> rewards, std::span<const double> preset_weights, double eps = 1e-6);

/// Conditioning block for a goal-conditioned rollout; throws in any other mode.
std::optional<WeightVector> goal_condition(EstimatorMode mode, const WeightVector& w);

/// w . r of the single answer of a goal-conditioned rollout, w = set.goal.
double score_goal_conditioned(const CandidateSet& set);

struct EstimatorConfig {
  EstimatorMode mode = EstimatorMode::Grpo;
  const ScalarPreset* preset = nullptr;  // defaults to maze_uniform
  Aggregation aggregation = Aggregation::Mean;
  double eps = 1e-6;
};

/// G rollouts for one maze plus everything needed to re-derive their scores.
struct RolloutGroup {
  int maze_id = 0;
  std::vector<CandidateSet> sets;
  std::vector<WeightVector> shared_weights;                // VPO: K draws used for every set
  std::vector<std::optional<WeightVector>> rollout_weights;  // Random-w: per-rollout draw
  Vec scores;
  Vec advantages;
  AdvantageResult stats;
};

/// Fills group.scores and group.advantages according to `config.mode`.
void score_group(RolloutGroup& group, const EstimatorConfig& config);

}  // namespace vpo
