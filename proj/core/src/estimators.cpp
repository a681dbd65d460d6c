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

#include "vpo/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vpo {

namespace {

void require_single(const CandidateSet& set, const char* who) {
  if (set.answers.size() != 1) {
    throw std::invalid_argument(std::string(who) + " expects one answer per rollout, got " +
                                std::to_string(set.answers.size()));
  }
}

const ScalarPreset& preset_or_default(const EstimatorConfig& config) {
  return config.preset ? *config.preset : preset_by_name("maze_uniform");
}

}  // namespace

const char* estimator_name(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::Grpo: return "grpo";
    case EstimatorMode::RandomW: return "random_w";
    case EstimatorMode::MultiRlvr: return "multi_rlvr";
    case EstimatorMode::Vpo: return "vpo";
    case EstimatorMode::Gdpo: return "gdpo";
    case EstimatorMode::GoalConditioned: return "goal_conditioned";
  }
  return "?";
}

EstimatorMode estimator_from_name(std::string_view name) {
  for (auto mode : {EstimatorMode::Grpo, EstimatorMode::RandomW, EstimatorMode::MultiRlvr, EstimatorMode::Vpo,
                    EstimatorMode::Gdpo, EstimatorMode::GoalConditioned}) {
    if (name == estimator_name(mode)) return mode;
  }
  throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

bool single_answer_mode(EstimatorMode mode) {
  return mode == EstimatorMode::Grpo || mode == EstimatorMode::RandomW || mode == EstimatorMode::Gdpo ||
         mode == EstimatorMode::GoalConditioned;
}

const char* aggregation_name(Aggregation a) { return a == Aggregation::Mean ? "mean" : "max"; }

Aggregation aggregation_from_name(std::string_view name) {
  if (name == "mean") return Aggregation::Mean;
  if (name == "max") return Aggregation::Max;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) + "'");
}

AdvantageResult grpo_advantages(std::span<const double> scores, double eps) {
  if (scores.size() < 2) throw std::invalid_argument("group advantages need G >= 2");
  AdvantageResult out;
  out.eps = eps;
  const auto n = static_cast<double>(scores.size());
  for (double s : scores) out.mean += s;
  out.mean /= n;
  double var = 0.0;
  for (double s : scores) var += (s - out.mean) * (s - out.mean);
  out.std = std::sqrt(var / n);
  out.advantages.reserve(scores.size());
  for (double s : scores) out.advantages.push_back((s - out.mean) / (out.std + eps));
  return out;
}

double score_grpo(const CandidateSet& set, const ScalarPreset& preset) {
  require_single(set, "score_grpo");
  return gold_scalar(set.answers.front().reward, preset);
}

double score_random_w(const CandidateSet& set, const WeightVector& w) {
  require_single(set, "score_random_w");
  return scalarize(w, set.answers.front().reward);
}

double score_multi_rlvr(const CandidateSet& set, const ScalarPreset& preset, Aggregation aggregation) {
  if (set.answers.empty()) throw std::invalid_argument("score_multi_rlvr of an empty set");
  std::vector<const SampledAnswer*> survivors;
  for (const auto& a : set.answers) {
    const bool dup = std::any_of(survivors.begin(), survivors.end(),
                                 [&](const SampledAnswer* s) { return s->trajectory.moves == a.trajectory.moves; });
    if (!dup) survivors.push_back(&a);
  }
  double total = 0.0;
  double best = 0.0;
  for (size_t i = 0; i < survivors.size(); ++i) {
    const double v = gold_scalar(survivors[i]->reward, preset);
    total += v;
    best = i == 0 ? v : std::max(best, v);
  }
  return aggregation == Aggregation::Mean ? total / static_cast<double>(survivors.size()) : best;
}

double score_vpo(const CandidateSet& set, std::span<const WeightVector> shared) {
  const auto rewards = set.reward_vectors();
  return set_reward_mc(rewards, shared);
}

double score_vpo_exact(const CandidateSet& set) {
  const auto rewards = set.reward_vectors();
  return set_reward_exact(rewards).value;
}

Vec score_gdpo(std::span<const Vec> rewards, std::span<const double> preset_weights, double eps) {
  if (rewards.size() < 2) throw std::invalid_argument("GDPO needs G >= 2");
  const size_t d = preset_weights.size();
  for (const Vec& r : rewards) {
    if (r.size() != d) throw std::invalid_argument("GDPO reward/preset dimension mismatch");
  }
  Vec adv(rewards.size(), 0.0);
  Vec column(rewards.size());
  for (size_t j = 0; j < d; ++j) {
    for (size_t i = 0; i < rewards.size(); ++i) column[i] = rewards[i][j];
    const auto z = grpo_advantages(column, eps);
    for (size_t i = 0; i < rewards.size(); ++i) adv[i] += preset_weights[j] * z.advantages[i];
  }
  return adv;
}

std::optional<WeightVector> goal_condition(EstimatorMode mode, const WeightVector& w) {
  if (mode != EstimatorMode::GoalConditioned) {
    throw std::invalid_argument(std::string("goal conditioning is not available for estimator ") +
                                estimator_name(mode));
  }
  return w;
}

double score_goal_conditioned(const CandidateSet& set) {
  require_single(set, "score_goal_conditioned");
  if (!set.goal) throw std::invalid_argument("goal-conditioned rollout carries no goal weights");
  return scalarize(*set.goal, set.answers.front().reward);
}

void score_group(RolloutGroup& group, const EstimatorConfig& config) {
  const ScalarPreset& preset = preset_or_default(config);
  const size_t g = group.sets.size();
  if (g < 2) throw std::invalid_argument("a rollout group needs G >= 2");
  if (config.mode != EstimatorMode::GoalConditioned) {
    for (const auto& s : group.sets) {
      if (s.goal) throw std::invalid_argument("conditioning block present outside goal-conditioned mode");
    }
  }
  group.scores.assign(g, 0.0);
  switch (config.mode) {
    case EstimatorMode::Grpo:
      for (size_t i = 0; i < g; ++i) group.scores[i] = score_grpo(group.sets[i], preset);
      break;
    case EstimatorMode::RandomW:
      if (group.rollout_weights.size() != g) throw std::invalid_argument("random_w needs one weight per rollout");
      for (size_t i = 0; i < g; ++i) {
        if (!group.rollout_weights[i]) throw std::invalid_argument("random_w rollout without weights");
        group.scores[i] = score_random_w(group.sets[i], *group.rollout_weights[i]);
      }
      break;
    case EstimatorMode::MultiRlvr:
      for (size_t i = 0; i < g; ++i) group.scores[i] = score_multi_rlvr(group.sets[i], preset, config.aggregation);
      break;
    case EstimatorMode::Vpo:
      if (group.shared_weights.empty()) throw std::invalid_argument("vpo group without shared weight draws");
      for (size_t i = 0; i < g; ++i) group.scores[i] = score_vpo(group.sets[i], group.shared_weights);
      break;
    case EstimatorMode::GoalConditioned:
      for (size_t i = 0; i < g; ++i) group.scores[i] = score_goal_conditioned(group.sets[i]);
      break;
    case EstimatorMode::Gdpo: {
      std::vector<Vec> rows;
      rows.reserve(g);
      for (size_t i = 0; i < g; ++i) {
        require_single(group.sets[i], "GDPO");
        rows.push_back(group.sets[i].reward_vectors().front());
        group.scores[i] = gold_scalar(rows.back(), preset);
      }
      group.advantages = score_gdpo(rows, preset.weights, config.eps);
      group.stats = grpo_advantages(group.scores, config.eps);
      group.stats.advantages = group.advantages;
      return;
    }
  }
  group.stats = grpo_advantages(group.scores, config.eps);
  group.advantages = group.stats.advantages;
}

}  // namespace vpo
