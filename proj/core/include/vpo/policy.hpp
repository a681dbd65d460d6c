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

// A compact autoregressive policy over move tokens standing in for a language
// model. One "answer" is a move sequence ended by STOP, the exit, or the step
// budget; a chain is m answers emitted in order, each conditioned on the
// reward vectors its predecessors realized.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vpo/maze.hpp"
#include "vpo/reward.hpp"
#include "vpo/rng.hpp"

namespace vpo {

inline constexpr int kActions = 5;  // UP, DOWN, LEFT, RIGHT, STOP
inline constexpr int kStopAction = 4;

/// Per-direction navigation features (one block per answer slot).
enum class NavFeature : int {
  ExitStep,     // BFS distance to the exit shrinks (+1), grows (-1) or blocked (0)
  NextBlocked,  // neighbour is a wall or off-grid
};
inline constexpr int kNavPerDirection = 2;
inline constexpr int kConditioningCross = 4;  // per direction, see features()

/// Layout of the feature vector. All blocks are always present; unused
/// blocks stay zero, so the length depends only on (m, d).
///
///   position one-hot                 81
///   3x3 window glyph one-hots        9 * 8
///   remaining budget fraction        1
///   collected gold/diamond/lava      3
///   answer index one-hot             m
///   prior answers' reward vectors    (m - 1) * d
///   goal conditioning                d + 4 * 4
///   navigation, per answer slot      m * 4 * 2
///   bias                             1
struct FeatureSpec {
  int version = 1;
  int m = 1;
  int reward_dim = kRewardDim;

  int position_offset() const { return 0; }
  int window_offset() const { return kMazeCells; }
  int budget_offset() const { return window_offset() + 9 * kCellKinds; }
  int items_offset() const { return budget_offset() + 1; }
  int answer_offset() const { return items_offset() + 3; }
  int prior_offset() const { return answer_offset() + m; }
  int conditioning_offset() const { return prior_offset() + (m - 1) * reward_dim; }
  int conditioning_size() const { return reward_dim + 4 * kConditioningCross; }
  int nav_offset() const { return conditioning_offset() + conditioning_size(); }
  int nav_slot_size() const { return 4 * kNavPerDirection; }
  int nav_index(int slot, Move dir, NavFeature f) const {
    return nav_offset() + slot * nav_slot_size() + static_cast<int>(dir) * kNavPerDirection + static_cast<int>(f);
  }
  int bias_offset() const { return nav_offset() + m * nav_slot_size(); }
  int size() const { return bias_offset() + 1; }

  /// Canonical text description; its SHA-256 is the feature-spec hash.
  std::string describe() const;
  std::string hash() const;

  void validate() const;
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// A maze with the BFS distance maps the features need.
struct PreparedMaze {
  explicit PreparedMaze(Maze m);
  Maze maze;
  DistanceMap to_exit;
  DistanceMap to_gold;
  DistanceMap to_diamond;
};

struct AgentState {
  Pos position;
  CellSet touched;
  int steps_remaining = 0;
  int gold = 0;
  int diamonds = 0;
  int lava = 0;
};

AgentState state_of(const Walker& walker, const Maze& maze);

struct AnswerContext {
  int answer_index = 0;
  std::vector<RewardVector> prior;      // realized rewards of answers 0..i-1
  std::optional<WeightVector> goal;     // set only by the goal-conditioned estimator
};

struct SparseFeatures {
  std::vector<int> index;
  std::vector<double> value;
  void clear() {
    index.clear();
    value.clear();
  }
  void add(int i, double v) {
    if (v != 0.0) {
      index.push_back(i);
      value.push_back(v);
    }
  }
};

void encode_features(const FeatureSpec& spec, const PreparedMaze& maze, const AgentState& state,
                     const AnswerContext& ctx, SparseFeatures& out);

/// Dense feature vector of length spec.size().
Vec features(const FeatureSpec& spec, const PreparedMaze& maze, const AgentState& state, const AnswerContext& ctx);

enum class Arch { Linear, Hidden };
const char* arch_name(Arch arch);
Arch arch_from_name(std::string_view name);

/// Flat parameter vector. Linear: W (5 x F) row-major. Hidden adds a tanh
/// layer on top of the linear path: logits = W x + V tanh(U x), with U
/// (H x F) then V (5 x H) appended after W.
struct PolicyParams {
  FeatureSpec spec;
  Arch arch = Arch::Linear;
  int hidden = 0;
  Vec theta;

  static size_t parameter_count(const FeatureSpec& spec, Arch arch, int hidden);
  static PolicyParams zeros(const FeatureSpec& spec, Arch arch = Arch::Linear, int hidden = 0);
  void check_shape() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct InitOptions {
  bool heuristic = true;    // prior toward the exit, away from walls, against early STOP
  double exit_pull = 1.5;
  double wall_push = -2.0;
  double stop_bias = -3.0;
  double noise = 0.01;      // N(0, noise) added to every weight
  uint64_t seed = 0;
};

PolicyParams init_policy(const FeatureSpec& spec, Arch arch, int hidden, const InitOptions& opts);

/// Forward pass: raw (temperature-free) logits. `hidden_out`, when non-null,
/// receives tanh activations for the Hidden arch.
std::array<double, kActions> policy_logits(const PolicyParams& params, const SparseFeatures& x,
                                           std::vector<double>* hidden_out = nullptr);

/// log softmax(logits / temperature).
std::array<double, kActions> log_softmax(const std::array<double, kActions>& logits, double temperature);

struct Decoding {
  double temperature = 1.0;
  bool greedy = false;  // argmax, lowest index on ties
};

struct SampledAnswer {
  std::vector<int> actions;      // move indices, kStopAction last if STOP was emitted
  std::vector<double> logprobs;  // per action, at the decoding temperature
  Trajectory trajectory;
  RewardVector reward{};
};

/// One answer sampled until STOP, the exit or the budget.
SampledAnswer sample_trajectory(Rng& rng, const PolicyParams& params, const PreparedMaze& maze,
                                const AnswerContext& ctx, const Decoding& decoding);

struct CandidateSet {
  std::vector<SampledAnswer> answers;
  std::optional<WeightVector> goal;
  double temperature = 1.0;
  std::string feature_hash;

  size_t token_count() const;
  std::vector<Vec> reward_vectors() const;
};

/// m answers in order; answer i sees the rewards of answers 0..i-1.
CandidateSet rollout_chain(Rng& rng, const PolicyParams& params, const PreparedMaze& maze, int m,
                           const Decoding& decoding, std::optional<WeightVector> goal = std::nullopt);

/// Context of answer i within `chain`.
AnswerContext chain_context(const CandidateSet& chain, int answer_index);

/// Replays `chain` under `params`, calling `weight(token, logprob)` for every
/// token in chain order and adding weight * d logprob / d theta into `grad`
/// (resized on first use). Returns the per-token log-probabilities.
std::vector<double> accumulate_token_gradients(const PolicyParams& params, const PreparedMaze& maze,
                                               const CandidateSet& chain,
                                               const std::function<double(size_t, double)>& weight,
                                               Vec& grad);

/// Per-token log-probabilities of `chain` under `params` (no gradient).
std::vector<double> token_logprobs(const PolicyParams& params, const PreparedMaze& maze, const CandidateSet& chain);

struct LogProbGrad {
  double logprob = 0.0;
  Vec grad;
};

/// Total chain log-probability and its exact gradient.
LogProbGrad logprob_and_grad(const PolicyParams& params, const PreparedMaze& maze, const CandidateSet& chain);

/// Versioned JSON checkpoint carrying the feature-spec hash and a hash of the
/// parameter payload.
std::string policy_to_json(const PolicyParams& params);
/// Throws std::runtime_error on a malformed file or either hash mismatch.
PolicyParams policy_from_json(std::string_view text);

}  // namespace vpo
