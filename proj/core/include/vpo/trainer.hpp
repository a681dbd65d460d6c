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

// Grouped-rollout policy optimization: PPO-clip with a dual clip, k3 KL to a
// frozen reference, token-mean aggregation and AdamW with global-norm
// clipping.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vpo/estimators.hpp"
#include "vpo/policy.hpp"

namespace vpo {

struct TrainConfig {
  EstimatorMode estimator = EstimatorMode::Grpo;
  int G = 8;
  int m = 1;
  int K = 128;
  int batch_size = 128;
  int total_steps = 1000;
  double learning_rate = 0.05;
  double clip_eps = 0.2;
  double dual_clip = 3.0;
  double kl_coef = 1e-3;
  double eps = 1e-6;
  double temperature = 1.0;
  uint64_t seed = 0;

  // Optional keys.
  Arch arch = Arch::Linear;
  int hidden_width = 32;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double alpha = 1.0;
  std::string preset = "maze_uniform";
  Aggregation multi_rlvr_aggregation = Aggregation::Mean;
  int checkpoint_every = 0;  // 0: final checkpoint only
  int eval_every = 50;       // greedy validation cadence; 0 disables
  int eval_mazes = 16;
  InitOptions init;

  void validate() const;
  FeatureSpec feature_spec() const { return FeatureSpec{1, m, kRewardDim}; }
};

/// Keys every config file must carry.
const std::vector<std::string>& required_config_keys();

/// Parses the JSON config. Throws std::invalid_argument naming a missing or
/// invalid key.
TrainConfig config_from_json(std::string_view text);
std::string config_to_json(const TrainConfig& config);

struct AdamState {
  Vec m;
  Vec v;
  long long t = 0;
};

struct AdamConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip = 1.0;  // global-norm clip; <= 0 disables
};

/// One AdamW step in place. Returns the gradient norm before clipping.
double adam_update(AdamState& state, Vec& params, const Vec& grads, const AdamConfig& config);

struct SurrogateTerm {
  double objective = 0.0;
  double d_logp = 0.0;  // derivative w.r.t. logp_new
};

/// rho = exp(new - old); min(rho A, clip(rho) A), lower-bounded by c A when A < 0.
SurrogateTerm ppo_clip_surrogate(double logp_new, double logp_old, double advantage, double clip_eps, double dual_clip);

/// exp(ref - new) - (ref - new) - 1 and its derivative w.r.t. logp_new.
SurrogateTerm kl_k3(double logp_new, double logp_ref);

struct TrainState {
  PolicyParams params;
  PolicyParams reference;
  AdamState adam;
  int step = 0;
};

TrainState init_train_state(const TrainConfig& config);

struct StepMetrics {
  int step = 0;
  double mean_score = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
  double adv_mean = 0.0;
  double adv_std = 0.0;
  double loss = 0.0;
  double max_ratio_deviation = 0.0;  // max |rho - 1| at gradient time
  long long tokens = 0;
  std::optional<double> greedy_eval_score;
};

struct StepOutputs {
  StepMetrics metrics;
  std::vector<RolloutGroup> groups;
  Vec gradient;  // loss gradient before clipping
};

/// One rollout-score-update cycle on `batch` (ids index the training split
/// and key the rollout streams). Throws std::runtime_error on a non-finite
/// loss.
StepOutputs train_step(TrainState& state, std::span<const PreparedMaze> mazes, std::span<const int> batch,
                       const TrainConfig& config, int threads = 1);

/// Maze ids for step `step` (0-based): an epoch-wise shuffle keyed by the seed.
std::vector<int> batch_for_step(const TrainConfig& config, int step, int n_mazes);

/// Mean over mazes of the best gold scalar in one greedy chain.
double greedy_score(const PolicyParams& params, std::span<const PreparedMaze> mazes, const TrainConfig& config,
                    int threads = 1);

std::string train_state_to_json(const TrainState& state, const TrainConfig& config);
/// Throws std::runtime_error on malformed input or hash mismatch.
TrainState train_state_from_json(std::string_view text, TrainConfig* config_out = nullptr);

struct TrainOptions {
  int threads = 1;
  std::optional<std::filesystem::path> resume_from;
  bool quiet = true;
};

struct TrainResult {
  TrainState state;
  std::vector<StepMetrics> metrics;
  std::vector<std::filesystem::path> checkpoints;
  std::string reference_hash_before;
  std::string reference_hash_after;
};

inline constexpr const char* kMetricsHeader = "step,mean_score,kl,grad_norm,adv_mean,adv_std,greedy_eval_score";
std::string metrics_csv_row(const StepMetrics& m);

/// Runs config.total_steps steps; writes out_dir/metrics.csv,
/// out_dir/checkpoints/step_NNNNNN.json and out_dir/final.json.
TrainResult train(const TrainConfig& config, std::span<const Maze> train_mazes, std::span<const Maze> validation,
                  const std::filesystem::path& out_dir, const TrainOptions& options = {});

std::string params_hash(const PolicyParams& params);

}  // namespace vpo
