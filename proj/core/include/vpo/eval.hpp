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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpo/maze.hpp"
#include "vpo/policy.hpp"
#include "vpo/reward.hpp"

namespace vpo {

struct Candidate {
  int chain_id = 0;
  int answer_idx = 0;
  std::vector<Move> moves;
  RewardVector reward{};
  double scalar = 0.0;
};

/// Candidates of one maze in draw order. Chains are kept whole, so a
/// multi-answer pool holds ceil(k_max / m) * m entries.
struct EvalPool {
  int maze_id = 0;
  int m = 1;
  double temperature = 0.7;
  std::vector<Candidate> candidates;

  std::vector<double> scalars() const;
  std::vector<Vec> rewards() const;
  int successes() const;  // candidates that reached the exit
};

struct PoolSettings {
  int k_max = 30;
  int m = 1;  // 1 draws i.i.d. single answers; >1 draws whole chains
  double temperature = 0.7;
  std::optional<WeightVector> goal;
  std::string preset = "maze_uniform";
};

EvalPool build_pool(Rng& rng, const PolicyParams& params, const PreparedMaze& maze, int maze_id,
                    const PoolSettings& settings);

/// Max over the first k scores.
double best_at_k_prefix(std::span<const double> scores, int k);
/// Expected max over a uniform k-subset drawn without replacement.
double best_at_k_unbiased(std::span<const double> scores, int k);
/// Probability that a uniform k-subset of n items with c successes holds one.
double pass_at_k(int n, int c, int k);
/// Mean pairwise L1 distance.
double diversity_l1(std::span<const Vec> rewards);
/// Mean off-diagonal Pearson correlation over non-constant dimensions.
/// Empty when fewer than two dimensions vary.
std::optional<double> rho_bar(std::span<const Vec> rewards);

struct MetricsRecord {
  std::string method;
  int k = 0;
  double best_prefix = 0.0;
  double best_unbiased = 0.0;
  double pass = 0.0;
  double diversity = 0.0;
  std::optional<double> rho_bar;
  int n_mazes = 0;
  std::string seed;  // eval seed, or "mean"
};

struct EvalConfig {
  std::string method = "policy";
  std::vector<int> ks{3, 5, 10, 30};
  int pool_size = 30;
  int m = 1;
  double temperature = 0.7;
  bool goal_conditioned = false;  // evaluate at w = w*
  std::string preset = "maze_uniform";
  int seeds = 1;
  uint64_t seed = 0;  // eval seed i is seed + i
  int threads = 1;

  void validate() const;
};

struct SeedPools {
  uint64_t seed = 0;
  std::vector<EvalPool> pools;
};

struct EvalOutput {
  std::vector<MetricsRecord> records;  // per seed and k, then one mean row per k
  std::vector<SeedPools> pools;
};

/// Metrics at every k for one seed's pools, averaged over mazes.
std::vector<MetricsRecord> pool_metrics(std::span<const EvalPool> pools, std::span<const int> ks,
                                        const std::string& method, const std::string& seed);

EvalOutput evaluate(const PolicyParams& params, std::span<const Maze> mazes, const EvalConfig& config);

inline constexpr const char* kEvalHeader = "method,k,best_prefix,best_unbiased,pass,diversity,rho_bar,n_mazes,seed";
std::string metrics_csv(std::span<const MetricsRecord> records);
std::string pools_jsonl(std::span<const SeedPools> pools);

/// Parses a candidate log back into pools keyed by (seed, maze_id), in file order.
std::vector<SeedPools> pools_from_jsonl(std::string_view text);

struct DiagnoseRow {
  std::string seed;
  std::string maze_id;  // or "mean"
  int n = 0;
  double diversity = 0.0;
  std::optional<double> rho_bar;
};

/// Per-pool diversity and rho-bar plus a mean row.
std::vector<DiagnoseRow> diagnose(std::span<const SeedPools> pools);
inline constexpr const char* kDiagnoseHeader = "seed,maze_id,n,diversity,rho_bar";
std::string diagnose_csv(std::span<const DiagnoseRow> rows);

}  // namespace vpo
