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

#include <benchmark/benchmark.h>

#include "vpo/eval.hpp"
#include "vpo/trainer.hpp"

namespace vpo {
namespace {

void BM_GenerateMaze(benchmark::State& state) {
  uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(generate_maze(seed++));
}
BENCHMARK(BM_GenerateMaze);

std::vector<Vec> random_set(Rng& rng, int n, int d) {
  std::vector<Vec> set(static_cast<size_t>(n), Vec(static_cast<size_t>(d)));
  for (auto& r : set)
    for (auto& x : r) x = rng.uniform();
  return set;
}

void BM_SetRewardMc(benchmark::State& state) {
  Rng rng(1);
  const auto set = random_set(rng, static_cast<int>(state.range(0)), 4);
  const auto draws = sample_dirichlet_batch(rng, 1.0, 4, 128);
  for (auto _ : state) benchmark::DoNotOptimize(set_reward_mc(set, draws));
}
BENCHMARK(BM_SetRewardMc)->Arg(1)->Arg(3)->Arg(8);

void BM_SetRewardExact(benchmark::State& state) {
  Rng rng(2);
  const auto set = random_set(rng, 3, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(set_reward_exact(set));
}
BENCHMARK(BM_SetRewardExact)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_RolloutChain(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const PreparedMaze pm(accepted_mazes(kTrainSeedBase, 1).front());
  const auto params = init_policy(FeatureSpec{1, m, kRewardDim}, Arch::Linear, 0, InitOptions{});
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(rollout_chain(rng, params, pm, m, Decoding{1.0, false}));
}
BENCHMARK(BM_RolloutChain)->Arg(1)->Arg(3);

void BM_ChainGradient(benchmark::State& state) {
  const auto arch = state.range(0) == 0 ? Arch::Linear : Arch::Hidden;
  const PreparedMaze pm(accepted_mazes(kTrainSeedBase, 1).front());
  const auto params = init_policy(FeatureSpec{1, 3, kRewardDim}, arch, arch == Arch::Hidden ? 32 : 0, InitOptions{});
  Rng rng(4);
  const auto chain = rollout_chain(rng, params, pm, 3, Decoding{1.0, false});
  for (auto _ : state) benchmark::DoNotOptimize(logprob_and_grad(params, pm, chain));
}
BENCHMARK(BM_ChainGradient)->Arg(0)->Arg(1);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig c;
  c.estimator = state.range(0) == 0 ? EstimatorMode::Grpo : EstimatorMode::Vpo;
  c.m = state.range(0) == 0 ? 1 : 3;
  c.batch_size = 16;
  const auto mazes = accepted_mazes(kTrainSeedBase, 16);
  const std::vector<PreparedMaze> pm(mazes.begin(), mazes.end());
  auto train_state = init_train_state(c);
  int step = 0;
  for (auto _ : state) {
    const auto batch = batch_for_step(c, step++, static_cast<int>(pm.size()));
    benchmark::DoNotOptimize(train_step(train_state, pm, batch, c));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BestAtKUnbiased(benchmark::State& state) {
  Rng rng(5);
  Vec scores(static_cast<size_t>(state.range(0)));
  for (auto& v : scores) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(best_at_k_unbiased(scores, 10));
}
BENCHMARK(BM_BestAtKUnbiased)->Arg(30)->Arg(10000);

}  // namespace
}  // namespace vpo

BENCHMARK_MAIN();
