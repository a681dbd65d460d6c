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

// Scalarization weights on the simplex and the set-level reward
//   R(S) = E_{w ~ Dir(alpha)} [ max_{y in S} w . r(y) ],
// estimated by Monte Carlo over shared weight draws, with exact oracles for
// small dimensions.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpo/rng.hpp"

namespace vpo {

using Vec = std::vector<double>;

/// A point on the probability simplex.
class WeightVector {
 public:
  WeightVector() = default;
  /// Throws std::invalid_argument unless entries are >= 0 and sum to 1
  /// within 1e-12 (relative to the dimension).
  explicit WeightVector(Vec w);

  std::span<const double> values() const { return w_; }
  size_t size() const { return w_.size(); }
  double operator[](size_t i) const { return w_[i]; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  Vec w_;
};

WeightVector uniform_weights(size_t d);

WeightVector sample_dirichlet(Rng& rng, std::span<const double> alpha);
WeightVector sample_dirichlet(Rng& rng, double alpha, size_t d);
std::vector<WeightVector> sample_dirichlet_batch(Rng& rng, double alpha, size_t d, int count);

double scalarize(const WeightVector& w, std::span<const double> r);

/// A fixed deployment scalarization w*.
struct ScalarPreset {
  std::string name;
  Vec weights;  // non-negative, sums to 1
};

/// "maze_uniform" (d=4 mean) and "musique_3x" ((hops + 3 F1) / 7, d=5).
const ScalarPreset& preset_by_name(std::string_view name);
std::vector<std::string> preset_names();

double gold_scalar(std::span<const double> r, const ScalarPreset& preset);
/// Uniform mean over the present dimensions.
double uniform_mean(std::span<const double> r);

/// (1/K) sum_k max_{s in S} W_k . r(s). When `winners` is non-null it
/// receives, per draw, the lowest index attaining the max.
double set_reward_mc(std::span<const Vec> set, std::span<const WeightVector> draws,
                     std::vector<int>* winners = nullptr);

struct ExactSetReward {
  double value = 0.0;
  double error_bound = 0.0;  // |true - value| <= error_bound
  long long nodes = 0;       // quadrature nodes used (0 for closed forms)
};

/// Exact E_w[max_y w.r(y)] under Dir(1). d <= 2 uses the closed form of a
/// piecewise-linear integral; d in {3, 4} integrates over a Kuhn
/// triangulation of a barycentric grid with at least `min_nodes` nodes and
/// returns the midpoint of rigorous convexity bounds.
ExactSetReward set_reward_exact(std::span<const Vec> set, double alpha = 1.0, long long min_nodes = 200000);

}  // namespace vpo
