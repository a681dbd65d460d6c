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

#include "vpo/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vpo {

namespace {

void check_set(std::span<const Vec> set) {
  if (set.empty()) throw std::invalid_argument("set reward of an empty set");
  const size_t d = set.front().size();
  if (d == 0) throw std::invalid_argument("zero-dimensional reward vector");
  for (const Vec& r : set) {
    if (r.size() != d) throw std::invalid_argument("reward vectors differ in dimension");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_scalarized(std::span<const Vec> set, std::span<const double> w) {
  double best = dot(w, set.front());
  for (size_t i = 1; i < set.size(); ++i) best = std::max(best, dot(w, set[i]));
  return best;
}

// f(t) = max_i (t a_i + (1 - t) b_i) is convex and piecewise linear on
// [0, 1]; integrate exactly between consecutive breakpoints.
double closed_form_d2(std::span<const Vec> set) {
  std::vector<double> knots{0.0, 1.0};
  for (size_t i = 0; i < set.size(); ++i) {
    for (size_t j = i + 1; j < set.size(); ++j) {
      const double slope = (set[i][0] - set[i][1]) - (set[j][0] - set[j][1]);
      if (slope == 0.0) continue;
      const double t = (set[j][1] - set[i][1]) / slope;
      if (t > 0.0 && t < 1.0) knots.push_back(t);
    }
  }
  std::sort(knots.begin(), knots.end());
  auto f = [&](double t) {
    const double w[2] = {t, 1.0 - t};
    return max_scalarized(set, w);
  };
  double total = 0.0;
  for (size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i];
    const double b = knots[i + 1];
    if (b > a) total += 0.5 * (b - a) * (f(a) + f(b));
  }
  return total;
}

long long binom(long long n, long long k) {
  long long r = 1;
  for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Cumulative coordinates x_1 <= ... <= x_{d-1} in [0, n] parametrize the
// scaled simplex; the Freudenthal triangulation of the unit-cube grid
// restricted to that orthoscheme gives n^{d-1} simplices of equal volume.
// For convex f, f(centroid) <= mean over a cell <= mean of vertex values.
ExactSetReward kuhn_bounds(std::span<const Vec> set, long long min_nodes) {
  const int d = static_cast<int>(set.front().size());
  const int dims = d - 1;
  long long n = 1;
  while (binom(n + dims, dims) < min_nodes) ++n;

  const long long side = n + 1;
  long long stride_total = 1;
  for (int i = 0; i < dims; ++i) stride_total *= side;
  std::vector<double> node_value(static_cast<size_t>(stride_total), 0.0);

  std::vector<double> w(static_cast<size_t>(d));
  auto weights_from_x = [&](const std::vector<double>& x) {
    double prev = 0.0;
    for (int i = 0; i < dims; ++i) {
      w[static_cast<size_t>(i)] = (x[static_cast<size_t>(i)] - prev) / static_cast<double>(n);
      prev = x[static_cast<size_t>(i)];
    }
    w[static_cast<size_t>(dims)] = (static_cast<double>(n) - prev) / static_cast<double>(n);
  };
  auto flat = [&](const std::vector<int>& x) {
    long long idx = 0;
    for (int i = 0; i < dims; ++i) idx = idx * side + x[static_cast<size_t>(i)];
    return idx;
  };

  // Visit every non-decreasing integer sequence with entries in [0, hi].
  auto for_each_sorted = [&](int hi, auto&& visit) {
    std::vector<int> x(static_cast<size_t>(dims), 0);
    for (;;) {
      visit(x);
      int i = dims - 1;
      while (i >= 0 && x[static_cast<size_t>(i)] == hi) --i;
      if (i < 0) return;
      const int v = x[static_cast<size_t>(i)] + 1;
      for (int j = i; j < dims; ++j) x[static_cast<size_t>(j)] = v;
    }
  };

  long long nodes = 0;
  std::vector<double> xd(static_cast<size_t>(dims));
  for_each_sorted(static_cast<int>(n), [&](const std::vector<int>& x) {
    for (int i = 0; i < dims; ++i) xd[static_cast<size_t>(i)] = x[static_cast<size_t>(i)];
    weights_from_x(xd);
    node_value[static_cast<size_t>(flat(x))] = max_scalarized(set, w);
    ++nodes;
  });

  std::vector<int> perm(static_cast<size_t>(dims));
  std::vector<int> vertex(static_cast<size_t>(dims));
  std::vector<double> centroid(static_cast<size_t>(dims));
  double lower = 0.0;
  double upper = 0.0;
  long long cells = 0;
  for_each_sorted(static_cast<int>(n) - 1, [&](const std::vector<int>& base) {
    std::iota(perm.begin(), perm.end(), 0);
    do {
      // Inside the orthoscheme iff equal neighbouring base coordinates are
      // incremented in the order that keeps x non-decreasing.
      bool inside = true;
      for (int i = 0; i + 1 < dims && inside; ++i) {
        if (base[static_cast<size_t>(i)] != base[static_cast<size_t>(i + 1)]) continue;
        const auto pos_i = std::find(perm.begin(), perm.end(), i) - perm.begin();
        const auto pos_next = std::find(perm.begin(), perm.end(), i + 1) - perm.begin();
        inside = pos_next < pos_i;
      }
      if (!inside) continue;
      vertex = base;
      double vsum = node_value[static_cast<size_t>(flat(vertex))];
      for (int i = 0; i < dims; ++i) centroid[static_cast<size_t>(i)] = vertex[static_cast<size_t>(i)];
      for (int j = 0; j < dims; ++j) {
        ++vertex[static_cast<size_t>(perm[static_cast<size_t>(j)])];
        vsum += node_value[static_cast<size_t>(flat(vertex))];
        for (int i = 0; i < dims; ++i) centroid[static_cast<size_t>(i)] += vertex[static_cast<size_t>(i)];
      }
      for (double& c : centroid) c /= static_cast<double>(dims + 1);
      weights_from_x(centroid);
      lower += max_scalarized(set, w);
      upper += vsum / static_cast<double>(dims + 1);
      ++cells;
    } while (std::next_permutation(perm.begin(), perm.end()));
  });
  lower /= static_cast<double>(cells);
  upper /= static_cast<double>(cells);
  // Pad the bound for accumulated rounding.
  return {0.5 * (lower + upper), 0.5 * (upper - lower) + 1e-12, nodes};
}

}  // namespace

WeightVector::WeightVector(Vec w) : w_(std::move(w)) {
  if (w_.empty()) throw std::invalid_argument("empty weight vector");
  double s = 0.0;
  for (double x : w_) {
    if (!(x >= 0.0)) throw std::invalid_argument("negative or NaN weight");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-12 * static_cast<double>(w_.size())) {
    throw std::invalid_argument("weights do not sum to 1");
  }
}

WeightVector uniform_weights(size_t d) { return WeightVector(Vec(d, 1.0 / static_cast<double>(d))); }

WeightVector sample_dirichlet(Rng& rng, std::span<const double> alpha) {
  if (alpha.empty()) throw std::invalid_argument("Dirichlet dimension must be >= 1");
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("Dirichlet alpha must be positive");
  }
  if (alpha.size() == 1) return WeightVector(Vec{1.0});
  Vec g(alpha.size());
  double total = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    g[i] = rng.gamma(alpha[i]);
    total += g[i];
  }
  if (!(total > 0.0)) return sample_dirichlet(rng, alpha);  // all-underflow draw; retry
  for (double& x : g) x /= total;
  // Fold the rounding residue into the largest component so the sum is 1.
  const double residue = 1.0 - std::accumulate(g.begin(), g.end(), 0.0);
  *std::max_element(g.begin(), g.end()) += residue;
  return WeightVector(std::move(g));
}

WeightVector sample_dirichlet(Rng& rng, double alpha, size_t d) {
  const Vec a(d, alpha);
  return sample_dirichlet(rng, a);
}

std::vector<WeightVector> sample_dirichlet_batch(Rng& rng, double alpha, size_t d, int count) {
  std::vector<WeightVector> out;
  out.reserve(static_cast<size_t>(std::max(count, 0)));
  const Vec a(d, alpha);
  for (int k = 0; k < count; ++k) out.push_back(sample_dirichlet(rng, a));
  return out;
}

double scalarize(const WeightVector& w, std::span<const double> r) {
  if (w.size() != r.size()) {
    throw std::invalid_argument("scalarize: weight dimension " + std::to_string(w.size()) +
                                " != reward dimension " + std::to_string(r.size()));
  }
  return dot(w.values(), r);
}

const ScalarPreset& preset_by_name(std::string_view name) {
  static const std::vector<ScalarPreset> presets{
      {"maze_uniform", {0.25, 0.25, 0.25, 0.25}},
      {"musique_3x", {1.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7, 3.0 / 7}},
  };
  for (const auto& p : presets) {
    if (p.name == name) return p;
  }
  throw std::invalid_argument("unknown scalar preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"maze_uniform", "musique_3x"}; }

double gold_scalar(std::span<const double> r, const ScalarPreset& preset) {
  if (r.size() != preset.weights.size()) {
    throw std::invalid_argument("preset '" + preset.name + "' expects dimension " +
                                std::to_string(preset.weights.size()));
  }
  if (preset.name == "maze_uniform") return uniform_mean(r);
  return dot(preset.weights, r);
}

double uniform_mean(std::span<const double> r) {
  if (r.empty()) return 0.0;
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

double set_reward_mc(std::span<const Vec> set, std::span<const WeightVector> draws, std::vector<int>* winners) {
  check_set(set);
  if (draws.empty()) throw std::invalid_argument("set_reward_mc needs at least one weight draw");
  if (winners) winners->assign(draws.size(), 0);
  double total = 0.0;
  for (size_t k = 0; k < draws.size(); ++k) {
    const WeightVector& w = draws[k];
    if (w.size() != set.front().size()) throw std::invalid_argument("weight/reward dimension mismatch");
    double best = dot(w.values(), set[0]);
    int arg = 0;
    for (size_t i = 1; i < set.size(); ++i) {
      const double v = dot(w.values(), set[i]);
      if (v > best) {
        best = v;
        arg = static_cast<int>(i);
      }
    }
    if (winners) (*winners)[k] = arg;
    total += best;
  }
  return total / static_cast<double>(draws.size());
}

ExactSetReward set_reward_exact(std::span<const Vec> set, double alpha, long long min_nodes) {
  check_set(set);
  if (alpha != 1.0) throw std::invalid_argument("exact set reward supports alpha = 1 only");
  const size_t d = set.front().size();
  if (set.size() == 1) return {uniform_mean(set.front()), 0.0, 0};
  if (d == 1) {
    double best = set.front()[0];
    for (const Vec& r : set) best = std::max(best, r[0]);
    return {best, 0.0, 0};
  }
  if (d == 2) return {closed_form_d2(set), 0.0, 0};
  if (d <= 4) return kuhn_bounds(set, min_nodes);
  throw std::invalid_argument("exact set reward supports d <= 4, got d = " + std::to_string(d));
}

}  // namespace vpo
