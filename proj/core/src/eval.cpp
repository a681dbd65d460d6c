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

#include "vpo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vpo/parallel.hpp"

namespace vpo {

std::vector<double> EvalPool::scalars() const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.scalar);
  return out;
}

std::vector<Vec> EvalPool::rewards() const {
  std::vector<Vec> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.emplace_back(c.reward.begin(), c.reward.end());
  return out;
}

int EvalPool::successes() const {
  int n = 0;
  for (const auto& c : candidates) n += c.reward[0] == 1.0 ? 1 : 0;
  return n;
}

EvalPool build_pool(Rng& rng, const PolicyParams& params, const PreparedMaze& maze, int maze_id,
                    const PoolSettings& settings) {
  if (settings.k_max < 1) throw std::invalid_argument("build_pool: k_max must be >= 1");
  if (settings.m < 1) throw std::invalid_argument("build_pool: m must be >= 1");
  const ScalarPreset& preset = preset_by_name(settings.preset);
  EvalPool pool;
  pool.maze_id = maze_id;
  pool.m = settings.m;
  pool.temperature = settings.temperature;
  const int chains = (settings.k_max + settings.m - 1) / settings.m;
  const Decoding decoding{settings.temperature, false};
  for (int c = 0; c < chains; ++c) {
    const auto chain = rollout_chain(rng, params, maze, settings.m, decoding, settings.goal);
    for (size_t i = 0; i < chain.answers.size(); ++i) {
      const auto& a = chain.answers[i];
      pool.candidates.push_back({c, static_cast<int>(i), a.trajectory.moves, a.reward, gold_scalar(a.reward, preset)});
    }
  }
  return pool;
}

namespace {

void check_k(size_t n, int k, const char* what) {
  if (k < 1 || static_cast<size_t>(k) > n) {
    throw std::out_of_range(std::string(what) + ": k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
}

}  // namespace

double best_at_k_prefix(std::span<const double> scores, int k) {
  check_k(scores.size(), k, "best_at_k_prefix");
  return *std::max_element(scores.begin(), scores.begin() + k);
}

double best_at_k_unbiased(std::span<const double> scores, int k) {
  check_k(scores.size(), k, "best_at_k_unbiased");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  const int n = static_cast<int>(s.size());
  // coef_j = C(j-1, k-1) / C(n, k) for the j-th smallest (1-based).
  double coef = static_cast<double>(k) / n;
  double total = 0.0;
  for (int j = n; j >= k; --j) {
    total += coef * s[static_cast<size_t>(j - 1)];
    if (j > 1) coef *= static_cast<double>(j - k) / (j - 1);
  }
  return total;
}

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n) throw std::invalid_argument("pass_at_k: need 0 <= c <= n, n >= 1");
  check_k(static_cast<size_t>(n), k, "pass_at_k");
  if (n - c < k) return 1.0;
  double miss = 1.0;
  for (int i = 0; i < k; ++i) miss *= static_cast<double>(n - c - i) / (n - i);
  return 1.0 - miss;
}

double diversity_l1(std::span<const Vec> rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("diversity_l1 needs at least 2 vectors");
  double total = 0.0;
  for (size_t i = 0; i < rewards.size(); ++i) {
    for (size_t j = i + 1; j < rewards.size(); ++j) {
      if (rewards[i].size() != rewards[j].size()) throw std::invalid_argument("diversity_l1: dimension mismatch");
      for (size_t d = 0; d < rewards[i].size(); ++d) total += std::abs(rewards[i][d] - rewards[j][d]);
    }
  }
  const double pairs = 0.5 * static_cast<double>(rewards.size()) * static_cast<double>(rewards.size() - 1);
  return total / pairs;
}

std::optional<double> rho_bar(std::span<const Vec> rewards) {
  if (rewards.size() < 3) throw std::invalid_argument("rho_bar needs at least 3 vectors");
  const size_t n = rewards.size();
  const size_t d = rewards[0].size();
  std::vector<Vec> cols;
  for (size_t k = 0; k < d; ++k) {
    Vec col(n);
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (rewards[i].size() != d) throw std::invalid_argument("rho_bar: dimension mismatch");
      col[i] = rewards[i][k];
      mean += col[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double& v : col) {
      v -= mean;
      ss += v * v;
    }
    if (ss <= 1e-24 * static_cast<double>(n)) continue;
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : col) v *= inv;
    cols.push_back(std::move(col));
  }
  if (cols.size() < 2) return std::nullopt;
  double total = 0.0;
  for (size_t a = 0; a < cols.size(); ++a) {
    for (size_t b = a + 1; b < cols.size(); ++b) {
      double dot = 0.0;
      for (size_t i = 0; i < n; ++i) dot += cols[a][i] * cols[b][i];
      total += dot;
    }
  }
  return total / (0.5 * static_cast<double>(cols.size()) * static_cast<double>(cols.size() - 1));
}

void EvalConfig::validate() const {
  if (ks.empty()) throw std::invalid_argument("eval: no k values");
  if (pool_size < 1) throw std::invalid_argument("eval: pool size must be >= 1");
  if (m < 1) throw std::invalid_argument("eval: m must be >= 1");
  for (int k : ks) {
    if (k < 1 || k > pool_size) {
      throw std::invalid_argument("eval: k=" + std::to_string(k) + " outside [1, pool size " +
                                  std::to_string(pool_size) + "]");
    }
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("eval: temperature must be positive");
  if (seeds < 1) throw std::invalid_argument("eval: seeds must be >= 1");
  (void)preset_by_name(preset);
}

std::vector<MetricsRecord> pool_metrics(std::span<const EvalPool> pools, std::span<const int> ks,
                                        const std::string& method, const std::string& seed) {
  if (pools.empty()) throw std::invalid_argument("pool_metrics: no pools");
  double diversity = 0.0;
  double rho_sum = 0.0;
  int rho_n = 0;
  for (const auto& p : pools) {
    const auto r = p.rewards();
    diversity += r.size() >= 2 ? diversity_l1(r) : 0.0;
    if (r.size() >= 3) {
      if (const auto rho = rho_bar(r)) {
        rho_sum += *rho;
        ++rho_n;
      }
    }
  }
  const double n = static_cast<double>(pools.size());
  std::vector<MetricsRecord> out;
  for (int k : ks) {
    MetricsRecord rec;
    rec.method = method;
    rec.k = k;
    rec.n_mazes = static_cast<int>(pools.size());
    rec.seed = seed;
    rec.diversity = diversity / n;
    if (rho_n > 0) rec.rho_bar = rho_sum / rho_n;
    for (const auto& p : pools) {
      const auto s = p.scalars();
      rec.best_prefix += best_at_k_prefix(s, k);
      rec.best_unbiased += best_at_k_unbiased(s, k);
      rec.pass += pass_at_k(static_cast<int>(s.size()), p.successes(), k);
    }
    rec.best_prefix /= n;
    rec.best_unbiased /= n;
    rec.pass /= n;
    out.push_back(std::move(rec));
  }
  return out;
}

EvalOutput evaluate(const PolicyParams& params, std::span<const Maze> mazes, const EvalConfig& config) {
  config.validate();
  if (mazes.empty()) throw std::invalid_argument("eval: no mazes");
  if (config.m > params.spec.m) {
    throw std::invalid_argument("eval: m=" + std::to_string(config.m) + " exceeds the checkpoint's m=" +
                                std::to_string(params.spec.m));
  }
  std::vector<PreparedMaze> prepared(mazes.begin(), mazes.end());
  PoolSettings settings;
  settings.k_max = config.pool_size;
  settings.m = config.m;
  settings.temperature = config.temperature;
  settings.preset = config.preset;
  if (config.goal_conditioned) settings.goal = WeightVector(preset_by_name(config.preset).weights);

  EvalOutput out;
  std::vector<std::vector<MetricsRecord>> per_seed;
  for (int s = 0; s < config.seeds; ++s) {
    SeedPools sp;
    sp.seed = config.seed + static_cast<uint64_t>(s);
    sp.pools.resize(prepared.size());
    parallel_for(static_cast<int>(prepared.size()), config.threads, [&](int i) {
      Rng rng(derive_stream(sp.seed, "eval_pool", {static_cast<uint64_t>(i)}));
      sp.pools[static_cast<size_t>(i)] = build_pool(rng, params, prepared[static_cast<size_t>(i)], i, settings);
    });
    per_seed.push_back(pool_metrics(sp.pools, config.ks, config.method, std::to_string(sp.seed)));
    out.records.insert(out.records.end(), per_seed.back().begin(), per_seed.back().end());
    out.pools.push_back(std::move(sp));
  }
  for (size_t ki = 0; ki < config.ks.size(); ++ki) {
    MetricsRecord mean;
    mean.method = config.method;
    mean.k = config.ks[ki];
    mean.n_mazes = static_cast<int>(mazes.size());
    mean.seed = "mean";
    double rho_sum = 0.0;
    int rho_n = 0;
    for (const auto& rows : per_seed) {
      const auto& r = rows[ki];
      mean.best_prefix += r.best_prefix;
      mean.best_unbiased += r.best_unbiased;
      mean.pass += r.pass;
      mean.diversity += r.diversity;
      if (r.rho_bar) {
        rho_sum += *r.rho_bar;
        ++rho_n;
      }
    }
    const double n = static_cast<double>(per_seed.size());
    mean.best_prefix /= n;
    mean.best_unbiased /= n;
    mean.pass /= n;
    mean.diversity /= n;
    if (rho_n > 0) mean.rho_bar = rho_sum / rho_n;
    out.records.push_back(std::move(mean));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

}  // namespace

std::string metrics_csv(std::span<const MetricsRecord> records) {
  std::string text = std::string(kEvalHeader) + "\n";
  for (const auto& r : records) {
    text += r.method + "," + std::to_string(r.k) + "," + fmt(r.best_prefix) + "," + fmt(r.best_unbiased) + "," +
            fmt(r.pass) + "," + fmt(r.diversity) + "," + (r.rho_bar ? fmt(*r.rho_bar) : std::string()) + "," +
            std::to_string(r.n_mazes) + "," + r.seed + "\n";
  }
  return text;
}

std::string pools_jsonl(std::span<const SeedPools> pools) {
  std::string text;
  for (const auto& sp : pools) {
    for (const auto& p : sp.pools) {
      for (const auto& c : p.candidates) {
        nlohmann::ordered_json j;
        j["seed"] = sp.seed;
        j["maze_id"] = p.maze_id;
        j["chain_id"] = c.chain_id;
        j["answer_idx"] = c.answer_idx;
        j["moves"] = moves_to_string(c.moves);
        j["reward"] = c.reward;
        j["scalar"] = c.scalar;
        text += j.dump() + "\n";
      }
    }
  }
  return text;
}

std::vector<SeedPools> pools_from_jsonl(std::string_view text) {
  std::vector<SeedPools> out;
  std::map<std::pair<uint64_t, int>, std::pair<size_t, size_t>> where;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const uint64_t seed = j.value("seed", uint64_t{0});
      const int maze_id = j.at("maze_id").get<int>();
      Candidate c;
      c.chain_id = j.at("chain_id").get<int>();
      c.answer_idx = j.at("answer_idx").get<int>();
      c.moves = moves_from_string(j.at("moves").get<std::string>());
      const auto r = j.at("reward").get<std::vector<double>>();
      if (r.size() != c.reward.size()) {
        throw std::invalid_argument("reward has " + std::to_string(r.size()) + " components, expected " +
                                    std::to_string(c.reward.size()));
      }
      std::copy(r.begin(), r.end(), c.reward.begin());
      c.scalar = j.at("scalar").get<double>();
      auto it = where.find({seed, maze_id});
      if (it == where.end()) {
        size_t si = 0;
        while (si < out.size() && out[si].seed != seed) ++si;
        if (si == out.size()) out.push_back({seed, {}});
        EvalPool pool;
        pool.maze_id = maze_id;
        out[si].pools.push_back(std::move(pool));
        it = where.emplace(std::make_pair(seed, maze_id), std::make_pair(si, out[si].pools.size() - 1)).first;
      }
      out[it->second.first].pools[it->second.second].candidates.push_back(std::move(c));
    } catch (const std::exception& e) {
      throw std::runtime_error("pool line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw std::runtime_error("pool file holds no candidates");
  return out;
}

std::vector<DiagnoseRow> diagnose(std::span<const SeedPools> pools) {
  std::vector<DiagnoseRow> rows;
  double div_sum = 0.0;
  double rho_sum = 0.0;
  int n_pools = 0;
  int rho_n = 0;
  for (const auto& sp : pools) {
    for (const auto& p : sp.pools) {
      const auto r = p.rewards();
      DiagnoseRow row{std::to_string(sp.seed), std::to_string(p.maze_id), static_cast<int>(r.size()), 0.0, {}};
      if (r.size() >= 2) row.diversity = diversity_l1(r);
      if (r.size() >= 3) row.rho_bar = rho_bar(r);
      div_sum += row.diversity;
      ++n_pools;
      if (row.rho_bar) {
        rho_sum += *row.rho_bar;
        ++rho_n;
      }
      rows.push_back(std::move(row));
    }
  }
  DiagnoseRow mean{"all", "mean", n_pools, n_pools > 0 ? div_sum / n_pools : 0.0, {}};
  if (rho_n > 0) mean.rho_bar = rho_sum / rho_n;
  rows.push_back(std::move(mean));
  return rows;
}

std::string diagnose_csv(std::span<const DiagnoseRow> rows) {
  std::string text = std::string(kDiagnoseHeader) + "\n";
  for (const auto& r : rows) {
    text += r.seed + "," + r.maze_id + "," + std::to_string(r.n) + "," + fmt(r.diversity) + "," +
            (r.rho_bar ? fmt(*r.rho_bar) : std::string()) + "\n";
  }
  return text;
}

}  // namespace vpo
