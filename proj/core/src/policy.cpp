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

#include "vpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vpo/io.hpp"

namespace vpo {

namespace {

constexpr Move kMoveOfAction[4] = {Move::Up, Move::Down, Move::Left, Move::Right};

int dist_at(const DistanceMap& d, Pos p) { return d[static_cast<size_t>(p.index())]; }

// BFS distance change when stepping from `from` to `to`; 0 when blocked.
double progress(const DistanceMap& d, Pos from, Pos to, bool open) {
  if (!open) return 0.0;
  const int a = dist_at(d, from);
  const int b = dist_at(d, to);
  if (a == kUnreachable || b == kUnreachable) return 0.0;
  return static_cast<double>(a - b);
}

}  // namespace

std::string FeatureSpec::describe() const {
  std::ostringstream out;
  out << "vpo-features v" << version << " m=" << m << " d=" << reward_dim << " blocks=pos" << kMazeCells
      << ",win" << 9 * kCellKinds << ",budget1,items3,answer" << m << ",prior" << (m - 1) * reward_dim << ",cond"
      << conditioning_size() << ",nav" << m * nav_slot_size() << ",bias1";
  return out.str();
}

std::string FeatureSpec::hash() const { return sha256_hex(describe()); }

void FeatureSpec::validate() const {
  if (version != 1) throw std::invalid_argument("unsupported feature spec version " + std::to_string(version));
  if (m < 1) throw std::invalid_argument("feature spec needs m >= 1");
  if (reward_dim != kRewardDim) throw std::invalid_argument("maze features require reward_dim = 4");
}

PreparedMaze::PreparedMaze(Maze m)
    : maze(std::move(m)),
      to_exit(distance_map(maze, maze.exit)),
      to_gold(distance_map(maze, maze.gold_corner)),
      to_diamond(distance_map(maze, maze.diamond_corner)) {}

AgentState state_of(const Walker& walker, const Maze& maze) {
  const Trajectory& t = walker.trajectory();
  (void)maze;
  return {walker.position(), walker.touched(), walker.steps_remaining(), t.gold_collected, t.diamonds_collected,
          t.lava_stepped};
}

void encode_features(const FeatureSpec& spec, const PreparedMaze& pm, const AgentState& s, const AnswerContext& ctx,
                     SparseFeatures& out) {
  const Maze& maze = pm.maze;
  out.clear();
  out.add(spec.position_offset() + s.position.index(), 1.0);

  auto seen = [&](Pos q) { return s.touched[static_cast<size_t>(q.index())]; };
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const Pos q{s.position.r + dr, s.position.c + dc};
      Cell kind = q.in_grid() ? maze.at(q) : Cell::Wall;
      if ((kind == Cell::Gold || kind == Cell::Diamond) && seen(q)) kind = Cell::Empty;
      const int k = (dr + 1) * 3 + (dc + 1);
      out.add(spec.window_offset() + k * kCellKinds + static_cast<int>(kind), 1.0);
    }
  }

  out.add(spec.budget_offset(), maze.budget > 0 ? static_cast<double>(s.steps_remaining) / maze.budget : 0.0);
  auto frac = [](int n, int total) { return total > 0 ? static_cast<double>(n) / total : 0.0; };
  out.add(spec.items_offset() + 0, frac(s.gold, maze.n_gold));
  out.add(spec.items_offset() + 1, frac(s.diamonds, maze.n_diamond));
  out.add(spec.items_offset() + 2, frac(s.lava, maze.n_lava));

  const int slot = ctx.answer_index;
  if (slot < 0 || slot >= spec.m) throw std::invalid_argument("answer index outside the feature spec's m");
  out.add(spec.answer_offset() + slot, 1.0);
  const size_t n_prior = std::min(ctx.prior.size(), static_cast<size_t>(spec.m - 1));
  for (size_t j = 0; j < n_prior; ++j) {
    for (int c = 0; c < spec.reward_dim; ++c) {
      out.add(spec.prior_offset() + static_cast<int>(j) * spec.reward_dim + c, ctx.prior[j][static_cast<size_t>(c)]);
    }
  }

  struct DirInfo {
    double exit, gold, diamond, lava;
  };
  std::array<DirInfo, 4> dirs{};
  for (int a = 0; a < 4; ++a) {
    const Move dir = kMoveOfAction[a];
    const Pos next = step(s.position, dir);
    const bool open = maze.open(next);
    const double d_exit = progress(pm.to_exit, s.position, next, open);
    const double d_gold = s.gold == 0 ? progress(pm.to_gold, s.position, next, open) : 0.0;
    const double d_diam = s.diamonds == 0 ? progress(pm.to_diamond, s.position, next, open) : 0.0;
    const Cell nc = open ? maze.at(next) : Cell::Wall;
    const bool fresh = open && !seen(next);
    const bool lava = fresh && nc == Cell::Lava;
    dirs[static_cast<size_t>(a)] = {d_exit, d_gold, d_diam, lava ? 1.0 : 0.0};

    out.add(spec.nav_index(slot, dir, NavFeature::ExitStep), d_exit);
    out.add(spec.nav_index(slot, dir, NavFeature::NextBlocked), open ? 0.0 : 1.0);
  }

  if (ctx.goal) {
    const auto w = ctx.goal->values();
    if (static_cast<int>(w.size()) != spec.reward_dim) throw std::invalid_argument("goal weight dimension mismatch");
    const int base = spec.conditioning_offset();
    for (int c = 0; c < spec.reward_dim; ++c) out.add(base + c, w[static_cast<size_t>(c)]);
    for (int a = 0; a < 4; ++a) {
      const int at = base + spec.reward_dim + a * kConditioningCross;
      const DirInfo& d = dirs[static_cast<size_t>(a)];
      out.add(at + 0, w[0] * d.exit);
      out.add(at + 1, w[1] * d.gold);
      out.add(at + 2, w[2] * d.diamond);
      out.add(at + 3, -w[3] * d.lava);
    }
  }

  out.add(spec.bias_offset(), 1.0);
}

Vec features(const FeatureSpec& spec, const PreparedMaze& maze, const AgentState& state, const AnswerContext& ctx) {
  SparseFeatures sparse;
  encode_features(spec, maze, state, ctx, sparse);
  Vec dense(static_cast<size_t>(spec.size()), 0.0);
  for (size_t i = 0; i < sparse.index.size(); ++i) dense[static_cast<size_t>(sparse.index[i])] += sparse.value[i];
  return dense;
}

const char* arch_name(Arch arch) { return arch == Arch::Linear ? "linear" : "hidden"; }

Arch arch_from_name(std::string_view name) {
  if (name == "linear") return Arch::Linear;
  if (name == "hidden") return Arch::Hidden;
  throw std::invalid_argument("unknown policy architecture '" + std::string(name) + "'");
}

size_t PolicyParams::parameter_count(const FeatureSpec& spec, Arch arch, int hidden) {
  const auto f = static_cast<size_t>(spec.size());
  size_t n = kActions * f;
  if (arch == Arch::Hidden) n += static_cast<size_t>(hidden) * f + kActions * static_cast<size_t>(hidden);
  return n;
}

PolicyParams PolicyParams::zeros(const FeatureSpec& spec, Arch arch, int hidden) {
  spec.validate();
  if (arch == Arch::Hidden && hidden < 1) throw std::invalid_argument("hidden architecture needs width >= 1");
  if (arch == Arch::Linear) hidden = 0;
  return {spec, arch, hidden, Vec(parameter_count(spec, arch, hidden), 0.0)};
}

void PolicyParams::check_shape() const {
  spec.validate();
  if (theta.size() != parameter_count(spec, arch, hidden)) {
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) + " entries, expected " +
                                std::to_string(parameter_count(spec, arch, hidden)));
  }
  for (double v : theta) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite policy parameter");
  }
}

PolicyParams init_policy(const FeatureSpec& spec, Arch arch, int hidden, const InitOptions& opts) {
  PolicyParams p = PolicyParams::zeros(spec, arch, hidden);
  const auto f = static_cast<size_t>(spec.size());
  if (opts.heuristic) {
    for (int slot = 0; slot < spec.m; ++slot) {
      for (int a = 0; a < 4; ++a) {
        const Move dir = kMoveOfAction[a];
        const auto row = static_cast<size_t>(a) * f;
        p.theta[row + static_cast<size_t>(spec.nav_index(slot, dir, NavFeature::ExitStep))] = opts.exit_pull;
        p.theta[row + static_cast<size_t>(spec.nav_index(slot, dir, NavFeature::NextBlocked))] = opts.wall_push;
      }
    }
    p.theta[kStopAction * f + static_cast<size_t>(spec.bias_offset())] = opts.stop_bias;
  }
  if (opts.noise > 0.0) {
    Rng rng(derive_stream(opts.seed, "policy_init"));
    for (double& v : p.theta) v += opts.noise * rng.normal();
  }
  return p;
}

std::array<double, kActions> policy_logits(const PolicyParams& p, const SparseFeatures& x,
                                           std::vector<double>* hidden_out) {
  const auto f = static_cast<size_t>(p.spec.size());
  std::array<double, kActions> z{};
  for (int b = 0; b < kActions; ++b) {
    const double* row = p.theta.data() + static_cast<size_t>(b) * f;
    double s = 0.0;
    for (size_t i = 0; i < x.index.size(); ++i) s += row[x.index[i]] * x.value[i];
    z[static_cast<size_t>(b)] = s;
  }
  if (p.arch == Arch::Hidden) {
    const auto h = static_cast<size_t>(p.hidden);
    const double* u = p.theta.data() + kActions * f;
    const double* v = u + h * f;
    std::vector<double> local;
    std::vector<double>& act = hidden_out ? *hidden_out : local;
    act.assign(h, 0.0);
    for (size_t k = 0; k < h; ++k) {
      const double* row = u + k * f;
      double s = 0.0;
      for (size_t i = 0; i < x.index.size(); ++i) s += row[x.index[i]] * x.value[i];
      act[k] = std::tanh(s);
    }
    for (int b = 0; b < kActions; ++b) {
      const double* row = v + static_cast<size_t>(b) * h;
      double s = 0.0;
      for (size_t k = 0; k < h; ++k) s += row[k] * act[k];
      z[static_cast<size_t>(b)] += s;
    }
  }
  return z;
}

std::array<double, kActions> log_softmax(const std::array<double, kActions>& logits, double temperature) {
  std::array<double, kActions> out{};
  double mx = logits[0] / temperature;
  for (int b = 0; b < kActions; ++b) {
    out[static_cast<size_t>(b)] = logits[static_cast<size_t>(b)] / temperature;
    mx = std::max(mx, out[static_cast<size_t>(b)]);
  }
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : out) v -= lse;
  return out;
}

SampledAnswer sample_trajectory(Rng& rng, const PolicyParams& params, const PreparedMaze& maze,
                                const AnswerContext& ctx, const Decoding& decoding) {
  if (!decoding.greedy && !(decoding.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  const double temperature = decoding.greedy ? 1.0 : decoding.temperature;
  SampledAnswer out;
  Walker walker(maze.maze);
  SparseFeatures x;
  while (!walker.done()) {
    encode_features(params.spec, maze, state_of(walker, maze.maze), ctx, x);
    const auto z = policy_logits(params, x);
    const auto lp = log_softmax(z, temperature);
    int action = 0;
    if (decoding.greedy) {
      for (int b = 1; b < kActions; ++b) {
        if (z[static_cast<size_t>(b)] > z[static_cast<size_t>(action)]) action = b;
      }
    } else {
      const double u = rng.uniform();
      double cum = 0.0;
      action = kActions - 1;
      for (int b = 0; b < kActions; ++b) {
        cum += std::exp(lp[static_cast<size_t>(b)]);
        if (u < cum) {
          action = b;
          break;
        }
      }
    }
    out.actions.push_back(action);
    out.logprobs.push_back(lp[static_cast<size_t>(action)]);
    if (action == kStopAction) break;
    walker.apply(kMoveOfAction[action]);
  }
  out.trajectory = std::move(walker).take();
  out.reward = reward_vector(maze.maze, out.trajectory);
  return out;
}

size_t CandidateSet::token_count() const {
  size_t n = 0;
  for (const auto& a : answers) n += a.actions.size();
  return n;
}

std::vector<Vec> CandidateSet::reward_vectors() const {
  std::vector<Vec> out;
  out.reserve(answers.size());
  for (const auto& a : answers) out.emplace_back(a.reward.begin(), a.reward.end());
  return out;
}

AnswerContext chain_context(const CandidateSet& chain, int answer_index) {
  AnswerContext ctx;
  ctx.answer_index = answer_index;
  for (int j = 0; j < answer_index; ++j) ctx.prior.push_back(chain.answers[static_cast<size_t>(j)].reward);
  ctx.goal = chain.goal;
  return ctx;
}

CandidateSet rollout_chain(Rng& rng, const PolicyParams& params, const PreparedMaze& maze, int m,
                           const Decoding& decoding, std::optional<WeightVector> goal) {
  if (m < 1 || m > params.spec.m) {
    throw std::invalid_argument("chain length " + std::to_string(m) + " outside [1, " + std::to_string(params.spec.m) +
                                "]");
  }
  CandidateSet chain;
  chain.goal = std::move(goal);
  chain.temperature = decoding.greedy ? 1.0 : decoding.temperature;
  chain.feature_hash = params.spec.hash();
  for (int i = 0; i < m; ++i) {
    chain.answers.push_back(sample_trajectory(rng, params, maze, chain_context(chain, i), decoding));
  }
  return chain;
}

std::vector<double> accumulate_token_gradients(const PolicyParams& p, const PreparedMaze& maze,
                                               const CandidateSet& chain,
                                               const std::function<double(size_t, double)>& weight, Vec& grad) {
  if (!chain.feature_hash.empty() && chain.feature_hash != p.spec.hash()) {
    throw std::invalid_argument("chain was sampled under a different feature spec");
  }
  if (grad.size() != p.theta.size()) grad.assign(p.theta.size(), 0.0);
  const auto f = static_cast<size_t>(p.spec.size());
  const auto h = static_cast<size_t>(p.hidden);
  const double tau = chain.temperature;
  std::vector<double> out;
  out.reserve(chain.token_count());
  std::vector<double> act;
  std::vector<double> dpre(h);
  SparseFeatures x;
  size_t token = 0;
  for (size_t i = 0; i < chain.answers.size(); ++i) {
    const SampledAnswer& ans = chain.answers[i];
    const AnswerContext ctx = chain_context(chain, static_cast<int>(i));
    Walker walker(maze.maze);
    for (int a : ans.actions) {
      encode_features(p.spec, maze, state_of(walker, maze.maze), ctx, x);
      const auto z = policy_logits(p, x, &act);
      const auto lp = log_softmax(z, tau);
      const double logp = lp[static_cast<size_t>(a)];
      out.push_back(logp);
      const double c = weight(token++, logp);
      if (c != 0.0) {
        std::array<double, kActions> g{};
        for (int b = 0; b < kActions; ++b) {
          g[static_cast<size_t>(b)] = c * ((b == a ? 1.0 : 0.0) - std::exp(lp[static_cast<size_t>(b)])) / tau;
        }
        for (int b = 0; b < kActions; ++b) {
          double* row = grad.data() + static_cast<size_t>(b) * f;
          for (size_t k = 0; k < x.index.size(); ++k) row[x.index[k]] += g[static_cast<size_t>(b)] * x.value[k];
        }
        if (p.arch == Arch::Hidden) {
          const double* v = p.theta.data() + kActions * f + h * f;
          double* gu = grad.data() + kActions * f;
          double* gv = gu + h * f;
          for (size_t k = 0; k < h; ++k) {
            double dh = 0.0;
            for (int b = 0; b < kActions; ++b) {
              gv[static_cast<size_t>(b) * h + k] += g[static_cast<size_t>(b)] * act[k];
              dh += g[static_cast<size_t>(b)] * v[static_cast<size_t>(b) * h + k];
            }
            dpre[k] = dh * (1.0 - act[k] * act[k]);
          }
          for (size_t k = 0; k < h; ++k) {
            if (dpre[k] == 0.0) continue;
            double* row = gu + k * f;
            for (size_t j = 0; j < x.index.size(); ++j) row[x.index[j]] += dpre[k] * x.value[j];
          }
        }
      }
      if (a == kStopAction) break;
      walker.apply(kMoveOfAction[a]);
    }
  }
  return out;
}

std::vector<double> token_logprobs(const PolicyParams& params, const PreparedMaze& maze, const CandidateSet& chain) {
  if (!chain.feature_hash.empty() && chain.feature_hash != params.spec.hash()) {
    throw std::invalid_argument("chain was sampled under a different feature spec");
  }
  std::vector<double> out;
  out.reserve(chain.token_count());
  SparseFeatures x;
  for (size_t i = 0; i < chain.answers.size(); ++i) {
    const AnswerContext ctx = chain_context(chain, static_cast<int>(i));
    Walker walker(maze.maze);
    for (int a : chain.answers[i].actions) {
      encode_features(params.spec, maze, state_of(walker, maze.maze), ctx, x);
      out.push_back(log_softmax(policy_logits(params, x), chain.temperature)[static_cast<size_t>(a)]);
      if (a == kStopAction) break;
      walker.apply(kMoveOfAction[a]);
    }
  }
  return out;
}

LogProbGrad logprob_and_grad(const PolicyParams& params, const PreparedMaze& maze, const CandidateSet& chain) {
  LogProbGrad out;
  const auto lps = accumulate_token_gradients(params, maze, chain, [](size_t, double) { return 1.0; }, out.grad);
  for (double v : lps) out.logprob += v;
  return out;
}

std::string policy_to_json(const PolicyParams& params) {
  params.check_shape();
  nlohmann::ordered_json j;
  j["format"] = "vpo-policy";
  j["version"] = 1;
  j["feature_spec"] = {{"version", params.spec.version}, {"m", params.spec.m}, {"reward_dim", params.spec.reward_dim}};
  j["feature_spec_hash"] = params.spec.hash();
  j["arch"] = arch_name(params.arch);
  j["hidden"] = params.hidden;
  const nlohmann::json theta = params.theta;
  j["params_hash"] = sha256_hex(theta.dump());
  j["params"] = theta;
  return j.dump();
}

PolicyParams policy_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("policy checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "vpo-policy") throw std::runtime_error("not a vpo-policy checkpoint");
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported policy checkpoint version");
    PolicyParams p;
    const auto& fs = j.at("feature_spec");
    p.spec = FeatureSpec{fs.at("version").get<int>(), fs.at("m").get<int>(), fs.at("reward_dim").get<int>()};
    const auto stored_spec = j.at("feature_spec_hash").get<std::string>();
    if (stored_spec != p.spec.hash()) {
      throw std::runtime_error("feature-spec hash mismatch: checkpoint has " + stored_spec + ", this build computes " +
                               p.spec.hash() + " for '" + p.spec.describe() + "'");
    }
    p.arch = arch_from_name(j.at("arch").get<std::string>());
    p.hidden = j.at("hidden").get<int>();
    const auto& theta = j.at("params");
    const auto stored = j.at("params_hash").get<std::string>();
    const auto actual = sha256_hex(theta.dump());
    if (stored != actual) {
      throw std::runtime_error("parameter hash mismatch: stored " + stored + ", computed " + actual);
    }
    p.theta = theta.get<Vec>();
    p.check_shape();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed policy checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("invalid policy checkpoint: ") + e.what());
  }
}

}  // namespace vpo
