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

#include "vpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vpo/io.hpp"
#include "vpo/parallel.hpp"

namespace vpo {

using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("config key '" + key + "': " + why);
  };
  if (G < 2) bad("G", "must be >= 2");
  if (m < 1) bad("m", "must be >= 1");
  if (single_answer_mode(estimator) && m != 1) bad("m", std::string("estimator ") + estimator_name(estimator) + " requires m = 1");
  if (K < 1) bad("K", "must be >= 1");
  if (batch_size < 1) bad("batch_size", "must be >= 1");
  if (total_steps < 0) bad("total_steps", "must be >= 0");
  if (!(learning_rate > 0.0)) bad("learning_rate", "must be positive");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) bad("clip_eps", "must lie in (0, 1)");
  if (!(dual_clip > 1.0)) bad("dual_clip", "must be > 1");
  if (!(kl_coef >= 0.0)) bad("kl_coef", "must be >= 0");
  if (!(eps > 0.0)) bad("eps", "must be positive");
  if (!(temperature > 0.0)) bad("temperature", "must be positive");
  if (arch == Arch::Hidden && hidden_width < 1) bad("hidden_width", "must be >= 1");
  if (!(weight_decay >= 0.0)) bad("weight_decay", "must be >= 0");
  if (!(alpha > 0.0)) bad("alpha", "must be positive");
  if (eval_mazes < 0) bad("eval_mazes", "must be >= 0");
  (void)preset_by_name(preset);
}

const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys{"estimator",     "G",        "m",         "K",       "batch_size",
                                             "total_steps",   "learning_rate", "clip_eps", "dual_clip", "kl_coef",
                                             "eps",           "temperature",   "seed"};
  return keys;
}

TrainConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& key : required_config_keys()) {
    if (!j.contains(key)) throw std::invalid_argument("config is missing required key '" + key + "'");
  }
  static const std::set<std::string> optional{"arch",       "hidden_width",     "weight_decay", "grad_clip",
                                              "adam_beta1", "adam_beta2",       "alpha",        "preset",
                                              "multi_rlvr_aggregation", "checkpoint_every", "eval_every",
                                              "eval_mazes", "init"};
  for (const auto& [key, _] : j.items()) {
    const auto& req = required_config_keys();
    if (std::find(req.begin(), req.end(), key) == req.end() && !optional.count(key)) {
      throw std::invalid_argument("config has unknown key '" + key + "'");
    }
  }
  TrainConfig c;
  std::string current;
  try {
    auto get = [&](const char* key, auto& out) {
      current = key;
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    current = "estimator";
    c.estimator = estimator_from_name(j.at("estimator").get<std::string>());
    get("G", c.G);
    get("m", c.m);
    get("K", c.K);
    get("batch_size", c.batch_size);
    get("total_steps", c.total_steps);
    get("learning_rate", c.learning_rate);
    get("clip_eps", c.clip_eps);
    get("dual_clip", c.dual_clip);
    get("kl_coef", c.kl_coef);
    get("eps", c.eps);
    get("temperature", c.temperature);
    get("seed", c.seed);
    if (j.contains("arch")) {
      current = "arch";
      c.arch = arch_from_name(j.at("arch").get<std::string>());
    }
    get("hidden_width", c.hidden_width);
    get("weight_decay", c.weight_decay);
    get("grad_clip", c.grad_clip);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("alpha", c.alpha);
    get("preset", c.preset);
    if (j.contains("multi_rlvr_aggregation")) {
      current = "multi_rlvr_aggregation";
      c.multi_rlvr_aggregation = aggregation_from_name(j.at("multi_rlvr_aggregation").get<std::string>());
    }
    get("checkpoint_every", c.checkpoint_every);
    get("eval_every", c.eval_every);
    get("eval_mazes", c.eval_mazes);
    if (j.contains("init")) {
      current = "init";
      const auto& init = j.at("init");
      c.init.heuristic = init.value("heuristic", c.init.heuristic);
      c.init.exit_pull = init.value("exit_pull", c.init.exit_pull);
      c.init.wall_push = init.value("wall_push", c.init.wall_push);
      c.init.stop_bias = init.value("stop_bias", c.init.stop_bias);
      c.init.noise = init.value("noise", c.init.noise);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument("config key '" + current + "': " + e.what());
  }
  c.validate();
  return c;
}

namespace {

ordered_json config_json(const TrainConfig& c) {
  ordered_json j;
  j["estimator"] = estimator_name(c.estimator);
  j["G"] = c.G;
  j["m"] = c.m;
  j["K"] = c.K;
  j["batch_size"] = c.batch_size;
  j["total_steps"] = c.total_steps;
  j["learning_rate"] = c.learning_rate;
  j["clip_eps"] = c.clip_eps;
  j["dual_clip"] = c.dual_clip;
  j["kl_coef"] = c.kl_coef;
  j["eps"] = c.eps;
  j["temperature"] = c.temperature;
  j["seed"] = c.seed;
  j["arch"] = arch_name(c.arch);
  j["hidden_width"] = c.hidden_width;
  j["weight_decay"] = c.weight_decay;
  j["grad_clip"] = c.grad_clip;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["alpha"] = c.alpha;
  j["preset"] = c.preset;
  j["multi_rlvr_aggregation"] = aggregation_name(c.multi_rlvr_aggregation);
  j["checkpoint_every"] = c.checkpoint_every;
  j["eval_every"] = c.eval_every;
  j["eval_mazes"] = c.eval_mazes;
  j["init"] = {{"heuristic", c.init.heuristic},
               {"exit_pull", c.init.exit_pull},
               {"wall_push", c.init.wall_push},
               {"stop_bias", c.init.stop_bias},
               {"noise", c.init.noise}};
  return j;
}

}  // namespace

std::string config_to_json(const TrainConfig& config) { return config_json(config).dump(2); }

double adam_update(AdamState& s, Vec& params, const Vec& grads, const AdamConfig& c) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam_update: gradient has " + std::to_string(grads.size()) + " entries, params " +
                                std::to_string(params.size()));
  }
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size() || s.v.size() != params.size()) {
    throw std::invalid_argument("adam_update: optimizer state shape mismatch");
  }
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  const double scale = (c.clip > 0.0 && norm > c.clip) ? c.clip / norm : 1.0;
  ++s.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] * scale;
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g;
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    params[i] -= c.lr * c.weight_decay * params[i];
    params[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
  return norm;
}

SurrogateTerm ppo_clip_surrogate(double logp_new, double logp_old, double advantage, double clip_eps,
                                 double dual_clip) {
  const double ratio = std::exp(logp_new - logp_old);
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  const double unclipped_obj = ratio * advantage;
  const double clipped_obj = clipped * advantage;
  SurrogateTerm out;
  if (unclipped_obj <= clipped_obj) {
    out.objective = unclipped_obj;
    out.d_logp = ratio * advantage;
  } else {
    out.objective = clipped_obj;
    out.d_logp = 0.0;
  }
  if (advantage < 0.0 && dual_clip * advantage > out.objective) {
    out.objective = dual_clip * advantage;
    out.d_logp = 0.0;
  }
  return out;
}

SurrogateTerm kl_k3(double logp_new, double logp_ref) {
  const double delta = logp_ref - logp_new;
  const double e = std::exp(delta);
  return {e - delta - 1.0, 1.0 - e};
}

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  InitOptions init = config.init;
  init.seed = derive_stream(config.seed, "init");
  TrainState s;
  s.params = init_policy(config.feature_spec(), config.arch, config.arch == Arch::Hidden ? config.hidden_width : 0, init);
  s.reference = s.params;
  return s;
}

std::vector<int> batch_for_step(const TrainConfig& config, int step, int n_mazes) {
  if (n_mazes <= 0) throw std::invalid_argument("empty training split");
  std::vector<int> out;
  out.reserve(static_cast<size_t>(config.batch_size));
  long long cached_epoch = -1;
  std::vector<int> perm(static_cast<size_t>(n_mazes));
  for (int j = 0; j < config.batch_size; ++j) {
    const long long q = static_cast<long long>(step) * config.batch_size + j;
    const long long epoch = q / n_mazes;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(derive_stream(config.seed, "shuffle", {static_cast<uint64_t>(epoch)}));
      rng.shuffle(perm.begin(), perm.end());
      cached_epoch = epoch;
    }
    out.push_back(perm[static_cast<size_t>(q % n_mazes)]);
  }
  return out;
}

StepOutputs train_step(TrainState& state, std::span<const PreparedMaze> mazes, std::span<const int> batch,
                       const TrainConfig& config, int threads) {
  if (batch.empty()) throw std::invalid_argument("train_step needs a non-empty batch");
  const int B = static_cast<int>(batch.size());
  const int G = config.G;
  const int m = single_answer_mode(config.estimator) ? 1 : config.m;
  const auto step = static_cast<uint64_t>(state.step);
  const ScalarPreset& preset = preset_by_name(config.preset);

  StepOutputs out;
  auto& groups = out.groups;
  groups.resize(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    auto& grp = groups[static_cast<size_t>(b)];
    grp.maze_id = batch[static_cast<size_t>(b)];
    if (grp.maze_id < 0 || grp.maze_id >= static_cast<int>(mazes.size())) {
      throw std::out_of_range("batch maze id " + std::to_string(grp.maze_id) + " out of range");
    }
    grp.sets.resize(static_cast<size_t>(G));
    if (config.estimator == EstimatorMode::Vpo) {
      Rng wr(derive_stream(config.seed, "shared_weights", {step, static_cast<uint64_t>(b)}));
      grp.shared_weights = sample_dirichlet_batch(wr, config.alpha, kRewardDim, config.K);
    }
    if (config.estimator == EstimatorMode::RandomW || config.estimator == EstimatorMode::GoalConditioned) {
      for (int g = 0; g < G; ++g) {
        Rng wr(derive_stream(config.seed, "rollout_weights", {step, static_cast<uint64_t>(b), static_cast<uint64_t>(g)}));
        grp.rollout_weights.push_back(sample_dirichlet(wr, config.alpha, kRewardDim));
      }
    }
  }

  const Decoding decoding{config.temperature, false};
  parallel_for(B * G, threads, [&](int i) {
    const int b = i / G;
    const int g = i % G;
    auto& grp = groups[static_cast<size_t>(b)];
    Rng rng(derive_stream(config.seed, "rollout", {step, static_cast<uint64_t>(b), static_cast<uint64_t>(g)}));
    std::optional<WeightVector> goal;
    if (config.estimator == EstimatorMode::GoalConditioned) {
      goal = goal_condition(config.estimator, *grp.rollout_weights[static_cast<size_t>(g)]);
    }
    grp.sets[static_cast<size_t>(g)] =
        rollout_chain(rng, state.params, mazes[static_cast<size_t>(grp.maze_id)], m, decoding, std::move(goal));
  });

  const EstimatorConfig est{config.estimator, &preset, config.multi_rlvr_aggregation, config.eps};
  long long total_tokens = 0;
  for (auto& grp : groups) {
    score_group(grp, est);
    for (const auto& s : grp.sets) total_tokens += static_cast<long long>(s.token_count());
  }

  struct RolloutGrad {
    Vec grad;
    double objective = 0.0;
    double kl = 0.0;
    double max_dev = 0.0;
  };
  std::vector<RolloutGrad> parts(static_cast<size_t>(B * G));
  const double inv_tokens = total_tokens > 0 ? 1.0 / static_cast<double>(total_tokens) : 0.0;
  parallel_for(B * G, threads, [&](int i) {
    const auto& grp = groups[static_cast<size_t>(i / G)];
    const auto& chain = grp.sets[static_cast<size_t>(i % G)];
    const double adv = grp.advantages[static_cast<size_t>(i % G)];
    const auto& maze = mazes[static_cast<size_t>(grp.maze_id)];
    const auto ref = token_logprobs(state.reference, maze, chain);
    std::vector<double> old;
    old.reserve(ref.size());
    for (const auto& a : chain.answers) old.insert(old.end(), a.logprobs.begin(), a.logprobs.end());
    auto& part = parts[static_cast<size_t>(i)];
    accumulate_token_gradients(
        state.params, maze, chain,
        [&](size_t t, double lp) {
          const auto s = ppo_clip_surrogate(lp, old[t], adv, config.clip_eps, config.dual_clip);
          const auto k = kl_k3(lp, ref[t]);
          part.objective += s.objective;
          part.kl += k.objective;
          part.max_dev = std::max(part.max_dev, std::abs(std::exp(lp - old[t]) - 1.0));
          return -(s.d_logp - config.kl_coef * k.d_logp) * inv_tokens;
        },
        part.grad);
  });

  Vec grad(state.params.theta.size(), 0.0);
  double objective = 0.0;
  double kl = 0.0;
  double max_dev = 0.0;
  for (const auto& part : parts) {
    for (size_t j = 0; j < grad.size(); ++j) grad[j] += part.grad[j];
    objective += part.objective;
    kl += part.kl;
    max_dev = std::max(max_dev, part.max_dev);
  }
  const double loss = -(objective - config.kl_coef * kl) * inv_tokens;
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.step << ": objective=" << objective << " kl=" << kl
        << " tokens=" << total_tokens;
    throw std::runtime_error(msg.str());
  }

  const AdamConfig adam{config.learning_rate, config.adam_beta1, config.adam_beta2, 1e-8, config.weight_decay,
                        config.grad_clip};
  StepMetrics& sm = out.metrics;
  sm.grad_norm = adam_update(state.adam, state.params.theta, grad, adam);
  ++state.step;
  sm.step = state.step;
  sm.loss = loss;
  sm.kl = kl * inv_tokens;
  sm.tokens = total_tokens;
  sm.max_ratio_deviation = max_dev;
  double score_sum = 0.0;
  double adv_sum = 0.0;
  double adv_sq = 0.0;
  size_t n = 0;
  for (const auto& grp : groups) {
    for (size_t g = 0; g < grp.scores.size(); ++g) {
      score_sum += grp.scores[g];
      adv_sum += grp.advantages[g];
      adv_sq += grp.advantages[g] * grp.advantages[g];
      ++n;
    }
  }
  sm.mean_score = score_sum / static_cast<double>(n);
  sm.adv_mean = adv_sum / static_cast<double>(n);
  sm.adv_std = std::sqrt(std::max(0.0, adv_sq / static_cast<double>(n) - sm.adv_mean * sm.adv_mean));
  out.gradient = std::move(grad);
  return out;
}

double greedy_score(const PolicyParams& params, std::span<const PreparedMaze> mazes, const TrainConfig& config,
                    int threads) {
  if (mazes.empty()) return 0.0;
  const ScalarPreset& preset = preset_by_name(config.preset);
  const int m = single_answer_mode(config.estimator) ? 1 : config.m;
  std::vector<double> scores(mazes.size(), 0.0);
  parallel_for(static_cast<int>(mazes.size()), threads, [&](int i) {
    Rng unused(0);
    std::optional<WeightVector> goal;
    if (config.estimator == EstimatorMode::GoalConditioned) goal = WeightVector(preset.weights);
    const auto chain = rollout_chain(unused, params, mazes[static_cast<size_t>(i)], m, Decoding{1.0, true}, goal);
    double best = 0.0;
    for (const auto& a : chain.answers) best = std::max(best, gold_scalar(a.reward, preset));
    scores[static_cast<size_t>(i)] = best;
  });
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

std::string params_hash(const PolicyParams& params) {
  const json theta = params.theta;
  return sha256_hex(params.spec.hash() + arch_name(params.arch) + std::to_string(params.hidden) + theta.dump());
}

std::string train_state_to_json(const TrainState& state, const TrainConfig& config) {
  ordered_json j;
  j["format"] = "vpo-train-state";
  j["version"] = 1;
  j["config"] = config_json(config);
  j["step"] = state.step;
  j["policy"] = json::parse(policy_to_json(state.params));
  j["reference"] = json::parse(policy_to_json(state.reference));
  j["adam"] = {{"t", state.adam.t}, {"m", state.adam.m}, {"v", state.adam.v}};
  j["state_hash"] = sha256_hex(j.dump());
  return j.dump();
}

TrainState train_state_from_json(std::string_view text, TrainConfig* config_out) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "vpo-train-state") throw std::runtime_error("not a vpo-train-state checkpoint");
    const auto stored = j.at("state_hash").get<std::string>();
    ordered_json body = j;
    body.erase("state_hash");
    const auto actual = sha256_hex(body.dump());
    if (stored != actual) {
      throw std::runtime_error("checkpoint hash mismatch: stored " + stored + ", computed " + actual);
    }
    TrainState s;
    s.step = j.at("step").get<int>();
    s.params = policy_from_json(j.at("policy").dump());
    s.reference = policy_from_json(j.at("reference").dump());
    s.adam.t = j.at("adam").at("t").get<long long>();
    s.adam.m = j.at("adam").at("m").get<Vec>();
    s.adam.v = j.at("adam").at("v").get<Vec>();
    if (config_out) *config_out = config_from_json(j.at("config").dump());
    return s;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("invalid checkpoint: ") + e.what());
  }
}

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

}  // namespace

std::string metrics_csv_row(const StepMetrics& m) {
  std::string row = std::to_string(m.step) + "," + fmt(m.mean_score) + "," + fmt(m.kl) + "," + fmt(m.grad_norm) +
                    "," + fmt(m.adv_mean) + "," + fmt(m.adv_std) + ",";
  if (m.greedy_eval_score) row += fmt(*m.greedy_eval_score);
  return row;
}

TrainResult train(const TrainConfig& config, std::span<const Maze> train_mazes, std::span<const Maze> validation,
                  const std::filesystem::path& out_dir, const TrainOptions& options) {
  config.validate();
  if (train_mazes.empty()) throw std::invalid_argument("training split is empty");
  TrainResult result;
  std::vector<std::string> csv_rows;
  if (options.resume_from) {
    TrainConfig saved;
    result.state = train_state_from_json(read_file(*options.resume_from), &saved);
    if (saved.feature_spec() != config.feature_spec()) {
      throw std::runtime_error("resume checkpoint " + options.resume_from->string() + " has a different feature spec");
    }
    const auto metrics_path = out_dir / "metrics.csv";
    if (!out_dir.empty() && std::filesystem::exists(metrics_path)) {
      std::istringstream in(read_file(metrics_path));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (!line.empty() && std::stoi(line.substr(0, line.find(','))) <= result.state.step) csv_rows.push_back(line);
      }
    }
  } else {
    result.state = init_train_state(config);
  }

  std::vector<PreparedMaze> prepared(train_mazes.begin(), train_mazes.end());
  const size_t n_val = std::min(validation.size(), static_cast<size_t>(config.eval_mazes));
  std::vector<PreparedMaze> val(validation.begin(), validation.begin() + static_cast<std::ptrdiff_t>(n_val));
  result.reference_hash_before = params_hash(result.state.reference);

  auto write_csv = [&] {
    if (out_dir.empty()) return;
    std::string text = std::string(kMetricsHeader) + "\n";
    for (const auto& r : csv_rows) text += r + "\n";
    write_file(out_dir / "metrics.csv", text);
  };
  auto checkpoint = [&](const std::filesystem::path& path) {
    if (out_dir.empty()) return;
    write_file(path, train_state_to_json(result.state, config));
    result.checkpoints.push_back(path);
  };

  while (result.state.step < config.total_steps) {
    const auto batch = batch_for_step(config, result.state.step, static_cast<int>(prepared.size()));
    auto out = train_step(result.state, prepared, batch, config, options.threads);
    StepMetrics& sm = out.metrics;
    if (config.eval_every > 0 && !val.empty() &&
        (sm.step % config.eval_every == 0 || sm.step == config.total_steps)) {
      sm.greedy_eval_score = greedy_score(result.state.params, val, config, options.threads);
    }
    csv_rows.push_back(metrics_csv_row(sm));
    result.metrics.push_back(sm);
    if (config.checkpoint_every > 0 && sm.step % config.checkpoint_every == 0) {
      std::ostringstream name;
      name << "step_" << std::setw(6) << std::setfill('0') << sm.step << ".json";
      checkpoint(out_dir / "checkpoints" / name.str());
      write_csv();
    }
  }
  result.reference_hash_after = params_hash(result.state.reference);
  if (result.reference_hash_after != result.reference_hash_before) {
    throw std::logic_error("reference policy changed during training");
  }
  write_csv();
  checkpoint(out_dir / "final.json");
  return result;
}

}  // namespace vpo
