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

#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vpo/dataset.hpp"
#include "vpo/eval.hpp"
#include "vpo/io.hpp"
#include "vpo/reward.hpp"
#include "vpo/trainer.hpp"

namespace vpo::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Bad flag values that CLI11 cannot catch on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool quiet_from_env() {
  const char* v = std::getenv("VPO_QUIET");
  return v != nullptr && std::string(v) != "0" && std::string(v) != "";
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw UsageError("--k: '" + item + "' is not an integer");
    }
  }
  if (ks.empty()) throw UsageError("--k: empty list");
  return ks;
}

std::vector<Vec> parse_set(const std::string& text) {
  std::vector<Vec> set;
  std::stringstream rows(text);
  std::string row;
  while (std::getline(rows, row, ';')) {
    Vec r;
    std::stringstream cols(row);
    std::string cell;
    while (std::getline(cols, cell, ',')) {
      try {
        size_t used = 0;
        r.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw UsageError("--set: '" + cell + "' is not a number");
      }
    }
    if (r.empty()) throw UsageError("--set: empty reward vector");
    if (!set.empty() && r.size() != set.front().size()) {
      throw UsageError("--set: vector " + std::to_string(set.size() + 1) + " has dimension " +
                       std::to_string(r.size()) + ", expected " + std::to_string(set.front().size()));
    }
    set.push_back(std::move(r));
  }
  if (set.empty()) throw UsageError("--set: no reward vectors");
  return set;
}

void prepare_out_dir(const fs::path& dir, bool force, const std::vector<std::string>& owned) {
  if (directory_empty(dir)) return;
  if (!force) throw std::runtime_error("output directory " + dir.string() + " is not empty (use --force)");
  for (const auto& name : owned) fs::remove_all(dir / name);
}

std::vector<std::string> files_under(const fs::path& dir, const std::vector<std::string>& names) {
  std::vector<std::string> rels;
  for (const auto& name : names) {
    const fs::path p = dir / name;
    if (fs::is_directory(p)) {
      std::vector<std::string> sub;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) sub.push_back(fs::relative(e.path(), dir).generic_string());
      }
      std::sort(sub.begin(), sub.end());
      rels.insert(rels.end(), sub.begin(), sub.end());
    } else if (fs::exists(p)) {
      rels.push_back(name);
    }
  }
  return rels;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

struct GenArgs {
  int train = 1000;
  int test = 100;
  std::string out;
  bool force = false;
  int threads = 1;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  if (a.train < 1 || a.test < 1) throw UsageError("--train and --test must be positive");
  const Splits splits = make_splits(a.train, a.test, {}, a.threads);
  std::ostringstream cmd;
  cmd << "gen --train " << a.train << " --test " << a.test;
  write_dataset(a.out, splits, cmd.str(), a.force);
  out << "wrote " << splits.train.size() << " train and " << splits.test.size() << " test mazes to " << a.out
      << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  std::optional<uint64_t> seed;
  int threads = 1;
  bool force = false;
};

const std::vector<std::string> kTrainOwned{"config.json", "metrics.csv", "final.json", "checkpoints", kManifestName};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const std::string config_text = read_file(a.config);
  TrainConfig config = config_from_json(config_text);
  if (a.seed) config.seed = *a.seed;
  const Dataset data = load_dataset(a.data);
  if (data.train.empty()) throw std::runtime_error("dataset " + a.data + " has no train split");

  const fs::path dir = a.out;
  TrainOptions options;
  options.threads = a.threads;
  options.quiet = quiet_from_env();
  if (!a.resume.empty()) {
    options.resume_from = fs::path(a.resume);
  } else {
    prepare_out_dir(dir, a.force, kTrainOwned);
  }
  write_file(dir / "config.json", config_to_json(config) + "\n");
  const TrainResult result = train(config, data.train, data.test, dir, options);

  RunManifest m;
  m.command = "train";
  m.config_json = config_to_json(config);
  m.seeds_json = ordered_json{{"seed", config.seed}}.dump();
  m.inputs["dataset_manifest"] = data.manifest_hash;
  m.inputs["config_file"] = sha256_hex(config_text);
  if (options.resume_from) m.inputs["resumed_from"] = sha256_hex(read_file(*options.resume_from));
  write_manifest(dir, m, files_under(dir, {"config.json", "metrics.csv", "final.json", "checkpoints"}));

  out << "trained " << estimator_name(config.estimator) << " to step " << result.state.step << "; params "
      << params_hash(result.state.params) << "\n";
  if (!result.metrics.empty() && !options.quiet) {
    const auto& last = result.metrics.back();
    out << "final mean_score " << fmt(last.mean_score) << " kl " << fmt(last.kl);
    if (last.greedy_eval_score) out << " greedy_eval " << fmt(*last.greedy_eval_score);
    out << "\n";
  }
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string ks = "3,5,10,30";
  std::string split = "test";
  std::string method;
  int seeds = 1;
  uint64_t seed = 0;
  int pool = 30;
  double temperature = 0.7;
  int threads = 1;
  bool force = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  EvalConfig ec;
  ec.ks = parse_ks(a.ks);
  ec.pool_size = a.pool;
  ec.seeds = a.seeds;
  ec.seed = a.seed;
  ec.temperature = a.temperature;
  ec.threads = a.threads;
  try {
    ec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const std::string ckpt_text = read_file(a.ckpt);
  TrainConfig tc;
  const TrainState state = train_state_from_json(ckpt_text, &tc);
  const Dataset data = load_dataset(a.data);
  const auto& mazes = a.split == "train" ? data.train : data.test;
  if (mazes.empty()) throw std::runtime_error("dataset split '" + a.split + "' is empty");

  ec.method = a.method.empty() ? estimator_name(tc.estimator) : a.method;
  ec.m = single_answer_mode(tc.estimator) ? 1 : tc.m;
  ec.goal_conditioned = tc.estimator == EstimatorMode::GoalConditioned;
  ec.preset = tc.preset;
  const EvalOutput result = evaluate(state.params, mazes, ec);

  const fs::path dir = a.out;
  prepare_out_dir(dir, a.force, {"metrics.csv", "candidates.jsonl", kManifestName});
  const std::string csv = metrics_csv(result.records);
  write_file(dir / "metrics.csv", csv);
  write_file(dir / "candidates.jsonl", pools_jsonl(result.pools));

  RunManifest m;
  m.command = "eval";
  ordered_json cfg;
  cfg["method"] = ec.method;
  cfg["ks"] = ec.ks;
  cfg["pool"] = ec.pool_size;
  cfg["m"] = ec.m;
  cfg["temperature"] = ec.temperature;
  cfg["goal_conditioned"] = ec.goal_conditioned;
  cfg["split"] = a.split;
  m.config_json = cfg.dump();
  m.seeds_json = ordered_json{{"seed", ec.seed}, {"count", ec.seeds}}.dump();
  m.inputs["checkpoint"] = sha256_hex(ckpt_text);
  m.inputs["dataset_manifest"] = data.manifest_hash;
  write_manifest(dir, m, {"metrics.csv", "candidates.jsonl"});
  out << csv;
  return kExitOk;
}

struct DiagnoseArgs {
  std::string pool;
  std::string out;
  bool force = false;
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
  const std::string text = read_file(a.pool);
  const auto rows = diagnose(pools_from_jsonl(text));
  const std::string csv = diagnose_csv(rows);
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    prepare_out_dir(dir, a.force, {"diagnose.csv", kManifestName});
    write_file(dir / "diagnose.csv", csv);
    RunManifest m;
    m.command = "diagnose";
    m.inputs["pool"] = sha256_hex(text);
    write_manifest(dir, m, {"diagnose.csv"});
  }
  out << csv;
  return kExitOk;
}

struct OracleArgs {
  std::string set;
  double alpha = 1.0;
  int k = 100000;
  uint64_t seed = 0;
};

int cmd_oracle(const OracleArgs& a, std::ostream& out) {
  const auto set = parse_set(a.set);
  if (!(a.alpha > 0.0)) throw UsageError("--alpha must be positive");
  if (a.k < 2) throw UsageError("--k must be >= 2");
  const size_t d = set.front().size();
  Rng rng(derive_stream(a.seed, "oracle"));
  const auto draws = sample_dirichlet_batch(rng, a.alpha, d, a.k);
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& w : draws) {
    double best = -INFINITY;
    for (const auto& r : set) best = std::max(best, scalarize(w, r));
    sum += best;
    sq += best * best;
  }
  const double n = static_cast<double>(a.k);
  const double mc = sum / n;
  const double var = std::max(0.0, (sq - n * mc * mc) / (n - 1.0));
  const double se = std::sqrt(var / n);
  out << "d=" << d << " n=" << set.size() << " alpha=" << fmt(a.alpha) << " K=" << a.k << " seed=" << a.seed << "\n";
  out << "mc=" << fmt(mc) << " stderr=" << fmt(se) << "\n";
  std::optional<ExactSetReward> exact;
  if (a.alpha == 1.0 && d <= 4) exact = set_reward_exact(set);
  if (exact) {
    const double z = se > 0.0 ? (mc - exact->value) / se : 0.0;
    out << "exact=" << fmt(exact->value) << " bound=" << fmt(exact->error_bound) << "\n";
    out << "z=" << fmt(z) << " within_3se=" << (std::abs(mc - exact->value) <= 3.0 * se + exact->error_bound ? "yes" : "no")
        << "\n";
  } else {
    out << "exact=unsupported (needs alpha=1 and d<=4)\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vector policy optimization on procedurally generated mazes", "vpo"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate train/test maze splits");
  g->add_option("--train", gen.train, "Train mazes (seeds from 42)")->capture_default_str();
  g->add_option("--test", gen.test, "Test mazes (seeds from 4242)")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_flag("--force", gen.force, "Overwrite a non-empty directory");
  g->add_option("--threads", gen.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a policy");
  t->add_option("--config", tr.config, "JSON config")->required();
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--resume", tr.resume, "Checkpoint to resume from");
  t->add_option("--seed", tr.seed, "Override the config seed");
  t->add_option("--threads", tr.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_flag("--force", tr.force, "Overwrite a non-empty run directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate best@k, pass@k and diversity");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint written by train")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--k", ev.ks, "Comma-separated k values")->capture_default_str();
  e->add_option("--seeds", ev.seeds, "Number of evaluation seeds")->capture_default_str()->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "First evaluation seed")->capture_default_str();
  e->add_option("--pool", ev.pool, "Candidates per maze")->capture_default_str()->check(CLI::PositiveNumber);
  e->add_option("--temperature", ev.temperature, "Sampling temperature")->capture_default_str();
  e->add_option("--split", ev.split, "Dataset split")->capture_default_str()->check(CLI::IsMember({"train", "test"}));
  e->add_option("--method", ev.method, "Method label (default: the checkpoint's estimator)");
  e->add_option("--threads", ev.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  e->add_flag("--force", ev.force, "Overwrite a non-empty output directory");

  DiagnoseArgs dg;
  auto* d = app.add_subcommand("diagnose", "Diversity and rho-bar of a candidate log");
  d->add_option("--pool", dg.pool, "Candidate JSONL written by eval")->required();
  d->add_option("--out", dg.out, "Optional output directory");
  d->add_flag("--force", dg.force, "Overwrite a non-empty output directory");

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle", "Compare the exact and Monte-Carlo set reward");
  o->add_option("--set", orc.set, "Reward vectors, e.g. \"1,0;0,1\"")->required();
  o->add_option("--alpha", orc.alpha, "Dirichlet concentration")->capture_default_str();
  o->add_option("--k", orc.k, "Monte-Carlo draws")->capture_default_str();
  o->add_option("--seed", orc.seed, "Seed")->capture_default_str();

  std::vector<std::string> argv_store{"vpo"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "vpo: " << ex.what() << "\n";
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (d->parsed()) return cmd_diagnose(dg, out);
    if (o->parsed()) return cmd_oracle(orc, out);
  } catch (const UsageError& ex) {
    err << "vpo: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "vpo: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace vpo::cli
