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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"

namespace vpo {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result vpo(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kConfig =
    R"({"estimator":"vpo","G":4,"m":3,"K":32,"batch_size":3,"total_steps":6,"learning_rate":0.05,)"
    R"("clip_eps":0.2,"dual_clip":3.0,"kl_coef":0.001,"eps":1e-6,"temperature":1.0,"seed":7,)"
    R"("checkpoint_every":3,"eval_every":3,"eval_mazes":3})";

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "vpo_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    spit(root_ / "config.json", kConfig);
    auto cfg3 = std::string(kConfig);
    cfg3.replace(cfg3.find("\"total_steps\":6"), 15, "\"total_steps\":3");
    spit(root_ / "config3.json", cfg3);
    const auto r = vpo({"gen", "--train", "8", "--test", "5", "--out", (root_ / "data").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static fs::path root_;
  fs::path at(const std::string& name) const { return root_ / name; }
};

fs::path CliTest::root_;

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(vpo({}).code, cli::kExitUsage);
  EXPECT_EQ(vpo({"fly"}).code, cli::kExitUsage);
  EXPECT_EQ(vpo({"gen"}).code, cli::kExitUsage);
  EXPECT_EQ(vpo({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, GenWritesSplitsAndRefusesOverwrite) {
  EXPECT_TRUE(fs::exists(at("data/manifest.json")));
  EXPECT_TRUE(fs::exists(at("data/train/0007.maze")));
  EXPECT_TRUE(fs::exists(at("data/test/0004.maze")));
  EXPECT_FALSE(fs::exists(at("data/test/0005.maze")));
  const auto again = vpo({"gen", "--train", "8", "--test", "5", "--out", at("data").string()});
  EXPECT_EQ(again.code, cli::kExitData);
  EXPECT_NE(again.err.find("--force"), std::string::npos) << again.err;
  const auto copy = at("data_copy");
  ASSERT_EQ(vpo({"gen", "--train", "8", "--test", "5", "--out", copy.string(), "--threads", "3"}).code, 0);
  EXPECT_EQ(slurp(copy / "manifest.json"), slurp(at("data/manifest.json")));
}

TEST_F(CliTest, TrainAndEvalAreDeterministicAcrossThreads) {
  for (const std::string threads : {"1", "4"}) {
    const auto run = at("run_t" + threads);
    const auto r = vpo({"train", "--config", at("config.json").string(), "--data", at("data").string(), "--out",
                        run.string(), "--threads", threads});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto e = vpo({"eval", "--ckpt", (run / "final.json").string(), "--data", at("data").string(), "--out",
                        at("eval_t" + threads).string(), "--seeds", "2", "--threads", threads});
    ASSERT_EQ(e.code, 0) << e.err;
  }
  for (const char* f : {"metrics.csv", "final.json", "manifest.json", "checkpoints/step_000003.json"}) {
    EXPECT_EQ(slurp(at("run_t1") / f), slurp(at("run_t4") / f)) << f;
  }
  for (const char* f : {"metrics.csv", "candidates.jsonl", "manifest.json"}) {
    EXPECT_EQ(slurp(at("eval_t1") / f), slurp(at("eval_t4") / f)) << f;
  }
  const auto csv = slurp(at("eval_t1") / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,k,best_prefix,best_unbiased,pass,diversity,rho_bar,n_mazes,seed");

  const auto d = vpo({"diagnose", "--pool", (at("eval_t1") / "candidates.jsonl").string()});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_EQ(d.out.substr(0, d.out.find('\n')), "seed,maze_id,n,diversity,rho_bar");
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(vpo({"train", "--config", at("config3.json").string(), "--data", at("data").string(), "--out",
                 at("resume_a").string()})
                .code,
            0);
  const auto r = vpo({"train", "--config", at("config.json").string(), "--data", at("data").string(), "--out",
                      at("resume_b").string(), "--resume", (at("resume_a") / "final.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(vpo({"train", "--config", at("config.json").string(), "--data", at("data").string(), "--out",
                 at("resume_full").string()})
                .code,
            0);
  EXPECT_EQ(slurp(at("resume_b") / "final.json"), slurp(at("resume_full") / "final.json"));
}

TEST_F(CliTest, BadConfigAndCheckpointAreDataErrors) {
  auto cfg = std::string(kConfig);
  cfg.replace(cfg.find("\"kl_coef\":0.001,"), 16, "");
  spit(at("missing.json"), cfg);
  const auto r = vpo({"train", "--config", at("missing.json").string(), "--data", at("data").string(), "--out",
                      at("run_missing").string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("config is missing required key 'kl_coef'"), std::string::npos) << r.err;

  ASSERT_EQ(vpo({"train", "--config", at("config3.json").string(), "--data", at("data").string(), "--out",
                 at("run_corrupt").string(), "--force"})
                .code,
            0);
  auto ckpt = slurp(at("run_corrupt") / "final.json");
  ckpt.replace(ckpt.find("\"step\":3"), 8, "\"step\":4");
  spit(at("corrupt.json"), ckpt);
  const auto e = vpo({"eval", "--ckpt", at("corrupt.json").string(), "--data", at("data").string(), "--out",
                      at("eval_corrupt").string()});
  EXPECT_EQ(e.code, cli::kExitData);
  EXPECT_NE(e.err.find("checkpoint hash mismatch"), std::string::npos) << e.err;
}

TEST_F(CliTest, TamperedDatasetIsRejected) {
  const auto copy = at("data_tampered");
  ASSERT_EQ(vpo({"gen", "--train", "3", "--test", "2", "--out", copy.string()}).code, 0);
  auto text = slurp(copy / "train" / "0001.maze");
  text[text.find('.')] = '#';
  spit(copy / "train" / "0001.maze", text);
  const auto r = vpo({"train", "--config", at("config.json").string(), "--data", copy.string(), "--out",
                      at("run_tampered").string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("hash mismatch"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalRowsPerSeedAndSmallK) {
  if (!fs::exists(at("run_t1") / "final.json")) {
    ASSERT_EQ(vpo({"train", "--config", at("config.json").string(), "--data", at("data").string(), "--out",
                   at("run_t1").string()})
                  .code,
              0);
  }
  const auto r = vpo({"eval", "--ckpt", (at("run_t1") / "final.json").string(), "--data", at("data").string(), "--out",
                      at("eval_k1").string(), "--seeds", "4", "--k", "1,30"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(at("eval_k1") / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  std::map<std::string, int> rows;
  while (std::getline(csv, line)) {
    std::istringstream fields(line);
    std::string method;
    std::string k;
    std::getline(fields, method, ',');
    std::getline(fields, k, ',');
    ++rows[method + "/" + k];
  }
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& [key, n] : rows) EXPECT_EQ(n, 5) << key;
  EXPECT_EQ(vpo({"eval", "--ckpt", (at("run_t1") / "final.json").string(), "--data", at("data").string(), "--out",
                 at("eval_k31").string(), "--k", "31"})
                .code,
            cli::kExitUsage);
}

TEST_F(CliTest, DiagnoseSyntheticPools) {
  std::string same;
  std::string line;
  for (int i = 0; i < 4; ++i) {
    same += R"({"seed":0,"maze_id":0,"chain_id":)" + std::to_string(i) +
            R"(,"answer_idx":0,"moves":"DOWN","reward":[1,0.5,0.5,1],"scalar":0.75})" + "\n";
    line += R"({"seed":0,"maze_id":0,"chain_id":)" + std::to_string(i) + R"(,"answer_idx":0,"moves":"DOWN","reward":[1,)" +
            std::to_string(0.1 * i) + "," + std::to_string(0.2 * i) + R"(,1],"scalar":0.5})" + "\n";
  }
  spit(at("same.jsonl"), same);
  spit(at("line.jsonl"), line);
  const auto a = vpo({"diagnose", "--pool", at("same.jsonl").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("0,0,4,0,\n"), std::string::npos) << a.out;
  const auto b = vpo({"diagnose", "--pool", at("line.jsonl").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find(",1\n"), std::string::npos) << b.out;
  spit(at("broken.jsonl"), "{\"seed\":0}\n");
  EXPECT_EQ(vpo({"diagnose", "--pool", at("broken.jsonl").string()}).code, cli::kExitData);
}

TEST_F(CliTest, OracleReportsExactValue) {
  const auto r = vpo({"oracle", "--set", "1,0;0,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("exact=0.75 "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("within_3se=yes"), std::string::npos) << r.out;
  EXPECT_EQ(vpo({"oracle", "--set", "1,0;0,1,1"}).code, cli::kExitUsage);
  EXPECT_EQ(vpo({"oracle", "--set", "1,0;0,1", "--alpha", "2"}).code, cli::kExitOk);
  const auto single = vpo({"oracle", "--set", "0.2,0.4,0.9"});
  ASSERT_EQ(single.code, 0) << single.err;
  EXPECT_NE(single.out.find("exact=0.5 "), std::string::npos) << single.out;
}

}  // namespace
}  // namespace vpo
