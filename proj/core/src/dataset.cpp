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

#include "vpo/dataset.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vpo/io.hpp"

namespace vpo {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string manifest_to_json(const RunManifest& m) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["config"] = ordered_json::parse(m.config_json);
  j["seeds"] = ordered_json::parse(m.seeds_json);
  j["inputs"] = m.inputs;
  j["artifacts"] = m.artifacts;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("tool").get<std::string>() != kToolName) throw std::runtime_error("manifest was not written by vpo");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_json = j.at("config").dump();
    m.seeds_json = j.at("seeds").dump();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const fs::path& dir, RunManifest manifest, const std::vector<std::string>& relative_paths) {
  for (const auto& rel : relative_paths) manifest.artifacts[rel] = sha256_hex(read_file(dir / rel));
  write_file(dir / kManifestName, manifest_to_json(manifest));
}

RunManifest verify_manifest(const fs::path& dir) {
  const auto path = dir / kManifestName;
  if (!fs::exists(path)) throw std::runtime_error("no manifest at " + path.string());
  RunManifest m = manifest_from_json(read_file(path));
  for (const auto& [rel, expected] : m.artifacts) {
    const auto file = dir / rel;
    if (!fs::exists(file)) throw std::runtime_error("manifest lists missing file " + file.string());
    const auto actual = sha256_hex(read_file(file));
    if (actual != expected) {
      throw std::runtime_error("hash mismatch for " + file.string() + ": manifest " + expected + ", file " + actual);
    }
  }
  return m;
}

bool directory_empty(const fs::path& dir) { return !fs::exists(dir) || fs::is_empty(dir); }

namespace {

std::string maze_name(size_t i) {
  std::ostringstream s;
  s << std::setw(4) << std::setfill('0') << i << ".maze";
  return s.str();
}

std::vector<Maze> load_split(const fs::path& dir, const RunManifest& m, const std::string& split) {
  std::vector<std::string> names;
  for (const auto& [rel, _] : m.artifacts) {
    if (rel.rfind(split + "/", 0) == 0) names.push_back(rel);
  }
  std::sort(names.begin(), names.end());
  std::vector<Maze> out;
  out.reserve(names.size());
  for (const auto& rel : names) {
    try {
      out.push_back(deserialize_maze(read_file(dir / rel)));
    } catch (const std::exception& e) {
      throw std::runtime_error((dir / rel).string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void write_dataset(const fs::path& dir, const Splits& splits, const std::string& command, bool force) {
  if (!directory_empty(dir)) {
    if (!force) throw std::runtime_error("output directory " + dir.string() + " is not empty (use --force)");
    for (const char* sub : {"train", "test"}) fs::remove_all(dir / sub);
    fs::remove(dir / kManifestName);
  }
  std::vector<std::string> rels;
  auto put = [&](const std::vector<Maze>& mazes, const std::string& split) {
    for (size_t i = 0; i < mazes.size(); ++i) {
      const auto rel = split + "/" + maze_name(i);
      write_file(dir / rel, serialize_maze(mazes[i]));
      rels.push_back(rel);
    }
  };
  put(splits.train, "train");
  put(splits.test, "test");

  RunManifest m;
  m.command = command;
  ordered_json cfg;
  cfg["train"] = splits.train.size();
  cfg["test"] = splits.test.size();
  m.config_json = cfg.dump();
  ordered_json seeds;
  seeds["train_first"] = kTrainSeedBase;
  seeds["test_first"] = kTestSeedBase;
  auto seed_list = [](const std::vector<Maze>& mazes) {
    std::vector<uint64_t> s;
    for (const auto& mz : mazes) s.push_back(mz.seed);
    return s;
  };
  seeds["train"] = seed_list(splits.train);
  seeds["test"] = seed_list(splits.test);
  m.seeds_json = seeds.dump();
  write_manifest(dir, std::move(m), rels);
}

Dataset load_dataset(const fs::path& dir) {
  const RunManifest m = verify_manifest(dir);
  Dataset d;
  d.train = load_split(dir, m, "train");
  d.test = load_split(dir, m, "test");
  d.manifest_hash = sha256_hex(read_file(dir / kManifestName));
  if (d.train.empty() && d.test.empty()) throw std::runtime_error("dataset " + dir.string() + " holds no mazes");
  return d;
}

}  // namespace vpo
