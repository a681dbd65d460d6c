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

// Dataset directories and run manifests.
//
//   DIR/manifest.json
//   DIR/train/0000.maze ...
//   DIR/test/0000.maze ...

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vpo/maze.hpp"

namespace vpo {

inline constexpr const char* kToolName = "vpo";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

struct RunManifest {
  std::string command;
  std::string config_json = "{}";  // JSON object
  std::string seeds_json = "{}";   // JSON object
  std::map<std::string, std::string> inputs;     // label -> sha256
  std::map<std::string, std::string> artifacts;  // path relative to the directory -> sha256
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);

/// Hashes each relative path under `dir` into `manifest.artifacts` and writes
/// DIR/manifest.json.
void write_manifest(const std::filesystem::path& dir, RunManifest manifest,
                    const std::vector<std::string>& relative_paths);

/// Reads DIR/manifest.json and re-hashes every artifact. Throws
/// std::runtime_error naming the first file that is missing or differs.
RunManifest verify_manifest(const std::filesystem::path& dir);

struct Dataset {
  std::vector<Maze> train;
  std::vector<Maze> test;
  std::string manifest_hash;  // sha256 of manifest.json
};

/// Throws std::runtime_error if `dir` is non-empty and `force` is false.
void write_dataset(const std::filesystem::path& dir, const Splits& splits, const std::string& command,
                   bool force);

/// Verifies the manifest, then parses every maze file.
Dataset load_dataset(const std::filesystem::path& dir);

/// True when `dir` is missing or empty.
bool directory_empty(const std::filesystem::path& dir);

}  // namespace vpo
