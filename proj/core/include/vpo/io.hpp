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

// Small hashing and file helpers shared by the dataset, checkpoint and
// manifest code.

#include <filesystem>
#include <string>
#include <string_view>

namespace vpo {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename. Throws std::runtime_error
/// naming the path on failure.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace vpo
