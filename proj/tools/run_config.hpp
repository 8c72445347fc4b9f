/*
 * Copyright 2026 The voxdx Authors.
 *
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

#ifndef VOXDX_TOOLS_RUN_CONFIG_HPP_
#define VOXDX_TOOLS_RUN_CONFIG_HPP_

// Flat `key = value` run configuration with a fixed schema. Values are
// layered: built-in default, then config file, then command-line flag.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace voxdx::cli {

enum class KeyType { kString, kInt, kUint, kDouble, kBool, kExtents, kChoice };

struct KeySpec {
  std::string name;  // canonical, underscores
  KeyType type;
  std::string default_value;
  std::string help;
  std::vector<std::string> commands;  // commands exposing the key as a flag
  std::vector<std::string> choices;   // kChoice only
};

const std::vector<KeySpec>& schema();
const KeySpec* find_key(std::string_view name);

// Dashes become underscores.
std::string normalize_key(std::string_view key);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Source { kDefault, kFile, kFlag };

class RunConfig {
 public:
  RunConfig();

  // Throws ConfigError naming the file and line for unknown keys, malformed
  // lines or values that fail validation.
  void merge_file(const std::filesystem::path& path);
  void merge_text(const std::string& text, const std::string& origin);

  // Throws ConfigError for unknown keys or invalid values. A value never
  // replaces one from a higher-precedence source.
  void set(std::string_view key, const std::string& value, Source source);

  const std::string& get(std::string_view key) const;
  Source source(std::string_view key) const;

  std::string str(std::string_view key) const { return get(key); }
  std::int64_t i64(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  double f64(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::array<std::uint32_t, 3> extents(std::string_view key) const;

 private:
  struct Entry {
    std::string value;
    Source source = Source::kDefault;
  };
  const Entry& entry(std::string_view key) const;
  std::map<std::string, Entry, std::less<>> values_;
};

// Throws ConfigError when `value` does not parse as `spec`'s type.
void validate_value(const KeySpec& spec, const std::string& value);

}  // namespace voxdx::cli

#endif  // VOXDX_TOOLS_RUN_CONFIG_HPP_
