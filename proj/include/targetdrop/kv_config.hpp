// Copyright 2026 The TargetDrop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Plain-text `key=value` configuration.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "targetdrop/error.hpp"

namespace targetdrop {

/// One `key=value` per line. Blank lines and lines starting with '#' are
/// skipped; whitespace around keys and values is trimmed. Malformed lines
/// raise ConfigError with the line number.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

/// Splits "key=value" (as given to --set).
std::pair<std::string, std::string> split_assignment(std::string_view text);

std::size_t parse_size(std::string_view key, std::string_view value);
std::uint64_t parse_u64(std::string_view key, std::string_view value);
double parse_double(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);
std::vector<std::string> split_list(std::string_view value, char sep = ',');
std::vector<double> parse_double_list(std::string_view key, std::string_view value);
std::vector<std::size_t> parse_size_list(std::string_view key, std::string_view value);

/// Ordered key/value store restricted to a fixed set of known keys.
/// Unknown keys are rejected at assignment.
class KeyValueConfig {
 public:
  /// `defaults` fixes both the allowed keys and their initial values.
  explicit KeyValueConfig(std::map<std::string, std::string> defaults)
      : values_(std::move(defaults)) {}

  void set(const std::string& key, const std::string& value);
  void merge_text(std::string_view text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const { return parse_size(key, get(key)); }
  std::uint64_t get_u64(const std::string& key) const { return parse_u64(key, get(key)); }
  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  bool get_bool(const std::string& key) const { return parse_bool(key, get(key)); }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Sorted `key=value` lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace targetdrop
