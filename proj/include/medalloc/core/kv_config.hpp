/*
 * Copyright 2026 The medalloc Authors.
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

#ifndef MEDALLOC_CORE_KV_CONFIG_HPP_
#define MEDALLOC_CORE_KV_CONFIG_HPP_

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medalloc/core/csv.hpp"
#include "medalloc/core/error.hpp"

namespace medalloc {

/// Flat `key = value` configuration. `#` starts a comment; keys are
/// case-sensitive and may use dots for grouping (`forest.trees = 50`).
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::string_view view = trim(line);
      if (view.empty()) continue;
      auto eq = view.find('=');
      if (eq == std::string_view::npos) {
        fail(ErrorCategory::kConfig, "config line " + std::to_string(line_no) + ": expected key = value");
      }
      std::string key(trim(view.substr(0, eq)));
      if (key.empty()) {
        fail(ErrorCategory::kConfig, "config line " + std::to_string(line_no) + ": empty key");
      }
      config.values_[key] = std::string(trim(view.substr(eq + 1)));
    }
    return config;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::kIo, "cannot open config file '" + path + "'");
    return parse(in);
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    auto raw = get(key);
    if (!raw) return fallback;
    auto value = csv::parse_number(*raw);
    if (!value) fail(ErrorCategory::kConfig, "config key '" + key + "': not a number: " + *raw);
    return *value;
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    auto raw = get(key);
    if (!raw) return fallback;
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), value);
    if (ec != std::errc() || ptr != raw->data() + raw->size()) {
      fail(ErrorCategory::kConfig, "config key '" + key + "': not a non-negative integer: " + *raw);
    }
    return value;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto raw = get(key);
    if (!raw) return fallback;
    if (*raw == "true" || *raw == "1" || *raw == "yes") return true;
    if (*raw == "false" || *raw == "0" || *raw == "no") return false;
    fail(ErrorCategory::kConfig, "config key '" + key + "': not a boolean: " + *raw);
  }

  /// All entries whose key starts with `prefix`, with the prefix stripped.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out.emplace(it->first.substr(prefix.size()), it->second);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace medalloc

#endif  // MEDALLOC_CORE_KV_CONFIG_HPP_
