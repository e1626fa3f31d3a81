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

#ifndef MEDALLOC_CORE_PERIOD_HPP_
#define MEDALLOC_CORE_PERIOD_HPP_

#include <charconv>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "medalloc/core/error.hpp"

namespace medalloc {

/// A calendar month. Ordered, and convertible to a dense month index so that
/// lags and windows are plain integer arithmetic.
class YearMonth {
 public:
  constexpr YearMonth() = default;

  constexpr YearMonth(int year, int month) : index_(year * 12 + (month - 1)) {
    if (month < 1 || month > 12) {
      throw Error(ErrorCategory::kInvalidInput, "month out of range: " + std::to_string(month));
    }
  }

  static constexpr YearMonth from_index(int index) {
    YearMonth out;
    out.index_ = index;
    return out;
  }

  /// Accepts "YYYY-MM", "YYYY-MM-DD" (day ignored) and the DHIS2 style "YYYYMM".
  static std::optional<YearMonth> parse(std::string_view text) {
    auto to_int = [](std::string_view s, int& out) {
      if (s.empty()) return false;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      return ec == std::errc() && ptr == s.data() + s.size();
    };
    int year = 0;
    int month = 0;
    if (text.size() == 6 && text.find('-') == std::string_view::npos) {
      if (!to_int(text.substr(0, 4), year) || !to_int(text.substr(4, 2), month)) return std::nullopt;
    } else if ((text.size() == 7 || text.size() == 10) && text[4] == '-') {
      if (!to_int(text.substr(0, 4), year) || !to_int(text.substr(5, 2), month)) return std::nullopt;
      if (text.size() == 10 && text[7] != '-') return std::nullopt;
    } else {
      return std::nullopt;
    }
    if (month < 1 || month > 12 || year < 0) return std::nullopt;
    return YearMonth(year, month);
  }

  static YearMonth parse_or_throw(std::string_view text) {
    auto parsed = parse(text);
    if (!parsed) fail(ErrorCategory::kInvalidInput, "invalid period '" + std::string(text) + "'");
    return *parsed;
  }

  constexpr int year() const { return floor_div(index_, 12); }
  constexpr int month() const { return index_ - floor_div(index_, 12) * 12 + 1; }
  constexpr int index() const { return index_; }

  constexpr YearMonth operator+(int months) const { return from_index(index_ + months); }
  constexpr YearMonth operator-(int months) const { return from_index(index_ - months); }
  constexpr int operator-(YearMonth other) const { return index_ - other.index_; }

  friend constexpr auto operator<=>(YearMonth, YearMonth) = default;

  std::string str() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year(), month());
    return buf;
  }

 private:
  static constexpr int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

  int index_ = 0;
};

}  // namespace medalloc

#endif  // MEDALLOC_CORE_PERIOD_HPP_
