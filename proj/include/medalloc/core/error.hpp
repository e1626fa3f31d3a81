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

#ifndef MEDALLOC_CORE_ERROR_HPP_
#define MEDALLOC_CORE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace medalloc {

/// Coarse error classes. The CLI maps each one to its own exit code.
enum class ErrorCategory {
  kSchema,
  kEmptyInput,
  kInvalidInput,
  kShape,
  kDegenerateWeights,
  kNotFound,
  kConfig,
  kIterationLimit,
  kMissingWeight,
  kIo,
};

inline std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kSchema: return "schema";
    case ErrorCategory::kEmptyInput: return "empty-input";
    case ErrorCategory::kInvalidInput: return "invalid-input";
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kDegenerateWeights: return "degenerate-weights";
    case ErrorCategory::kNotFound: return "not-found";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIterationLimit: return "iteration-limit";
    case ErrorCategory::kMissingWeight: return "missing-weight";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) fail(category, message);
}

}  // namespace medalloc

#endif  // MEDALLOC_CORE_ERROR_HPP_
