// Copyright 2026 The samhead Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace samhead {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidConfig,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kTrailingData,
  kBadDimensions,
  kValueOutOfRange,
  kDegenerateRoi,
  kDimensionMismatch,
  kMissingLayer,
  kInsufficientSamples,
  kNoPositives,
  kUndefinedMetric,
  kParse,
  kIo,
  kInternal,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidConfig: return "invalid_config";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kTrailingData: return "trailing_data";
    case ErrorCode::kBadDimensions: return "bad_dimensions";
    case ErrorCode::kValueOutOfRange: return "value_out_of_range";
    case ErrorCode::kDegenerateRoi: return "degenerate_roi";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kMissingLayer: return "missing_layer";
    case ErrorCode::kInsufficientSamples: return "insufficient_samples";
    case ErrorCode::kNoPositives: return "no_positives";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

// All library failures surface as this exception. `index` carries the
// offending element position for range errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail

}  // namespace samhead
