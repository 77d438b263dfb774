// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace med3d {

// Numeric values are mirrored by med3d_status in the C header; keep in sync.
enum class ErrorCode : int {
  kBadMagic = 1,
  kUnsupportedDtype = 2,
  kTruncatedFile = 3,
  kNonFiniteVoxel = 4,
  kNonPositiveSpacing = 5,
  kInvalidDimensions = 6,
  kIoFailure = 7,
  kParseError = 8,
  kDuplicateDomainId = 9,
  kEmptyDomain = 10,
  kEmptyList = 11,
  kNonPositiveTarget = 12,
  kNoForeground = 13,
  kRatingOutOfRange = 14,
  kShapeMismatch = 15,
  kTargetOutOfRange = 16,
  kNotScalar = 17,
  kInvalidDepth = 18,
  kDuplicateBranch = 19,
  kUnknownDomain = 20,
  kArchMismatch = 21,
  kEmptyAfterFraction = 22,
  kEmptyMask = 23,
  kEmptyInput = 24,
  kInvalidArgument = 25,
  kInvalidLabels = 26,
  kNonFiniteValue = 27,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace med3d
