// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/error.hpp"

namespace med3d {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kNonFiniteVoxel: return "NonFiniteVoxel";
    case ErrorCode::kNonPositiveSpacing: return "NonPositiveSpacing";
    case ErrorCode::kInvalidDimensions: return "InvalidDimensions";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateDomainId: return "DuplicateDomainId";
    case ErrorCode::kEmptyDomain: return "EmptyDomain";
    case ErrorCode::kEmptyList: return "EmptyList";
    case ErrorCode::kNonPositiveTarget: return "NonPositiveTarget";
    case ErrorCode::kNoForeground: return "NoForeground";
    case ErrorCode::kRatingOutOfRange: return "RatingOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kTargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kInvalidDepth: return "InvalidDepth";
    case ErrorCode::kDuplicateBranch: return "DuplicateBranch";
    case ErrorCode::kUnknownDomain: return "UnknownDomain";
    case ErrorCode::kArchMismatch: return "ArchMismatch";
    case ErrorCode::kEmptyAfterFraction: return "EmptyAfterFraction";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidLabels: return "InvalidLabels";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
  }
  return "Unknown";
}

}  // namespace med3d
