// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/error.hpp"

namespace mvx {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteResult: return "NonFiniteResult";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::Instability: return "Instability";
    case ErrorCode::MissingDelta: return "MissingDelta";
    case ErrorCode::InsufficientWindow: return "InsufficientWindow";
    case ErrorCode::FitFailure: return "FitFailure";
    case ErrorCode::UnsupportedModel: return "UnsupportedModel";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::WeightCollapse: return "WeightCollapse";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::InvalidEpsilon: return "InvalidEpsilon";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace mvx
