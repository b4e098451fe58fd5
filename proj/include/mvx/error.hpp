// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <stdexcept>
#include <string>

namespace mvx {

enum class ErrorCode {
  InvalidParams = 1,
  DimensionMismatch,
  NonFiniteResult,
  DegenerateWeights,
  Instability,
  MissingDelta,
  InsufficientWindow,
  FitFailure,
  UnsupportedModel,
  IndexOutOfRange,
  WeightCollapse,
  GridMismatch,
  InvalidEpsilon,
  DegenerateFit,
  ParseError,
  ValidationError,
  IoError,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mvx
