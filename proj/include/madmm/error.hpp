// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace madmm {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidMesh,
  kHierarchyMismatch,
  kDimensionMismatch,
  kSingularMatrix,
  kNonFinite,
  kInvalidFunction,
  kSubproblemFailure,
  kIo,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidMesh: return "invalid-mesh";
    case ErrorCode::kHierarchyMismatch: return "hierarchy-mismatch";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kSingularMatrix: return "singular-matrix";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kInvalidFunction: return "invalid-function";
    case ErrorCode::kSubproblemFailure: return "subproblem-failure";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace madmm
