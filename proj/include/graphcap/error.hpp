// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace graphcap {

enum class ErrorCode {
  // ir_core
  CycleDetected,
  InvalidProgram,
  // interpreter
  MissingValue,
  DeviceMismatch,
  DanglingHostRef,
  DanglingDeviceRef,
  MissingInput,
  TooLarge,
  // cgct
  NotAScalarCause,
  NotHoistable,
  NotHostOutput,
  // capture
  NotEligible,
  // indirection
  NotFound,
  OffsetAmbiguous,
  BadPattern,
  // fixtures
  InvalidSpec,
  // workload_io
  Schema,
  // anything that indicates a bug rather than bad input
  InternalInvariant,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace graphcap
