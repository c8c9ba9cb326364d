#pragma once

#include <stdexcept>
#include <string>

namespace nhred {

/// Error categories used across the library. The CLI maps these to exit codes.
enum class ErrorCode {
  MismatchedBasePoint,
  DegenerateInput,
  StepTooLarge,
  NotRegular,
  CleanIntersectionViolated,
  NotInvariant,
  DimensionAssumptionFailed,
  DegenerateMetric,
  DegenerateOmegaC,
  DegenerateGaugedForm,
  LeftAdmissibleRegion,
  NotOnLevelSet,
  NotWellDefined,
  Degenerate,
  HypothesisFailed,
  UnknownModel,
  InvalidParameter,
  UnknownExpression,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace nhred
