#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace piezo {

/// Failure categories raised by the core library. The C API maps each one to
/// a status code and the CLI maps them to exit codes.
enum class ErrorKind {
  InvalidScalar,
  NonPositiveDefinite,
  ParseError,
  TopologyError,
  InvalidDimension,
  DegenerateCell,
  SingularLift,
  SolveFailure,
  NonFiniteState,
  DimensionMismatch,
  PreconditionViolated,
  TooLarge,
  StiffnessFailure,
  RateFailure,
  CoercivityViolation,
  ConfigError,
  IoError,
};

std::string_view error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace piezo
