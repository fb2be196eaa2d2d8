#include "piezo/error.hpp"

namespace piezo {

std::string_view error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidScalar: return "InvalidScalar";
    case ErrorKind::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::TopologyError: return "TopologyError";
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::DegenerateCell: return "DegenerateCell";
    case ErrorKind::SingularLift: return "SingularLift";
    case ErrorKind::SolveFailure: return "SolveFailure";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::StiffnessFailure: return "StiffnessFailure";
    case ErrorKind::RateFailure: return "RateFailure";
    case ErrorKind::CoercivityViolation: return "CoercivityViolation";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace piezo
