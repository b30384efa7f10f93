#include "smdiss/errors.hpp"

#include <cstdio>

namespace smdiss {

std::string_view cli_error_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularSpeed: return "SINGULAR_SPEED";
    case ErrorCode::NoEquilibrium: return "NO_EQUILIBRIUM";
    case ErrorCode::NonConvergence: return "NON_CONVERGENCE";
    case ErrorCode::MissingEquilibrium: return "MISSING_EQUILIBRIUM";
    case ErrorCode::MissingControllerState: return "MISSING_CONTROLLER_STATE";
    case ErrorCode::KindMismatch: return "KIND_MISMATCH";
    case ErrorCode::IdentityMismatch: return "IDENTITY_MISMATCH";
    case ErrorCode::InsufficientSampling: return "INSUFFICIENT_SAMPLING";
    case ErrorCode::StepSizeUnderflow: return "STEP_SIZE_UNDERFLOW";
    case ErrorCode::WindowOutOfRange: return "WINDOW_OUT_OF_RANGE";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::ValidationError: return "VALIDATION_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

namespace {

std::string singular_message(double omega, std::optional<double> t) {
  char buf[160];
  if (t) {
    std::snprintf(buf, sizeof buf, "speed %.6g rad/s is below the singularity floor (last valid t = %.17g s)",
                  omega, *t);
  } else {
    std::snprintf(buf, sizeof buf, "speed %.6g rad/s is below the singularity floor", omega);
  }
  return buf;
}

std::string parse_message(const std::string& message, int line, const std::string& field) {
  std::string out = message;
  if (line > 0) out += " (line " + std::to_string(line) + ")";
  if (!field.empty()) out += " [field '" + field + "']";
  return out;
}

}  // namespace

SingularSpeedError::SingularSpeedError(double omega, std::optional<double> last_valid_time)
    : Error(ErrorCode::SingularSpeed, singular_message(omega, last_valid_time)),
      omega_(omega),
      last_valid_time_(last_valid_time) {}

ParseError::ParseError(const std::string& message, int line, std::string field)
    : Error(ErrorCode::ParseError, parse_message(message, line, field)), line_(line), field_(std::move(field)) {}

ValidationError::ValidationError(std::string invariant, const std::string& context)
    : Error(ErrorCode::ValidationError,
            "violated invariant: " + invariant + (context.empty() ? "" : " (" + context + ")")),
      invariant_(std::move(invariant)) {}

}  // namespace smdiss
