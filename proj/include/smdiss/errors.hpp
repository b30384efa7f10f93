#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smdiss {

/// Every failure the library can report. Each value maps to exactly one
/// machine-readable CLI code (see cli_error_code).
enum class ErrorCode {
  SingularSpeed,
  NoEquilibrium,
  NonConvergence,
  MissingEquilibrium,
  MissingControllerState,
  KindMismatch,
  IdentityMismatch,
  InsufficientSampling,
  StepSizeUnderflow,
  WindowOutOfRange,
  ParseError,
  ValidationError,
  IoError,
};

inline constexpr int kErrorCodeCount = static_cast<int>(ErrorCode::IoError) + 1;

std::string_view cli_error_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a formula divides by a rotor speed (or speed deviation) whose
/// magnitude is at or below kOmegaFloor.
class SingularSpeedError : public Error {
 public:
  SingularSpeedError(double omega, std::optional<double> last_valid_time = std::nullopt);

  double omega() const noexcept { return omega_; }
  std::optional<double> last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double omega_;
  std::optional<double> last_valid_time_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, std::string field);

  /// 1-based line of the offending token, 0 when not tied to a position.
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::string invariant, const std::string& context = {});

  /// The violated invariant, e.g. "J > 0".
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

}  // namespace smdiss
