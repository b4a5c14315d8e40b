#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hsx {

enum class ErrorKind {
  Config,
  Data,
  Format,
  Shape,
  Dimension,
  State,
  Protocol,
  Training,
  Numeric,
  Evaluation,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Protocol: return "protocol violation";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Evaluation: return "evaluation error";
  }
  return "error";
}

/// Base exception for everything the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the binary readers; carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(ErrorKind::Format, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Training divergence; remembers the last step whose loss was finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long last_finite_step)
      : Error(ErrorKind::Training,
              what + " (last finite step " + std::to_string(last_finite_step) + ")"),
        last_finite_step_(last_finite_step) {}

  long last_finite_step() const noexcept { return last_finite_step_; }

 private:
  long last_finite_step_;
};

/// Process exit codes used by the CLI.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Training:
    case ErrorKind::Numeric: return 4;
    case ErrorKind::Evaluation: return 5;
    default: return 3;
  }
}

}  // namespace hsx
