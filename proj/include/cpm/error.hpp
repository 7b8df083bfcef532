#pragma once

#include <stdexcept>
#include <string>

namespace cpm {

// Category decides the CLI exit code: kIo -> 1, everything else -> 2.
enum class ErrorKind { kIo, kValidation, kMath };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error ValidationError(const std::string& message) {
  return Error(ErrorKind::kValidation, message);
}

inline Error MathError(const std::string& message) {
  return Error(ErrorKind::kMath, message);
}

inline Error IoError(const std::string& message) {
  return Error(ErrorKind::kIo, message);
}

const char* ErrorKindName(ErrorKind kind);

}  // namespace cpm
