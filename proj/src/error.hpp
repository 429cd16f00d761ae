#pragma once

#include <stdexcept>
#include <string>

namespace semspace {

// Error classes. Values are shared with the C API status codes and with the
// CLI exit codes, so they must stay stable.
enum class ErrorCode : int {
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kParse = 4,
  kValidation = 5,
  kConfig = 6,
  kShape = 7,
  kFormat = 8,
  kDegenerateQuery = 9,
  kUnembeddable = 10,
  kNumeric = 11,
  kNotFound = 12,
  kUndefined = 13,
};

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

}  // namespace semspace
