#pragma once

#include <stdexcept>
#include <string>

namespace cwrf {

// Broad failure classes; the CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  kInvalidArgument,
  kData,
  kFormat,
  kConfig,
  kIo,
};

const char* category_name(ErrorCategory category);
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCategory::kInvalidArgument, message);
}

}  // namespace cwrf
