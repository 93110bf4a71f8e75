#pragma once

#include <stdexcept>
#include <string>

namespace kdmhl {

// Coarse categories; the CLI maps them onto exit codes.
enum class ErrorKind {
  InvalidArgument,  // precondition violated by a caller
  InvalidConfig,    // bad configuration value or unknown key
  MissingInput,     // file or directory does not exist
  BadData,          // input exists but cannot be parsed / is degenerate
  Unsupported,      // valid input we deliberately do not handle
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace kdmhl
