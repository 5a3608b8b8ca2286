#pragma once

#include <stdexcept>
#include <string>

namespace s2cr {

enum class ErrorKind {
  kInvalidArgument,  // bad flags, violated preconditions
  kIo,               // unreadable or unwritable files
  kFormat,           // malformed curve/model/manifest payloads
  kDimension,        // mismatched image or mask dimensions
  kNumeric,          // non-finite intermediates during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace s2cr
