#pragma once

#include <stdexcept>
#include <string>

namespace cadalign {

// Validation errors map to CLI exit code 2, numerical failures to 3.
enum class ErrorKind { Validation, Numerical, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(ErrorKind::Validation, msg);
}

}  // namespace cadalign
