#pragma once

#include <stdexcept>
#include <string>

namespace gaitgate {

// Broad failure classes. The CLI maps each to a process exit code.
enum class ErrorKind {
  kInvalidArgument,  // bad input, violated precondition
  kIo,               // file missing, unreadable, unwritable
  kFormat,           // malformed model / store / csv content
  kNumeric,          // non-finite or degenerate math
  kUnknownIdentity,  // user not present in the identity store
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::kInvalidArgument, what);
}

}  // namespace gaitgate
