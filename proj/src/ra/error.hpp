#pragma once

#include <stdexcept>
#include <string>

namespace ra {

enum class ErrorCode {
  InvalidArgument = 1,
  Parse,
  Io,
  Infeasible,
  BarrierDomain,
  InsufficientBatch,
  Unsupported,
  Internal,
};

// Every failure raised by the core carries one of the codes above so the
// C boundary can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace ra
