#pragma once

#include <stdexcept>
#include <string>

namespace gtex {

/// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
  InvalidArgument,  // caller broke a precondition (sizes, ranges)
  BadInput,         // malformed or missing file content
  Io,               // filesystem failure
  Numerical,        // divergence, singular systems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

const char* to_string(ErrorKind kind);

}  // namespace gtex
