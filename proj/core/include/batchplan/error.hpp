#pragma once

#include <stdexcept>
#include <string>

namespace batchplan {

enum class ErrorKind {
  InvalidInput,      // malformed arguments or precondition violations
  InsufficientSpan,  // not enough distinct observations to fit a model
  Infeasible,        // no configuration satisfies the memory bound
};

// Single exception type for the library; `kind()` lets callers map failures
// to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace batchplan
