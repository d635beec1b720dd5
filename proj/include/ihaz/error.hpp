#pragma once

#include <stdexcept>
#include <string>

namespace ihaz {

enum class ErrorKind {
  domain,       // evaluation outside [0, tau] or the declared covariate box
  argument,     // bad call arguments (K > n, empty grid, ...)
  input,        // malformed data file or record
  config,       // bad configuration / unknown keys
  convergence,  // Newton-Raphson ran out of iterations
  separation,   // monotone likelihood, divergent coefficients
  rank,         // singular design
  numeric,      // non-finite intermediate
  degenerate_variance
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

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace ihaz
