#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcgl {

// Violated precondition of a library call (shape mismatch, empty input, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad configuration: unknown keys, out-of-range hyperparameters, hash mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Training produced a non-finite value.
class NumericAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DCGL_EXPECT(cond, msg)                                   \
  do {                                                           \
    if (!(cond)) throw ::dcgl::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace dcgl
