#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bhmm {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid inputs: bad models, out-of-alphabet symbols, malformed records.
// The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem and stream failures. The CLI maps these to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

class BudgetExceededError : public ValidationError {
 public:
  BudgetExceededError(std::size_t required_at_least, std::size_t allowed)
      : ValidationError("normalizer search needs at least " + std::to_string(required_at_least) +
                        " nodes but the budget allows " + std::to_string(allowed)),
        required_(required_at_least),
        allowed_(allowed) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t allowed() const noexcept { return allowed_; }

 private:
  std::size_t required_;
  std::size_t allowed_;
};

}  // namespace bhmm
