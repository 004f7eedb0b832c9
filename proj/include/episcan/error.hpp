#pragma once

#include <stdexcept>
#include <string>

namespace episcan {

// Argument outside the mathematical domain of an operation (t outside (0,1),
// gamma outside [0, 1/2), k >= n, alpha outside (0,1), ...).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Input series unusable for the requested computation (too short, NaN, ...).
class data_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The variance estimate is zero, negative or non-finite, so the statistic
// cannot be normalized.
class degenerate_variance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CSV or configuration input. `row()` is the 1-based line number
// of the offending line, 0 when not applicable.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, std::size_t row = 0)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace episcan
