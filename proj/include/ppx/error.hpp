#pragma once

#include <cstddef>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ppx {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad axis, shape mismatch, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An operation would materialize more entries than the dense guard allows.
class GuardExceeded : public Error {
 public:
  GuardExceeded(const std::string& what, double required, double limit)
      : Error(what + ": requires " + format_count(required) + " entries, guard is " +
              format_count(limit)),
        required_(required) {}

  double required() const noexcept { return required_; }

 private:
  static std::string format_count(double n) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(0) << n;
    return os.str();
  }

  double required_;
};

/// A file or manifest could not be parsed or failed validation.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Maximum number of entries any operation may materialize densely.
inline constexpr std::size_t kDenseGuard = 100'000'000;

}  // namespace ppx
