#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace schedopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidRange : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class SupportError : public Error {
 public:
  using Error::Error;
};

class DegenerateDensity : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared while integrating forward or backward in time.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(const std::string& what, double time)
      : Error(format(what, time)), time_(time) {}

  double time() const { return time_; }

 private:
  static std::string format(const std::string& what, double time) {
    std::ostringstream os;
    os << what << " at t=" << time;
    return os.str();
  }

  double time_;
};

namespace detail {

template <class E>
void require(bool condition, const std::string& message) {
  if (!condition) throw E(message);
}

}  // namespace detail
}  // namespace schedopt
