#pragma once

#include <stdexcept>
#include <string>

namespace infoalign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller: index out of range, bad shape,
// nonpositive probability where a log is taken, and so on.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A NaN or infinity was produced or supplied.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace infoalign
