#pragma once

#include <stdexcept>
#include <string>

namespace topolms {

// Base of every error raised by the library. The CLI maps the subclasses to
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input violates a precondition (range, ordering, closure, duplicates, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// A recursion produced a non-finite value.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Step-size outside the mean-stability region.
class StabilityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace topolms
