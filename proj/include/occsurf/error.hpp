#pragma once

#include <stdexcept>
#include <string>

namespace occsurf {

// Exit-code classes used by the CLI: usage errors map to 1, data errors to 2,
// numerical failures to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace occsurf
