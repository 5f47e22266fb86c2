#pragma once

#include <stdexcept>
#include <string>

namespace mvq {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector, bit-string or matrix sizes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside its admissible range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// A persisted artifact (bank, table, plan, dataset, config) is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvq
