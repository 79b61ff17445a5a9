#pragma once

#include <stdexcept>
#include <string>

namespace vaer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented format or contract.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Vector or model dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Training could not proceed (degenerate data, non-finite loss, ...).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A listening socket could not be opened (typically: port in use).
class NetworkError : public Error {
 public:
  using Error::Error;
};

}  // namespace vaer
