#pragma once

#include <stdexcept>
#include <string>

namespace libiq {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File or socket operation failed (missing file, unreadable path, bind error).
struct IoError : Error {
  using Error::Error;
};

/// Input bytes or text do not match the expected layout (bad header, wrong
/// record size, truncation, version mismatch).
struct FormatError : Error {
  using Error::Error;
};

/// Structurally valid input carrying unusable values (NaN or Inf samples).
struct DataError : Error {
  using Error::Error;
};

/// Argument outside the documented domain.
struct InvalidArgument : Error {
  using Error::Error;
};

/// Tensor or model dimension mismatch.
struct ShapeError : Error {
  using Error::Error;
};

}  // namespace libiq
