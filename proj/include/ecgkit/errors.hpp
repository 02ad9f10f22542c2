#pragma once

#include <stdexcept>
#include <string>

namespace ecg {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally invalid input: bad header, wrong column set, unparsable file.
struct FormatError : Error {
  using Error::Error;
};

// Payload shorter or longer than the header promises.
struct TruncationError : FormatError {
  using FormatError::FormatError;
};

// Values that cannot be used: non-finite samples, non-numeric cells.
struct DataError : Error {
  using Error::Error;
};

// Arguments outside an operation's domain (cutoff above Nyquist, empty class, ...).
struct DomainError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Raised when training hits a non-finite loss.
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace ecg
