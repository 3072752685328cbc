#pragma once

#include <stdexcept>
#include <string>

namespace bertkit {

// Base for everything the pipeline can throw. The CLI maps any Error to
// exit code 2 (data error); usage problems are handled by the parser and
// exit with 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};
struct DecodeError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

}  // namespace bertkit
