#pragma once

#include <stdexcept>
#include <string>

namespace pats {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad user-supplied configuration (missing file, empty dimension, unknown model).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// A document did not match its expected schema; the message names the offending path.
class SchemaError : public Error {
  public:
    using Error::Error;
};

/// A loaded value violates a structural invariant.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A short code or token has the wrong shape (length, alphabet).
class FormatError : public Error {
  public:
    using Error::Error;
};

class RangeError : public Error {
  public:
    using Error::Error;
};

/// Model output stayed unparseable after the documented repair retry.
class ParseRepairError : public Error {
  public:
    using Error::Error;
};

/// Requested judgments or fixtures do not cover the corpus.
class CoverageError : public Error {
  public:
    using Error::Error;
};

} // namespace pats
