#pragma once

#include <stdexcept>
#include <string>

namespace smg {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input supplied by the caller (arguments, config values, file contents).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated binary payload.
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace smg
