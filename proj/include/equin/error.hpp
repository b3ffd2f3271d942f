#pragma once

#include <stdexcept>
#include <string>

namespace equin {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments, mismatched specs, bad configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Two operands live in different groups.
class SpecMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// File system failures and malformed/corrupt files.
class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public IoError {
public:
    using IoError::IoError;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Non-finite values or numerically undefined operations.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// log_map evaluated at or beyond the principal branch.
class BranchCutError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace equin
