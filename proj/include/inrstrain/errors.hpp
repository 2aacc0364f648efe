#pragma once

#include <stdexcept>
#include <string>

namespace inrstrain {

// Base for all errors raised by the library. The CLI maps the two
// families below onto distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent input data: malformed files, invalid
// configuration, empty masks where a region is required.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& key, const std::string& detail)
        : DataError("parse error at key '" + key + "': " + detail), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class PayloadError : public DataError {
public:
    using DataError::DataError;
};

class ConfigError : public DataError {
public:
    using DataError::DataError;
};

class LoadError : public DataError {
public:
    using DataError::DataError;
};

// Numerical failure: degenerate statistics, non-finite losses or
// gradients during optimization.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace inrstrain
