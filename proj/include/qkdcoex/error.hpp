#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qkdcoex {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes, so new error kinds should derive from one of these.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: config files, dataset files, model files, scripts.
class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public DataError {
public:
    using DataError::DataError;
};

// Tabular parse failure; `row()` is 1-based and counts the header as row 1.
class ParseError : public DataError {
public:
    ParseError(std::size_t row, const std::string& what)
        : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

}  // namespace qkdcoex
