#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pidlf {

/// Caller violated a precondition (bad index, bad config, bad flag).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data could not be turned into a valid observation set.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DuplicateEntryError : public DataError {
public:
    using DataError::DataError;
};

/// All observed values coincide, so min-max / z-score scaling is undefined.
class DegenerateDataError : public DataError {
public:
    using DataError::DataError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A factor entry became non-finite or exceeded the divergence limit.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t epoch, std::size_t row, std::size_t col, const std::string& detail)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + " on entry (" +
                             std::to_string(row) + ", " + std::to_string(col) + "): " + detail),
          epoch_(epoch), row_(row), col_(col) {}

    std::size_t epoch() const { return epoch_; }
    std::size_t row() const { return row_; }
    std::size_t col() const { return col_; }

private:
    std::size_t epoch_;
    std::size_t row_;
    std::size_t col_;
};

}  // namespace pidlf
