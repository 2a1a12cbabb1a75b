#pragma once

#include <stdexcept>
#include <string>

namespace watermap {

// Configuration / argument problems. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Data and I/O problems. CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : DataError {
    using DataError::DataError;
};

struct IoError : DataError {
    using DataError::DataError;
};

struct ShapeError : DataError {
    using DataError::DataError;
};

struct IndexError : DataError {
    using DataError::DataError;
};

struct AsymmetryError : DataError {
    using DataError::DataError;
};

struct RankError : DataError {
    using DataError::DataError;
};

struct GridError : DataError {
    using DataError::DataError;
};

struct OutOfGridError : DataError {
    using DataError::DataError;
};

struct SizeCapError : DataError {
    using DataError::DataError;
};

// Numerical failures. CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NormalizationError : NumericError {
    using NumericError::NumericError;
};

struct DegenerateRowError : NumericError {
    using NumericError::NumericError;
};

struct DegenerateSpanError : NumericError {
    using NumericError::NumericError;
};

struct NoConvergenceError : NumericError {
    using NumericError::NumericError;
};

} // namespace watermap
