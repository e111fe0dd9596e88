#pragma once

#include <stdexcept>
#include <string>

namespace ronchi {

// Bad configuration, unknown names, violated preconditions on user input.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite values, failed factorizations, degenerate weights.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every candidate likelihood is non-finite, so weights cannot be normalized.
class DegenerateWeights : public NumericError {
public:
    using NumericError::NumericError;
};

// Unreadable/unwritable files and malformed containers.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Array shape/size mismatch between operands.
class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

} // namespace ronchi
