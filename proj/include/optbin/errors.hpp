#pragma once

#include <stdexcept>
#include <string>

namespace optbin {

// Bad input values, malformed files, violated preconditions. CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Files that cannot be opened, read or written. CLI exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// No volatility in the search bracket reproduces the observed price.
class NoSolutionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

}  // namespace optbin
