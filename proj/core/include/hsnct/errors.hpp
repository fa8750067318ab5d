#pragma once

#include <stdexcept>
#include <string>

namespace hsnct {

// Invalid arguments, shape mismatches and violated invariants.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File system failures and malformed container files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadMagicError : public IoError {
public:
    using IoError::IoError;
};

class TruncatedFileError : public IoError {
public:
    using IoError::IoError;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ValidationError(message);
    }
}

}  // namespace hsnct
