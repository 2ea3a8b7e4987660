#pragma once

#include <stdexcept>
#include <string>

namespace arcdrift {

// Error taxonomy shared by the library and the CLI. Each class maps onto one
// process exit code (see cli.hpp).

/// Caller violated a precondition (bad argument, unsupported option).
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input data is malformed: shape mismatch, corrupt file, bad metadata.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine failed (e.g. Cholesky on a non-PD matrix).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace arcdrift
