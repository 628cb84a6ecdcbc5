#pragma once

#include <stdexcept>
#include <string>

namespace nvcool {

// Bad or inconsistent run configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure during a computation: integrator instability, trace
// drift, non-real expectation of a Hermitian observable (CLI exit code 2).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested comparison exceeded its tolerance in check mode (CLI exit code 3).
struct CheckError : std::runtime_error {
    explicit CheckError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nvcool
