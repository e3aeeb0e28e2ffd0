#ifndef RMEM_ERRORS_HPP
#define RMEM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rmem {

/// Invalid parameters, grids, or configuration (CLI exit code 2).
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure: solver tolerance exceeded, truncation overflow, ...
/// (CLI exit code 3).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File read/write failure (CLI exit code 4).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rmem

#endif
