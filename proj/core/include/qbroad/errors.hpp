#ifndef QBROAD_ERRORS_HPP
#define QBROAD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qbroad {

/// Invalid or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure such as NaN or norm loss (CLI exit code 3).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / serialization failure (CLI exit code 4).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qbroad

#endif
