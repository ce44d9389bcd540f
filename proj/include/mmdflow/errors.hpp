#pragma once

#include <stdexcept>
#include <string>

namespace mmdflow {

/// Malformed external input (JSON, CLI measure spec, config).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// A domain invariant was violated (masses, monotonicity, parameter ranges).
struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

/// A numeric procedure failed to converge or produced non-finite values.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mmdflow
