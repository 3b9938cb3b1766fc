#pragma once

#include <stdexcept>
#include <string>

namespace segrank {

/// Base class of all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter values. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed or inconsistent input data. CLI exit code 3.
struct DataError : Error {
    using Error::Error;
};

/// A broken internal invariant. CLI exit code 4.
struct InternalError : Error {
    using Error::Error;
};

}  // namespace segrank
