#pragma once

#include <stdexcept>
#include <string>

namespace feddm {

// Error hierarchy; the CLI maps each category to a distinct exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericsError : Error {
    using Error::Error;
};

}  // namespace feddm
