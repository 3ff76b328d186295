#pragma once

#include <stdexcept>
#include <string>

namespace superspill {

// Error taxonomy shared by the whole library. The C API maps each class to a
// status code; inside C++ we throw.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};
struct IntegrityError : Error {
    using Error::Error;
};
// A required keyed lookup (deflator cell, tariff year, IO sector) is absent.
struct KeyError : Error {
    using Error::Error;
};
struct InsufficientDataError : Error {
    using Error::Error;
};
// Numerical failure: non-convergence, rank deficiency, separation, divergence.
struct NumericError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
// Truncation removed (almost) all probability mass.
struct EmptyMarketError : Error {
    using Error::Error;
};

}  // namespace superspill
