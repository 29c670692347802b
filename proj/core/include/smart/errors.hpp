#pragma once

#include <stdexcept>
#include <string>

namespace smart {

// Base for every error raised by the library. Subclasses map onto the CLI exit
// codes: ConfigError -> 2, DataError -> 3, NumericalError -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Shape, grid and conformance mismatches plus file I/O problems.
class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace smart
