#pragma once

#include <stdexcept>
#include <string>

namespace flowalign {

/// Base of every error raised by the library. Each subclass maps to one
/// failure category so callers (the CLI in particular) can pick an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimError : public Error {
public:
    using Error::Error;
};

class ZeroNormError : public Error {
public:
    using Error::Error;
};

class ArgError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class LabelError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Raised when a re-targeted velocity is requested too close to t = 1.
class TimeClampError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace flowalign
