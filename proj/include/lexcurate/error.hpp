#pragma once

#include <stdexcept>
#include <string>

namespace lexcurate {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, options, or preconditions detected before any work starts.
/// The CLI maps this to exit status 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A record in an input file does not match its documented format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input violates an operation's precondition (empty input, mismatched sizes, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace lexcurate
