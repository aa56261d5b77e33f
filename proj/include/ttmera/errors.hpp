#pragma once

#include <stdexcept>
#include <string>

namespace ttmera {

// Error taxonomy. Every library failure derives from `Error` so callers can
// catch one type; the CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Index outside its dimension bound.
class BoundsError : public Error {
public:
    using Error::Error;
};

// Element-count or dimension mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed argument (bad permutation, negative tolerance, empty input ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Non-finite input or a factorization that could not be computed.
class NumericError : public Error {
public:
    using Error::Error;
};

// Dense materialization would exceed the configured entry budget.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Unreadable or malformed file.
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace ttmera
