#pragma once

#include <stdexcept>
#include <string>

namespace mnemo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions or segmentations do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A file could not be decoded. The message names the byte offset.
class ParseError : public Error {
public:
    using Error::Error;
};

/// An argument or configuration violates a precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// NaN or infinity where a finite value is required.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

template <class E = ValidationError>
inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw E(message);
    }
}

}  // namespace mnemo
