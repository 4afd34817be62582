// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace qgvt {

// Base for every error raised by the library. The CLI maps these to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not line up (matmul inner dims, head layout, ...).
class ShapeError : public Error {
public:
    using Error::Error;
};

// Inputs violate a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Archive or image file does not follow its format (magic, version, header).
class FormatError : public Error {
public:
    using Error::Error;
};

// File is structurally valid but its payload is truncated or overlapping.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qgvt
