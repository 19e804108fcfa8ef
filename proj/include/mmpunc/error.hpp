// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mmpunc {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor dimensions disagree with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

// An id or position is outside its valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

// A numeric value is unusable: non-finite results, bad rates, bad steps.
class ValueError : public Error {
public:
    using Error::Error;
};

// The filesystem said no: missing files, failed reads/writes.
class IoError : public Error {
public:
    using Error::Error;
};

// A file exists but its contents violate the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

// Inconsistent or invalid configuration (CLI, config file, checkpoint dims).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace mmpunc
