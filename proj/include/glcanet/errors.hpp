// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace glcanet {

/// Base of every error the library throws. `exit_code()` maps onto the CLI
/// contract: 2 config, 3 data, 4 check failure, 1 anything else.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Shape or extent mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// API misuse (non-scalar loss, backward twice, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// A query row with no allowed key.
class InvalidMaskError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class CheckFailure : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

} // namespace glcanet
