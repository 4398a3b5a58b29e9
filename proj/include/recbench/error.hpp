#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recbench {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input data (bad cells, missing columns, empty datasets).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or precondition violation on arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A cached split failed verification.
class ChecksumError : public Error {
public:
    using Error::Error;
};

// A model refused to allocate a structure larger than its memory budget.
class CapacityError : public Error {
public:
    CapacityError(const std::string& what, std::size_t required_bytes, std::size_t budget_bytes)
        : Error(what), required_bytes_(required_bytes), budget_bytes_(budget_bytes) {}

    std::size_t required_bytes() const noexcept { return required_bytes_; }
    std::size_t budget_bytes() const noexcept { return budget_bytes_; }

private:
    std::size_t required_bytes_;
    std::size_t budget_bytes_;
};

// Power meter / measurement session failures.
class MeterError : public Error {
public:
    using Error::Error;
};

}  // namespace recbench
