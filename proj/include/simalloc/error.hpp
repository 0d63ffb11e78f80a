#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace simalloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported configuration (bad key, out-of-range value).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Trace file could not be parsed, or a trace failed validation.
class TraceError : public Error {
public:
    TraceError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit TraceError(const std::string& what) : Error(what), line_(0) {}

    /// 1-based line number, 0 when the error is not tied to a line.
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Free of an address that is not live (double free or wild free).
class InvalidFree : public Error {
public:
    using Error::Error;
};

/// Signal/stage sequencing that the offload protocol forbids.
class ProtocolViolation : public Error {
public:
    using Error::Error;
};

}  // namespace simalloc
