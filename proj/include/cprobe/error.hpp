#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cprobe {

// Base of every error raised by the library. Tools map it to exit status 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed text input; carries the 1-based line it was found on.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// Binary/file layout problems: wrong bit depth, payload length mismatch.
class FormatError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

// Invalid invocation (missing required input, unknown config key). Tools map it to exit status 2.
class UsageError : public Error {
public:
    using Error::Error;
};

class EmptyRegionError : public Error {
public:
    using Error::Error;
};

class RegionTooSmallError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace cprobe
