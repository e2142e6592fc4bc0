#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace evs {

// Base class for all library errors. Subclasses map onto the CLI exit codes:
// ValidationError -> 2, everything else -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs detected before any work starts (config values, preconditions).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// --- text / binary stream decoding ---

class MalformedLineError : public Error {
public:
    MalformedLineError(std::size_t line_no, const std::string& detail)
        : Error("line " + std::to_string(line_no) + ": " + detail), line_no(line_no) {}
    std::size_t line_no;
};

class OutOfBoundsError : public Error {
public:
    explicit OutOfBoundsError(const std::string& msg) : Error(msg) {}
};

class NonMonotonicTimestampError : public Error {
public:
    explicit NonMonotonicTimestampError(const std::string& msg) : Error(msg) {}
};

class BadMagicError : public Error {
public:
    explicit BadMagicError(const std::string& msg) : Error(msg) {}
};

class TruncatedPayloadError : public Error {
public:
    explicit TruncatedPayloadError(const std::string& msg) : Error(msg) {}
};

class ChecksumMismatchError : public Error {
public:
    explicit ChecksumMismatchError(const std::string& msg) : Error(msg) {}
};

// --- windowing / tensor ops ---

class InvalidWindowError : public ValidationError {
public:
    explicit InvalidWindowError(const std::string& msg) : ValidationError(msg) {}
};

class DegenerateWindowError : public ValidationError {
public:
    explicit DegenerateWindowError(const std::string& msg) : ValidationError(msg) {}
};

class ShapeMismatchError : public Error {
public:
    explicit ShapeMismatchError(const std::string& msg) : Error(msg) {}
};

class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& msg) : Error(msg) {}
};

class DisconnectedLossError : public Error {
public:
    explicit DisconnectedLossError(const std::string& msg) : Error(msg) {}
};

class InvalidConfigError : public ValidationError {
public:
    explicit InvalidConfigError(const std::string& msg) : ValidationError(msg) {}
};

class EmptyTestSetError : public ValidationError {
public:
    explicit EmptyTestSetError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace evs
