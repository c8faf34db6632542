#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lvqa {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class DuplicateDocId : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CorruptSegment : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Model traffic.
class GatewayError : public Error {
public:
    using Error::Error;
};

class HttpError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class TimeoutError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class SchemaViolation : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class UnknownQuestion : public Error {
public:
    using Error::Error;
};

// Pipelines and harness.
class EmptyCorpus : public Error {
public:
    using Error::Error;
};

class EmptyGraph : public Error {
public:
    using Error::Error;
};

class InsufficientEvents : public Error {
public:
    using Error::Error;
};

class IdMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace lvqa
