#pragma once

#include <stdexcept>
#include <string>

namespace tss {

/// Base of every error raised by the library. `code()` is a short stable
/// token used by the CLI for machine-readable failure lines.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Malformed file contents (bad magic, truncated payload, bad header).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("E_FORMAT", message) {}
};

/// Arguments or data violating a documented precondition.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("E_VALIDATION", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("E_IO", message) {}
};

/// Phantom synthesis could not place its ellipsoids.
class GenerationError : public Error {
public:
    explicit GenerationError(const std::string& message) : Error("E_GENERATION", message) {}
};

/// Surface metrics requested on an empty mask.
class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& message) : Error("E_UNDEFINED_METRIC", message) {}
};

/// Missing or malformed CSV columns.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& message) : Error("E_SCHEMA", message) {}
};

/// Non-finite loss during training.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("E_NUMERIC", message) {}
};

[[noreturn]] void throw_validation(const std::string& message);

}  // namespace tss
