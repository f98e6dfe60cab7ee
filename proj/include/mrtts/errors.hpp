#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mrtts {

// Process exit codes used by the CLI. Each error family below maps onto one.
enum class ExitCode : int {
    kOk = 0,
    kCheckFailure = 1,
    kUsage = 2,
    kIo = 3,
    kFormat = 4,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::kCheckFailure; }
};

// Operand dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid model/corpus configuration (even kernel, zero words, bad dims).
class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

// Context-tree document does not match the schema. `path` is a JSON pointer.
class ParseError : public Error {
public:
    ParseError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }
    ExitCode exit_code() const noexcept override { return ExitCode::kFormat; }

private:
    std::string path_;
};

// Context-tree alignment invariants are violated at `level`.
class ValidationError : public Error {
public:
    ValidationError(std::string level, const std::string& what)
        : Error(level + ": " + what), level_(std::move(level)) {}
    const std::string& level() const noexcept { return level_; }
    ExitCode exit_code() const noexcept override { return ExitCode::kFormat; }

private:
    std::string level_;
};

class FormatError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kFormat; }
};

class IntegrityError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kFormat; }
};

class IoError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

class BenchError : public Error {
public:
    using Error::Error;
};

// Raised by decode_stream when the frame sink reports failure.
class SinkError : public Error {
public:
    SinkError(std::size_t frames_emitted, const std::string& what)
        : Error(what), frames_emitted_(frames_emitted) {}
    std::size_t frames_emitted() const noexcept { return frames_emitted_; }
    ExitCode exit_code() const noexcept override { return ExitCode::kIo; }

private:
    std::size_t frames_emitted_;
};

}  // namespace mrtts
