#pragma once

#include <stdexcept>
#include <string>

namespace parlens {

// Every failure mode surfaces as one of these so callers (and the CLI's
// machine-readable error emitter) can distinguish categories without
// string-matching messages.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

struct UnsupportedFormatError : Error {
    explicit UnsupportedFormatError(const std::string& m) : Error("unsupported_format", m) {}
};

struct CorruptFileError : Error {
    explicit CorruptFileError(const std::string& m) : Error("corrupt_file", m) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

struct ValueError : Error {
    explicit ValueError(const std::string& m) : Error("value", m) {}
};

struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& m) : Error("convergence", m) {}
};

struct DetectionError : Error {
    explicit DetectionError(const std::string& m) : Error("detection", m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

} // namespace parlens
