#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace martkit {

enum class ErrorKind {
    InvalidArgument,
    InsufficientData,
    DegenerateCoefficient,
    NonStationary,
    EstimationFailed,
    InferenceFailed,
    BandwidthTooSmall,
    Parse,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Exception carrying a machine-readable category alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

}  // namespace martkit
