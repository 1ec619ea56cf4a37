#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ksvarm {

enum class ErrorCode {
    InvalidArgument,
    ConstantColumn,
    WindowTooLong,
    InsufficientSamples,
    InvalidLag,
    NotSymmetric,
    NotPsd,
    ShapeMismatch,
    DegenerateSeries,
    SingularSystem,
    NonFinite,
    LabelMismatch,
    ParseError,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-readable code so the
/// CLI can emit structured error records.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ksvarm
