#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace effectcast {

enum class ErrorCode {
    InvalidGeometry,
    DimensionMismatch,
    EmptyInput,
    UnsupportedDirection,
    Schema,
    Parse,
    Validation,
    Io,
    EmptyMask,
    InsufficientExemplars,
    EmptyCompletion,
    Transport,
    BackendUnavailable,
    MalformedRequest,
    MalformedResponse,
    Config,
};

std::string_view to_string(ErrorCode code);

// Transport-level failures may succeed on retry; everything else is final.
constexpr bool is_retryable(ErrorCode code) {
    return code == ErrorCode::Transport || code == ErrorCode::BackendUnavailable;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    bool retryable() const noexcept { return is_retryable(code_); }

private:
    ErrorCode code_;
};

}  // namespace effectcast
