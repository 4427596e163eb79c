#include "effectcast/error.hpp"

namespace effectcast {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidGeometry: return "invalid_geometry";
        case ErrorCode::DimensionMismatch: return "dimension_mismatch";
        case ErrorCode::EmptyInput: return "empty_input";
        case ErrorCode::UnsupportedDirection: return "unsupported_direction";
        case ErrorCode::Schema: return "schema";
        case ErrorCode::Parse: return "parse";
        case ErrorCode::Validation: return "validation";
        case ErrorCode::Io: return "io";
        case ErrorCode::EmptyMask: return "empty_mask";
        case ErrorCode::InsufficientExemplars: return "insufficient_exemplars";
        case ErrorCode::EmptyCompletion: return "empty_completion";
        case ErrorCode::Transport: return "transport";
        case ErrorCode::BackendUnavailable: return "backend_unavailable";
        case ErrorCode::MalformedRequest: return "malformed_request";
        case ErrorCode::MalformedResponse: return "malformed_response";
        case ErrorCode::Config: return "config";
    }
    return "unknown";
}

}  // namespace effectcast
