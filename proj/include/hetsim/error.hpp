#pragma once

#include <stdexcept>
#include <string>

namespace hetsim {

enum class ErrorCode {
    InvalidShape,
    ShapeMismatch,
    UnknownTensor,
    ArityError,
    InvalidAttr,
    CycleDetected,
    MalformedRow,
    NonMonotonicSizes,
    InsufficientRows,
    TargetUnreachable,
    UnsupportedPlacement,
    TooLarge,
    UnscheduledNode,
    FitError,
    ConfigError,
    InternalError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidShape: return "InvalidShape";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::UnknownTensor: return "UnknownTensor";
        case ErrorCode::ArityError: return "ArityError";
        case ErrorCode::InvalidAttr: return "InvalidAttr";
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::NonMonotonicSizes: return "NonMonotonicSizes";
        case ErrorCode::InsufficientRows: return "InsufficientRows";
        case ErrorCode::TargetUnreachable: return "TargetUnreachable";
        case ErrorCode::UnsupportedPlacement: return "UnsupportedPlacement";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::UnscheduledNode: return "UnscheduledNode";
        case ErrorCode::FitError: return "FitError";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::InternalError: return "InternalError";
    }
    return "Unknown";
}

//! Exception carrying a typed error code alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace hetsim
