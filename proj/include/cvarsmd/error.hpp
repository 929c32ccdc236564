#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvarsmd {

enum class ErrorCode {
    NotPositiveDefinite,
    DimensionMismatch,
    InvalidParams,
    EmptyBatch,
    BatchTooSmall,
    NonFiniteGradient,
    NonFiniteInput,
    Diverged,
    NoFeasiblePoint,
    SeriesTooShort,
    NonPositivePrice,
    InsufficientOverlap,
    UnstableEstimate,
    MalformedInput,
    Config,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error category.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::UnstableEstimate: return "UnstableEstimate";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Io: return "IoError";
    }
    return "Unknown";
}

} // namespace cvarsmd
