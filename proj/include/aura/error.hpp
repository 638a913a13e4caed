#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aura {

enum class ErrorCode {
    MalformedLine,
    UnknownTag,
    NonFinite,
    RangeError,
    InsufficientData,
    WindowTooShort,
    BadSampleRate,
    BadProfile,
    EmptyInput,
    NotCalibrated,
    OutOfBounds,
    UnknownPattern,
    SeqGap,
    ConfigMismatch,
    ReplayDivergence,
    BadConfig,
    BadScenario,
    BadFormat,
    NotStarted,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedLine:    return "MalformedLine";
        case ErrorCode::UnknownTag:       return "UnknownTag";
        case ErrorCode::NonFinite:        return "NonFinite";
        case ErrorCode::RangeError:       return "RangeError";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::WindowTooShort:   return "WindowTooShort";
        case ErrorCode::BadSampleRate:    return "BadSampleRate";
        case ErrorCode::BadProfile:       return "BadProfile";
        case ErrorCode::EmptyInput:       return "EmptyInput";
        case ErrorCode::NotCalibrated:    return "NotCalibrated";
        case ErrorCode::OutOfBounds:      return "OutOfBounds";
        case ErrorCode::UnknownPattern:   return "UnknownPattern";
        case ErrorCode::SeqGap:           return "SeqGap";
        case ErrorCode::ConfigMismatch:   return "ConfigMismatch";
        case ErrorCode::ReplayDivergence: return "ReplayDivergence";
        case ErrorCode::BadConfig:        return "BadConfig";
        case ErrorCode::BadScenario:      return "BadScenario";
        case ErrorCode::BadFormat:        return "BadFormat";
        case ErrorCode::NotStarted:       return "NotStarted";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind rather than the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace aura
