#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coalesce {

enum class ErrorCode {
    NotPositiveDefinite,
    SeriesDiverged,
    DispersionOutOfRange,
    BandwidthOutOfRange,
    SpectrumOverlap,
    DegenerateStart,
    GapTooSmall,
    StepUnderflow,
    TripleDegeneracy,
    LoopUnresolvable,
    OddSignCount,
    RefinementInconsistent,
    NonPositiveCount,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    // Numerical failures map to CLI exit code 2, contract violations to 1.
    bool is_numerical() const noexcept {
        switch (code_) {
        case ErrorCode::NotPositiveDefinite:
        case ErrorCode::SeriesDiverged:
        case ErrorCode::DegenerateStart:
        case ErrorCode::GapTooSmall:
        case ErrorCode::StepUnderflow:
        case ErrorCode::TripleDegeneracy:
        case ErrorCode::LoopUnresolvable:
        case ErrorCode::RefinementInconsistent:
            return true;
        default:
            return false;
        }
    }

private:
    ErrorCode code_;
};

}  // namespace coalesce
