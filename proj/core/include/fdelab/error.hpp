#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdelab {

enum class ErrorCode {
    InvalidGeometry,
    ResolutionTooSmall,
    GridMismatch,
    SolverFailure,
    InvalidParams,
    ZeroField,
    ShapeMismatch,
    NewtonDivergence,
    ExtinctInput,
    MaxStepsExceeded,
    InsufficientDecayWindow,
    TimeBeyondExtinction,
    TrajectoryTooShort,
    ShootingBracketFailure,
    NonConvergence,
    WrongGridShape,
    ProjectionFailure,
    InsufficientPoints,
    BadMagic,
    TruncatedFile,
    DescriptorMismatch,
    MalformedConfig,
    UnknownSubcommand,
    IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this type; `code()` is stable
// and is what callers (and the CLI exit-code mapping) switch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fdelab
