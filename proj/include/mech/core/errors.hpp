#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mech {

enum class ErrorCode {
    UnknownAggregate,
    UnresolvedReference,
    UnitMismatch,
    TypeMismatch,
    CycleDetected,
    PreconditionNotMet,
    PostconditionNotMet,
    AxiomViolated,
    ConservationBroken,
    NegativeCount,
    EffectFailed,
    InitError,
    Deadlock,
    TimeInPast,
    DuplicateId,
    InvalidPayload,
    UnknownEntry,
    UnboundIdentifier,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Error raised by model operations. The code is stable; the message is for
/// humans.
class MechError : public std::runtime_error {
public:
    MechError(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mech
