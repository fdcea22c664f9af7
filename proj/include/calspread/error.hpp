#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace calspread {

enum class Errc {
    MalformedRow,
    NonMonotonicTimestamp,
    UnknownEventType,
    BookStateUnavailable,
    EmptyGrid,
    NegativeDepth,
    InsufficientDepth,
    NoEvents,
    Diverged,
    NonMonotoneEM,
    InsufficientLevels,
    DegenerateDepth,
    NonPositiveNumerator,
    NonPositiveQuote,
    NoOverlap,
    DegenerateVariance,
    InfeasiblePlan,
    NoValidTicks,
    InvalidArgument,
    Config,
    Io,
};

constexpr std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case Errc::UnknownEventType: return "UnknownEventType";
    case Errc::BookStateUnavailable: return "BookStateUnavailable";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::NegativeDepth: return "NegativeDepth";
    case Errc::InsufficientDepth: return "InsufficientDepth";
    case Errc::NoEvents: return "NoEvents";
    case Errc::Diverged: return "Diverged";
    case Errc::NonMonotoneEM: return "NonMonotoneEM";
    case Errc::InsufficientLevels: return "InsufficientLevels";
    case Errc::DegenerateDepth: return "DegenerateDepth";
    case Errc::NonPositiveNumerator: return "NonPositiveNumerator";
    case Errc::NonPositiveQuote: return "NonPositiveQuote";
    case Errc::NoOverlap: return "NoOverlap";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::InfeasiblePlan: return "InfeasiblePlan";
    case Errc::NoValidTicks: return "NoValidTicks";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Config: return "Config";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can dispatch without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace calspread
