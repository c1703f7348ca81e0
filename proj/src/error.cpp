// SPDX-License-Identifier: Apache-2.0
#include <redline/error.hpp>

namespace redline
{

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code)
    {
        case ErrorCode::BudgetExceeded: return "budget-exceeded";
        case ErrorCode::InvalidSite: return "invalid-site";
        case ErrorCode::MissingCharArg: return "missing-char-arg";
        case ErrorCode::IndexOutOfRange: return "index-out-of-range";
        case ErrorCode::MissingReplacement: return "missing-replacement";
        case ErrorCode::ClauseTooLong: return "clause-too-long";
        case ErrorCode::EmptyInstruction: return "empty-instruction";
        case ErrorCode::NoOpEdit: return "no-op-edit";
        case ErrorCode::RemoteUnreachable: return "remote-unreachable";
        case ErrorCode::ProtocolViolation: return "protocol-violation";
        case ErrorCode::StaleTrajectory: return "stale-trajectory";
        case ErrorCode::ZeroBaseline: return "zero-baseline";
        case ErrorCode::CorruptLog: return "corrupt-log";
        case ErrorCode::UnknownSuite: return "unknown-suite";
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::InvalidScenario: return "invalid-scenario";
        case ErrorCode::InvariantViolation: return "invariant-violation";
    }
    return "unknown";
}

Error::Error(ErrorCode code, std::string const& detail):
    std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)), code_(code)
{
}

} // namespace redline
