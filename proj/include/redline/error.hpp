// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace redline
{

enum class ErrorCode
{
    BudgetExceeded,
    InvalidSite,
    MissingCharArg,
    IndexOutOfRange,
    MissingReplacement,
    ClauseTooLong,
    EmptyInstruction,
    NoOpEdit,
    RemoteUnreachable,
    ProtocolViolation,
    StaleTrajectory,
    ZeroBaseline,
    CorruptLog,
    UnknownSuite,
    InvalidArgument,
    InvalidScenario,
    InvariantViolation,
};

/// Stable kebab-case name used in diagnostics and logs.
[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

class Error: public std::runtime_error
{
  public:
    Error(ErrorCode code, std::string const& detail);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace redline
