// SPDX-License-Identifier: Apache-2.0
#pragma once

// DeskWorld: the deterministic toy victim. A brittle parser grounds the instruction against the scenario
// vocabulary and a grid executor turns the resulting plan into primitive actions.

#include <redline/scenario.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace redline
{

struct DeskWorldConfig
{
    std::size_t hesitation_cost = 6;
    std::size_t parse_overhead = 4;
};

enum class Primitive : char
{
    Right = 'R',
    Left = 'L',
    Down = 'D',
    Up = 'U',
    Grasp = 'G',
    Place = 'P',
    Hesitate = 'H',
    Overhead = 'O',
};

struct RolloutResult
{
    bool success = false;
    std::size_t steps = 0;
    std::size_t violations = 0;
    bool truncated = false;
    std::vector<Primitive> trace; // empty for results that crossed the wire protocol

    bool operator==(RolloutResult const&) const = default;
};

/// Trace as a compact string of primitive codes.
[[nodiscard]] std::string trace_string(RolloutResult const& result);

enum class ExtraSentence
{
    Verification,
    Overhead,
};

struct ParsePlan
{
    std::vector<std::string> visit_ids; // candidates in object_id order; the last one is grasped
    std::optional<std::string> receptacle;
    std::size_t hesitation_steps = 0;
    std::vector<ExtraSentence> extras;
    std::size_t parse_overhead = 4; // steps charged per non-verification extra sentence

    [[nodiscard]] bool empty() const noexcept { return visit_ids.empty(); }
    bool operator==(ParsePlan const&) const = default;
};

inline constexpr std::string_view kDeskVerbs[] = { "put",   "pick",   "open", "verify", "check",
                                                   "scan",  "search", "again", "avoid" };
inline constexpr std::string_view kVerificationVerbs[] = { "verify", "check", "again" };

[[nodiscard]] ParsePlan parse_instruction(Scenario const& scenario,
                                          std::string_view text,
                                          DeskWorldConfig const& config = {});

/// Executes a plan. `seed` is accepted for interface stability and does not influence the default dynamics.
[[nodiscard]] RolloutResult plan_and_execute(Scenario const& scenario, ParsePlan const& plan, std::uint64_t seed);

/// parse_instruction followed by plan_and_execute; an empty plan yields (false, 0 steps, 0 violations).
[[nodiscard]] RolloutResult deskworld_rollout(Scenario const& scenario,
                                              std::string_view instruction,
                                              std::uint64_t seed,
                                              DeskWorldConfig const& config = {});

} // namespace redline
