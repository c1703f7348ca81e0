// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <redline/deskworld.hpp>

#include <cstddef>
#include <optional>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace redline
{

enum class Objective
{
    TaskFailure,
    ActionInflation,
    ConstraintViolation,
};

[[nodiscard]] std::string_view to_string(Objective objective) noexcept;
/// Accepts "task-failure", "action-inflation", "constraint-violation" (underscores also accepted).
[[nodiscard]] std::optional<Objective> objective_from_string(std::string_view name) noexcept;

struct RewardConfig
{
    double lambda = 0.25;
    double clamp_lo = -1.0;
    double clamp_hi = 1.5;
    double null_penalty = -0.5;
    double w_tool = 0.5;
    double w_char = 0.5;
    std::size_t cv_scale = 10;
};

/// Throws Error(InvalidArgument) unless clamp_lo < clamp_hi, lambda >= 0 and w_tool + w_char == 1.
void validate(RewardConfig const& config);

void to_json(nlohmann::json& j, RewardConfig const& config);
void from_json(nlohmann::json const& j, RewardConfig& config);

struct RewardBreakdown
{
    double r_objective = 0.0;
    double p_stealth = 0.0;
    double total = 0.0;
    bool null_attack = false;

    bool operator==(RewardBreakdown const&) const = default;
};

struct EpisodeUsage
{
    std::size_t tool_calls_used = 0;
    std::size_t max_tool_calls = 4;
    std::size_t char_edits_used = 0;
    std::size_t max_char_edits = 200;
    std::size_t accepted_edits = 0;
};

[[nodiscard]] double objective_reward(Objective objective,
                                      RolloutResult const& base,
                                      RolloutResult const& attack,
                                      std::size_t max_steps,
                                      std::size_t cv_scale);

[[nodiscard]] double stealth_penalty(std::size_t tool_calls_used,
                                     std::size_t max_tool_calls,
                                     std::size_t char_edits_used,
                                     std::size_t max_char_edits,
                                     double w_tool,
                                     double w_char);

[[nodiscard]] RewardBreakdown total_reward(RewardConfig const& config,
                                           Objective objective,
                                           RolloutResult const& base,
                                           RolloutResult const& attack,
                                           std::size_t max_steps,
                                           EpisodeUsage const& usage);

} // namespace redline
