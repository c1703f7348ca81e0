// SPDX-License-Identifier: Apache-2.0
#pragma once

// Attacker policy: a linear softmax over a finite set of edit templates. Scores are
// s_a = sum_f weights[f * A + a] * x_f / temperature, restricted to a mask of valid actions.

#include <redline/instruction.hpp>
#include <redline/random.hpp>
#include <redline/reward.hpp>
#include <redline/toolbox.hpp>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace redline
{

/// Instruction slot an edit template addresses; resolved against the scenario vocabulary.
enum class Slot
{
    FirstContentWord,
    ObjectNoun,
    AttributeWord,
    ReceptacleNoun,
    SpatialModifier,
};

[[nodiscard]] std::string_view to_string(Slot slot) noexcept;

struct StopAction
{
    bool operator==(StopAction const&) const = default;
};

struct CharTypo
{
    CharEditKind kind;
    Slot target; // FirstContentWord, ObjectNoun or ReceptacleNoun
    bool operator==(CharTypo const&) const = default;
};

struct TokenEdit
{
    TokenEditKind kind;
    Slot target; // ObjectNoun, AttributeWord, ReceptacleNoun or SpatialModifier
    bool operator==(TokenEdit const&) const = default;
};

struct InjectClause
{
    ClauseKind kind;
    Anchor anchor;
    bool operator==(InjectClause const&) const = default;
};

using ActionTemplate = std::variant<StopAction, CharTypo, TokenEdit, InjectClause>;

[[nodiscard]] std::optional<ToolFamily> family_of(ActionTemplate const& action) noexcept;

/// "stop", "char:<kind>:<slot>", "token:<kind>:<slot>" or "prompt:<kind>:<anchor>".
[[nodiscard]] std::string describe(ActionTemplate const& action);
[[nodiscard]] ActionTemplate parse_action(std::string_view descriptor);

/// Stop first, then 5x3 char typos, 4x4 token edits and 5x2 clause injections: 42 templates.
[[nodiscard]] std::vector<ActionTemplate> default_action_space();

inline constexpr std::size_t kFeatureCount = 14;
using StateFeatures = std::array<double, kFeatureCount>;

/// [objective one-hot(3), tool calls left fraction, char budget left fraction, token-count bucket one-hot
/// (<=5, 6-9, >=10), last tool family one-hot (none, char, token, prompt), last apply rejected, bias].
[[nodiscard]] StateFeatures featurize(Objective objective,
                                      EditBudget const& budget,
                                      Instruction const& instruction,
                                      std::optional<ToolFamily> last_family,
                                      bool last_rejected);

/// Sorted indices of the actions that may be sampled.
using ActionMask = std::vector<std::size_t>;

struct AttackerPolicy
{
    std::vector<double> weights; // feature-major, action-minor
    double temperature = 1.0;
    std::vector<ActionTemplate> action_space;
    std::string version = "redline-linear-1";

    /// All-zero weights over the default action space (the uniform policy).
    [[nodiscard]] static AttackerPolicy uniform(double temperature = 1.0);

    [[nodiscard]] std::size_t action_count() const noexcept { return action_space.size(); }
    [[nodiscard]] std::size_t stop_index() const;
    [[nodiscard]] double weight(std::size_t feature, std::size_t action) const
    {
        return weights[feature * action_space.size() + action];
    }

    /// Throws Error(InvalidArgument) when weights are non-finite, dimensions disagree, temperature <= 0, or
    /// Stop is missing.
    void validate() const;
};

struct SampledAction
{
    std::size_t index = 0;
    double log_prob = 0.0;
};

/// Probabilities over `mask`, in mask order.
[[nodiscard]] std::vector<double> action_probabilities(AttackerPolicy const& policy,
                                                       StateFeatures const& features,
                                                       ActionMask const& mask);

[[nodiscard]] double action_log_prob(AttackerPolicy const& policy,
                                     StateFeatures const& features,
                                     ActionMask const& mask,
                                     std::size_t action);

[[nodiscard]] SampledAction sample_action(AttackerPolicy const& policy,
                                          StateFeatures const& features,
                                          ActionMask const& mask,
                                          Rng& rng);

/// Adds coef * d/dweights log pi(action | features, mask) into `gradient` (same layout as weights).
void accumulate_log_prob_gradient(AttackerPolicy const& policy,
                                  StateFeatures const& features,
                                  ActionMask const& mask,
                                  std::size_t action,
                                  double coef,
                                  std::span<double> gradient);

void to_json(nlohmann::json& j, AttackerPolicy const& policy);
void from_json(nlohmann::json const& j, AttackerPolicy& policy);

[[nodiscard]] AttackerPolicy load_policy(std::filesystem::path const& path);
void save_policy(AttackerPolicy const& policy, std::filesystem::path const& path);

} // namespace redline
