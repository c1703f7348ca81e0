// SPDX-License-Identifier: Apache-2.0
#pragma once

// One attack episode: cached clean baseline, a FIND->APPLY tool loop driven by an action source, the attack
// rollout on the final text, and the reward. Records serialize to one JSON object per log line.

#include <redline/instruction.hpp>
#include <redline/policy.hpp>
#include <redline/reward.hpp>
#include <redline/scenario.hpp>
#include <redline/toolbox.hpp>
#include <redline/victim.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace redline
{

struct EpisodeConfig
{
    Objective objective = Objective::TaskFailure;
    EditBudget budget; // template; used counters must be zero
    std::shared_ptr<Victim const> victim;
    std::uint64_t seed = 0; // victim seed, shared by every member of a group
    RewardConfig reward;
    ToolboxOptions toolbox;
};

struct TrajectoryStep
{
    StateFeatures features {};
    ActionMask mask;
    std::size_t action_id = 0;
    double log_prob = 0.0;
    bool rejected = false; // the invocation's FIND or APPLY was refused

    bool operator==(TrajectoryStep const&) const = default;
};

struct EpisodeRecord
{
    std::string scenario_id;
    Objective objective = Objective::TaskFailure;
    std::uint64_t seed = 0;
    std::uint64_t sampling_seed = 0;
    std::size_t max_steps = 0;
    std::size_t max_tool_calls = 0;
    std::size_t max_char_edits = 0;
    std::string clean_instruction;
    std::string perturbed_instruction;
    std::vector<EditRecord> edit_log;
    RolloutResult base;
    RolloutResult attack;
    std::size_t tool_calls_used = 0;
    std::size_t char_edits_used = 0;
    RewardBreakdown reward;
    std::vector<TrajectoryStep> trajectory;

    bool operator==(EpisodeRecord const&) const = default;
};

/// Throws Error(InvariantViolation) if the record breaks a budget, replay, or trajectory invariant.
void check_invariants(EpisodeRecord const& record);

void to_json(nlohmann::json& j, EpisodeRecord const& record);
void from_json(nlohmann::json const& j, EpisodeRecord& record);

/// Newline-delimited JSON, one record per line.
void write_episode_log(std::ostream& out, std::vector<EpisodeRecord> const& records);
[[nodiscard]] std::string episode_log_string(std::vector<EpisodeRecord> const& records);
/// Throws Error(CorruptLog) naming the 1-based line on parse or invariant failure. Blank lines are skipped.
[[nodiscard]] std::vector<EpisodeRecord> read_episode_log(std::istream& in);

/// Clean-instruction rollouts keyed by (victim identity, scenario id, seed). Concurrent readers are allowed;
/// two threads may compute the same key at once, and the first insertion wins.
class BaselineCache
{
  public:
    [[nodiscard]] RolloutResult get(Victim const& victim, Scenario const& scenario, std::uint64_t seed);
    [[nodiscard]] std::size_t executions() const;

  private:
    using Key = std::tuple<std::string, std::string, std::uint64_t>;
    mutable std::shared_mutex mutex_;
    std::map<Key, RolloutResult> entries_;
    std::size_t executions_ = 0;
};

/// Mutable state of the attack-construction loop.
struct AttackState
{
    Instruction instruction;
    EditBudget budget;
    std::optional<ToolFamily> last_family;
    bool last_rejected = false;
    std::size_t accepted_edits = 0;
};

/// Token index a slot resolves to in the current instruction, if any.
[[nodiscard]] std::optional<std::size_t> resolve_slot(Slot slot,
                                                      Scenario const& scenario,
                                                      Instruction const& instruction,
                                                      ToolboxOptions const& options = {});

/// Stop always; everything else only while tool calls remain and the template's slot resolves.
[[nodiscard]] ActionMask valid_actions(std::vector<ActionTemplate> const& action_space,
                                       Scenario const& scenario,
                                       AttackState const& state,
                                       ToolboxOptions const& options = {});

/// Runs one FIND->APPLY pair for `action`; throws Error when FIND or APPLY refuses.
[[nodiscard]] ApplyResult invoke_tool_chain(ActionTemplate const& action,
                                            Scenario const& scenario,
                                            Objective objective,
                                            Instruction const& instruction,
                                            EditBudget& budget,
                                            ToolboxOptions const& options = {});

/// Anything that picks the next action index; returns it with its behavior log-probability.
using ActionChooser = std::function<SampledAction(StateFeatures const&, ActionMask const&, Rng&)>;

struct AttackConstruction
{
    AttackState state;
    std::vector<TrajectoryStep> trajectory;
};

[[nodiscard]] AttackConstruction construct_attack(ActionChooser const& chooser,
                                                  std::vector<ActionTemplate> const& action_space,
                                                  Scenario const& scenario,
                                                  Objective objective,
                                                  EditBudget const& budget,
                                                  ToolboxOptions const& options,
                                                  Rng& rng);

/// One sampled action from the policy's softmax head.
[[nodiscard]] SampledAction step_agent(AttackerPolicy const& policy,
                                       StateFeatures const& features,
                                       ActionMask const& mask,
                                       Rng& rng);

[[nodiscard]] RolloutResult cached_baseline(BaselineCache& cache,
                                            Victim const& victim,
                                            Scenario const& scenario,
                                            std::uint64_t seed);

/// Full episode with an arbitrary action source (policy or scripted attacker).
[[nodiscard]] EpisodeRecord run_episode(ActionChooser const& chooser,
                                        std::vector<ActionTemplate> const& action_space,
                                        EpisodeConfig const& config,
                                        Scenario const& scenario,
                                        BaselineCache& cache,
                                        std::uint64_t sampling_seed);

[[nodiscard]] EpisodeRecord run_attack_episode(AttackerPolicy const& policy,
                                               EpisodeConfig const& config,
                                               Scenario const& scenario,
                                               BaselineCache& cache,
                                               std::uint64_t sampling_seed);

} // namespace redline
