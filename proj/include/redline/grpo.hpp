// SPDX-License-Identifier: Apache-2.0
#pragma once

// Group-relative policy optimization for the attacker policy, plus the scripted cold-start attacker and
// behavior cloning.

#include <redline/episode.hpp>
#include <redline/policy.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace redline
{

struct RolloutGroup
{
    std::string scenario_id;
    std::size_t group_size = 0;
    std::vector<EpisodeRecord> episodes;
};

/// A_i = (r_i - mean) / (population std + epsilon). Requires at least two rewards.
[[nodiscard]] std::vector<double> compute_advantages(std::span<double const> rewards, double epsilon = 1e-8);

/// G episodes on one scenario with member streams derived from (base_seed, member index). All members share
/// the cached baseline for config.seed.
[[nodiscard]] RolloutGroup sample_group(AttackerPolicy const& policy,
                                        Scenario const& scenario,
                                        EpisodeConfig const& config,
                                        std::size_t group_size,
                                        std::uint64_t base_seed,
                                        BaselineCache& cache,
                                        std::size_t workers = 1);

struct GrpoOptions
{
    double learning_rate = 0.05;
    double clip_ratio = 0.2;
    std::size_t epochs = 1;
    double epsilon = 1e-8;
};

/// Mean over every trajectory step of min(rho * A, clip(rho, 1 - c, 1 + c) * A), where rho is the ratio of
/// the current policy's probability to the recorded behavior probability.
[[nodiscard]] double surrogate_objective(AttackerPolicy const& policy,
                                         std::span<RolloutGroup const> groups,
                                         double clip_ratio,
                                         double epsilon = 1e-8);

/// Analytic gradient of surrogate_objective with respect to the policy weights.
[[nodiscard]] std::vector<double> surrogate_gradient(AttackerPolicy const& policy,
                                                     std::span<RolloutGroup const> groups,
                                                     double clip_ratio,
                                                     double epsilon = 1e-8);

/// `epochs` gradient-ascent steps on the surrogate. Throws Error(StaleTrajectory) when a recorded action
/// lies outside the policy's action space.
[[nodiscard]] AttackerPolicy grpo_update(AttackerPolicy policy,
                                         std::span<RolloutGroup const> groups,
                                         GrpoOptions const& options = {});

/// Objective-conditioned heuristic script, each step replaced by a uniform valid action with probability
/// `exploration`. Returned log-probabilities are exact under that mixture.
[[nodiscard]] ActionChooser scripted_chooser(std::vector<ActionTemplate> const& action_space,
                                             Objective objective,
                                             double exploration = 0.2);

[[nodiscard]] std::vector<ActionTemplate> scripted_script(Objective objective);

/// Templates the scripted attacker issues on `scenario`, ending with Stop.
[[nodiscard]] std::vector<ActionTemplate> scripted_attacker(Objective objective,
                                                            Scenario const& scenario,
                                                            Rng& rng,
                                                            double exploration = 0.2,
                                                            EditBudget const& budget = {},
                                                            ToolboxOptions const& options = {});

using Demonstration = std::vector<TrajectoryStep>;

/// `count` scripted trajectories cycling over `scenarios`.
[[nodiscard]] std::vector<Demonstration> collect_demonstrations(std::vector<Scenario> const& scenarios,
                                                                Objective objective,
                                                                std::size_t count,
                                                                std::uint64_t seed,
                                                                double exploration = 0.2,
                                                                EditBudget const& budget = {},
                                                                ToolboxOptions const& options = {});

/// Mean log-probability of the demonstrated actions.
[[nodiscard]] double demonstration_log_likelihood(AttackerPolicy const& policy,
                                                  std::vector<Demonstration> const& demonstrations);

/// Full-batch gradient ascent on the demonstration log-likelihood. `history`, when given, receives the
/// log-likelihood before the first epoch and after each epoch.
[[nodiscard]] AttackerPolicy bc_coldstart(AttackerPolicy policy,
                                          std::vector<Demonstration> const& demonstrations,
                                          double learning_rate,
                                          std::size_t epochs,
                                          std::vector<double>* history = nullptr);

struct TrainOptions
{
    Objective objective = Objective::TaskFailure;
    RewardConfig reward;
    EditBudget budget;
    ToolboxOptions toolbox;
    GrpoOptions grpo;
    std::size_t group_size = 8;
    std::size_t iterations = 30;
    bool coldstart = true;
    std::size_t demonstrations = 240;
    double bc_learning_rate = 0.5;
    std::size_t bc_epochs = 60;
    double exploration = 0.2;
    double temperature = 1.0;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

struct TrainReport
{
    AttackerPolicy policy;
    std::vector<double> bc_log_likelihood;
    std::vector<double> iteration_mean_reward;
};

using IterationCallback = std::function<void(std::size_t iteration, double mean_reward, AttackerPolicy const&)>;

/// Cold-start BC (optional) followed by GRPO iterations; each iteration samples one group per scenario.
[[nodiscard]] TrainReport train_attacker(std::vector<Scenario> const& scenarios,
                                         std::shared_ptr<Victim const> victim,
                                         TrainOptions const& options,
                                         IterationCallback const& on_iteration = {});

/// `episodes_per_scenario` sampled episodes per scenario; deterministic for a given seed.
[[nodiscard]] std::vector<EpisodeRecord> evaluate_policy(AttackerPolicy const& policy,
                                                         std::vector<Scenario> const& scenarios,
                                                         EpisodeConfig const& config,
                                                         std::size_t episodes_per_scenario,
                                                         std::uint64_t seed,
                                                         BaselineCache& cache,
                                                         std::size_t workers = 1);

[[nodiscard]] double mean_total_reward(std::vector<EpisodeRecord> const& records);

} // namespace redline
