// SPDX-License-Identifier: Apache-2.0
#include <redline/error.hpp>
#include <redline/grpo.hpp>
#include <redline/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace redline
{

namespace
{

/// Visits every recorded step with its episode's advantage.
template <typename Fn>
std::size_t for_each_step(std::span<RolloutGroup const> groups, double epsilon, Fn&& fn)
{
    std::size_t count = 0;
    for (auto const& group: groups)
    {
        std::vector<double> rewards;
        rewards.reserve(group.episodes.size());
        for (auto const& episode: group.episodes)
            rewards.push_back(episode.reward.total);
        auto const advantages = compute_advantages(rewards, epsilon);
        for (std::size_t i = 0; i < group.episodes.size(); ++i)
            for (auto const& step: group.episodes[i].trajectory)
            {
                fn(step, advantages[i]);
                ++count;
            }
    }
    return count;
}

void check_fresh(AttackerPolicy const& policy, TrajectoryStep const& step)
{
    if (step.action_id >= policy.action_count())
        throw Error(ErrorCode::StaleTrajectory, "action " + std::to_string(step.action_id) + " outside action space of "
                                                    + std::to_string(policy.action_count()));
}

} // namespace

std::vector<double> compute_advantages(std::span<double const> rewards, double epsilon)
{
    if (rewards.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "advantages need a group of at least two rewards");
    auto const n = static_cast<double>(rewards.size());
    auto const mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double variance = 0.0;
    for (auto r: rewards)
        variance += (r - mean) * (r - mean);
    auto const scale = std::sqrt(variance / n) + epsilon;
    std::vector<double> out;
    out.reserve(rewards.size());
    for (auto r: rewards)
        out.push_back((r - mean) / scale);
    return out;
}

RolloutGroup sample_group(AttackerPolicy const& policy,
                          Scenario const& scenario,
                          EpisodeConfig const& config,
                          std::size_t group_size,
                          std::uint64_t base_seed,
                          BaselineCache& cache,
                          std::size_t workers)
{
    if (group_size < 2)
        throw Error(ErrorCode::InvalidArgument, "group size must be at least 2");
    RolloutGroup group { scenario.id, group_size, std::vector<EpisodeRecord>(group_size) };
    // Resolve the shared baseline once before fanning out.
    (void) cached_baseline(cache, *config.victim, scenario, config.seed);
    parallel_for(group_size, workers, [&](std::size_t member) {
        group.episodes[member] = run_attack_episode(policy, config, scenario, cache, derive_seed(base_seed, member));
    });
    return group;
}

double surrogate_objective(AttackerPolicy const& policy,
                           std::span<RolloutGroup const> groups,
                           double clip_ratio,
                           double epsilon)
{
    double total = 0.0;
    auto const count = for_each_step(groups, epsilon, [&](TrajectoryStep const& step, double advantage) {
        check_fresh(policy, step);
        auto const ratio = std::exp(action_log_prob(policy, step.features, step.mask, step.action_id) - step.log_prob);
        auto const clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
        total += std::min(ratio * advantage, clipped * advantage);
    });
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

std::vector<double> surrogate_gradient(AttackerPolicy const& policy,
                                       std::span<RolloutGroup const> groups,
                                       double clip_ratio,
                                       double epsilon)
{
    std::vector<double> gradient(policy.weights.size(), 0.0);
    auto const count = for_each_step(groups, epsilon, [&](TrajectoryStep const& step, double advantage) {
        check_fresh(policy, step);
        if (advantage == 0.0)
            return;
        auto const ratio = std::exp(action_log_prob(policy, step.features, step.mask, step.action_id) - step.log_prob);
        // The clipped branch is flat once the ratio leaves the trust region in the advantage's direction.
        if ((advantage > 0.0 && ratio > 1.0 + clip_ratio) || (advantage < 0.0 && ratio < 1.0 - clip_ratio))
            return;
        accumulate_log_prob_gradient(policy, step.features, step.mask, step.action_id, ratio * advantage, gradient);
    });
    if (count > 0)
        for (auto& g: gradient)
            g /= static_cast<double>(count);
    return gradient;
}

AttackerPolicy grpo_update(AttackerPolicy policy, std::span<RolloutGroup const> groups, GrpoOptions const& options)
{
    for (std::size_t epoch = 0; epoch < std::max<std::size_t>(1, options.epochs); ++epoch)
    {
        auto const gradient = surrogate_gradient(policy, groups, options.clip_ratio, options.epsilon);
        for (std::size_t i = 0; i < gradient.size(); ++i)
            policy.weights[i] += options.learning_rate * gradient[i];
    }
    return policy;
}

std::vector<ActionTemplate> scripted_script(Objective objective)
{
    switch (objective)
    {
        case Objective::TaskFailure: return { TokenEdit { TokenEditKind::Replace, Slot::ObjectNoun }, StopAction {} };
        case Objective::ActionInflation:
            return { InjectClause { ClauseKind::VerificationWrap, Anchor::Suffix },
                     InjectClause { ClauseKind::UncertaintyClause, Anchor::Suffix }, StopAction {} };
        case Objective::ConstraintViolation:
            return { TokenEdit { TokenEditKind::Replace, Slot::SpatialModifier },
                     CharTypo { CharEditKind::Substitution, Slot::ReceptacleNoun }, StopAction {} };
    }
    return { StopAction {} };
}

ActionChooser scripted_chooser(std::vector<ActionTemplate> const& action_space, Objective objective, double exploration)
{
    std::vector<std::size_t> script;
    for (auto const& step: scripted_script(objective))
    {
        auto it = std::find(action_space.begin(), action_space.end(), step);
        if (it == action_space.end())
            throw Error(ErrorCode::InvalidArgument, "action space lacks scripted action " + describe(step));
        script.push_back(static_cast<std::size_t>(it - action_space.begin()));
    }
    auto const stop = script.back();
    auto cursor = std::make_shared<std::size_t>(0);
    return [script = std::move(script), stop, cursor, exploration](StateFeatures const&, ActionMask const& mask,
                                                                   Rng& rng) {
        auto planned = stop;
        while (*cursor < script.size())
        {
            auto const candidate = script[(*cursor)++];
            if (std::find(mask.begin(), mask.end(), candidate) != mask.end())
            {
                planned = candidate;
                break;
            }
        }
        auto chosen = planned;
        if (exploration > 0.0 && uniform01(rng) < exploration)
            chosen = mask[uniform_index(rng, mask.size())];
        auto const uniform_share = exploration / static_cast<double>(mask.size());
        auto const p = (chosen == planned ? 1.0 - exploration : 0.0) + uniform_share;
        return SampledAction { chosen, std::log(p) };
    };
}

std::vector<ActionTemplate> scripted_attacker(Objective objective,
                                              Scenario const& scenario,
                                              Rng& rng,
                                              double exploration,
                                              EditBudget const& budget,
                                              ToolboxOptions const& options)
{
    auto const space = default_action_space();
    auto const construction = construct_attack(scripted_chooser(space, objective, exploration), space, scenario,
                                               objective, budget, options, rng);
    std::vector<ActionTemplate> actions;
    for (auto const& step: construction.trajectory)
        actions.push_back(space[step.action_id]);
    return actions;
}

std::vector<Demonstration> collect_demonstrations(std::vector<Scenario> const& scenarios,
                                                  Objective objective,
                                                  std::size_t count,
                                                  std::uint64_t seed,
                                                  double exploration,
                                                  EditBudget const& budget,
                                                  ToolboxOptions const& options)
{
    if (scenarios.empty())
        throw Error(ErrorCode::InvalidArgument, "no scenarios for demonstrations");
    auto const space = default_action_space();
    std::vector<Demonstration> demos;
    demos.reserve(count);
    for (std::size_t d = 0; d < count; ++d)
    {
        Rng rng(derive_seed(seed, d));
        auto construction = construct_attack(scripted_chooser(space, objective, exploration), space,
                                             scenarios[d % scenarios.size()], objective, budget, options, rng);
        demos.push_back(std::move(construction.trajectory));
    }
    return demos;
}

double demonstration_log_likelihood(AttackerPolicy const& policy, std::vector<Demonstration> const& demonstrations)
{
    double total = 0.0;
    std::size_t count = 0;
    for (auto const& demo: demonstrations)
        for (auto const& step: demo)
        {
            total += action_log_prob(policy, step.features, step.mask, step.action_id);
            ++count;
        }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

AttackerPolicy bc_coldstart(AttackerPolicy policy,
                            std::vector<Demonstration> const& demonstrations,
                            double learning_rate,
                            std::size_t epochs,
                            std::vector<double>* history)
{
    std::size_t count = 0;
    for (auto const& demo: demonstrations)
        count += demo.size();
    if (count == 0)
        throw Error(ErrorCode::InvalidArgument, "behavior cloning needs at least one demonstration step");

    if (history)
        history->push_back(demonstration_log_likelihood(policy, demonstrations));
    std::vector<double> gradient(policy.weights.size());
    for (std::size_t epoch = 0; epoch < epochs; ++epoch)
    {
        std::fill(gradient.begin(), gradient.end(), 0.0);
        for (auto const& demo: demonstrations)
            for (auto const& step: demo)
                accumulate_log_prob_gradient(policy, step.features, step.mask, step.action_id, 1.0, gradient);
        for (std::size_t i = 0; i < gradient.size(); ++i)
            policy.weights[i] += learning_rate * gradient[i] / static_cast<double>(count);
        if (history)
            history->push_back(demonstration_log_likelihood(policy, demonstrations));
    }
    return policy;
}

TrainReport train_attacker(std::vector<Scenario> const& scenarios,
                           std::shared_ptr<Victim const> victim,
                           TrainOptions const& options,
                           IterationCallback const& on_iteration)
{
    if (scenarios.empty())
        throw Error(ErrorCode::InvalidArgument, "training needs at least one scenario");

    TrainReport report;
    report.policy = AttackerPolicy::uniform(options.temperature);
    if (options.coldstart)
    {
        auto const demos = collect_demonstrations(scenarios, options.objective, options.demonstrations,
                                                  derive_seed(options.seed, 0xC01D), options.exploration,
                                                  options.budget, options.toolbox);
        report.policy = bc_coldstart(std::move(report.policy), demos, options.bc_learning_rate, options.bc_epochs,
                                     &report.bc_log_likelihood);
    }

    auto const config = EpisodeConfig {
        .objective = options.objective,
        .budget = options.budget,
        .victim = std::move(victim),
        .seed = options.seed,
        .reward = options.reward,
        .toolbox = options.toolbox,
    };
    BaselineCache cache;
    for (std::size_t iteration = 0; iteration < options.iterations; ++iteration)
    {
        std::vector<RolloutGroup> groups(scenarios.size());
        auto const& snapshot = report.policy;
        parallel_for(scenarios.size(), options.workers, [&](std::size_t s) {
            auto const base_seed = derive_seed(options.seed, (iteration + 1) * 0x10000 + s);
            groups[s] = sample_group(snapshot, scenarios[s], config, options.group_size, base_seed, cache);
        });

        double sum = 0.0;
        std::size_t n = 0;
        for (auto const& group: groups)
            for (auto const& episode: group.episodes)
                sum += episode.reward.total, ++n;
        auto const mean = n == 0 ? 0.0 : sum / static_cast<double>(n);
        report.iteration_mean_reward.push_back(mean);

        report.policy = grpo_update(std::move(report.policy), groups, options.grpo);
        if (on_iteration)
            on_iteration(iteration, mean, report.policy);
    }
    return report;
}

std::vector<EpisodeRecord> evaluate_policy(AttackerPolicy const& policy,
                                           std::vector<Scenario> const& scenarios,
                                           EpisodeConfig const& config,
                                           std::size_t episodes_per_scenario,
                                           std::uint64_t seed,
                                           BaselineCache& cache,
                                           std::size_t workers)
{
    std::vector<EpisodeRecord> records(scenarios.size() * episodes_per_scenario);
    parallel_for(records.size(), workers, [&](std::size_t i) {
        auto const s = i / episodes_per_scenario;
        records[i] = run_attack_episode(policy, config, scenarios[s], cache, derive_seed(seed, i));
    });
    return records;
}

double mean_total_reward(std::vector<EpisodeRecord> const& records)
{
    if (records.empty())
        return 0.0;
    double sum = 0.0;
    for (auto const& r: records)
        sum += r.reward.total;
    return sum / static_cast<double>(records.size());
}

} // namespace redline
