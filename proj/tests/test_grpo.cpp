// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <redline/error.hpp>
#include <redline/grpo.hpp>

#include <cmath>
#include <numeric>

#include <doctest.h>

using namespace redline;

namespace
{

void check_all_close(std::vector<double> const& got, std::vector<double> const& want, double tol)
{
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(std::abs(got[i] - want[i]) <= tol);
}

double sum(std::vector<double> const& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0);
}

} // namespace

TEST_SUITE("grpo")
{
    TEST_CASE("advantage examples")
    {
        check_all_close(compute_advantages(std::vector<double> { 1, 1, 1, 1 }), { 0, 0, 0, 0 }, 0.0);
        check_all_close(compute_advantages(std::vector<double> { 0, 1 }), { -1, 1 }, 1e-7);
        check_all_close(compute_advantages(std::vector<double> { 1, 0, 1, 0 }), { 1, -1, 1, -1 }, 1e-7);
        CHECK_THROWS_AS((void) compute_advantages(std::vector<double> { 1 }), Error);
    }

    TEST_CASE("advantages sum to zero")
    {
        Rng rng(8);
        for (int trial = 0; trial < 200; ++trial)
        {
            std::vector<double> rewards(2 + uniform_index(rng, 15));
            for (auto& r: rewards)
                r = uniform01(rng) * 2.5 - 1.0;
            CHECK(std::abs(sum(compute_advantages(rewards))) <= 1e-6 * static_cast<double>(rewards.size()));
        }
    }

    TEST_CASE("sample_group shares one baseline execution")
    {
        auto const suite = generate_desk_suite(7, 12, 6);
        EpisodeConfig config;
        config.victim = make_victim({});
        config.seed = 3;
        BaselineCache cache;
        auto const group = sample_group(AttackerPolicy::uniform(), suite.at("s1"), config, 8, 42, cache, 4);
        CHECK(group.episodes.size() == 8);
        CHECK(cache.executions() == 1);
        for (auto const& e: group.episodes)
        {
            CHECK(e.base == group.episodes.front().base);
            CHECK(e.scenario_id == "s1");
        }
        auto const again = sample_group(AttackerPolicy::uniform(), suite.at("s1"), config, 8, 42, cache, 1);
        CHECK(again.episodes == group.episodes);
        CHECK_THROWS_AS((void) sample_group(AttackerPolicy::uniform(), suite.at("s1"), config, 1, 42, cache), Error);
    }

    TEST_CASE("a near-deterministic policy yields identical members and zero advantages")
    {
        auto policy = AttackerPolicy::uniform(1e-4);
        auto const suite = generate_desk_suite(7, 12, 6);
        // Strongly prefer the object-noun replacement, then Stop once it is masked out by the spent budget.
        auto const space = default_action_space();
        auto const swap = static_cast<std::size_t>(
            std::find(space.begin(), space.end(), ActionTemplate { TokenEdit { TokenEditKind::Replace, Slot::ObjectNoun } })
            - space.begin());
        policy.weights[13 * space.size() + swap] = 1.0;
        policy.weights[13 * space.size() + policy.stop_index()] = 0.5;
        policy.weights[10 * space.size() + policy.stop_index()] = 1.0; // after a token edit, stop
        EpisodeConfig config;
        config.victim = make_victim({});
        BaselineCache cache;
        auto const group = sample_group(policy, suite.at("s1"), config, 4, 1, cache);
        for (auto const& e: group.episodes)
            CHECK(e.perturbed_instruction == group.episodes.front().perturbed_instruction);
        std::vector<double> rewards;
        for (auto const& e: group.episodes)
            rewards.push_back(e.reward.total);
        for (auto a: compute_advantages(rewards))
            CHECK(a == 0.0);
    }

    TEST_CASE("uniform rewards leave the policy unchanged")
    {
        Rng rng(9);
        auto const policy = support::random_policy(rng, 0.5);
        auto groups = support::sample_groups(policy, Objective::TaskFailure, 3, 4, 5);
        for (auto& g: groups)
            for (auto& e: g.episodes)
                e.reward.total = 0.25;
        auto const updated = grpo_update(policy, groups, GrpoOptions { .learning_rate = 0.5 });
        CHECK(updated.weights == policy.weights);
    }

    TEST_CASE("surrogate gradient matches finite differences")
    {
        Rng rng(10);
        auto const behavior = support::random_policy(rng, 0.5);
        auto const groups = support::sample_groups(behavior, Objective::ActionInflation, 4, 6, 11);
        for (int point = 0; point < 5; ++point)
        {
            auto probe = behavior;
            std::normal_distribution<double> nudge(0.0, 0.05);
            for (auto& w: probe.weights)
                w += nudge(rng);
            auto const analytic = surrogate_gradient(probe, groups, 0.2);
            auto const numeric = support::finite_difference_gradient(probe, groups, 0.2);
            CHECK(support::relative_error(analytic, numeric) < 1e-4);
        }
    }

    TEST_CASE("single-epoch update at the behavior policy is REINFORCE with a group baseline")
    {
        Rng rng(12);
        auto const policy = support::random_policy(rng, 0.3);
        auto const groups = support::sample_groups(policy, Objective::TaskFailure, 3, 8, 13);
        std::vector<double> reinforce(policy.weights.size());
        std::size_t steps = 0;
        for (auto const& g: groups)
        {
            std::vector<double> rewards;
            for (auto const& e: g.episodes)
                rewards.push_back(e.reward.total);
            auto const adv = compute_advantages(rewards);
            for (std::size_t i = 0; i < g.episodes.size(); ++i)
                for (auto const& step: g.episodes[i].trajectory)
                {
                    accumulate_log_prob_gradient(policy, step.features, step.mask, step.action_id, adv[i], reinforce);
                    ++steps;
                }
        }
        for (auto& g: reinforce)
            g /= static_cast<double>(steps);
        CHECK(support::relative_error(surrogate_gradient(policy, groups, 0.2), reinforce) < 1e-12);
    }

    TEST_CASE("positive advantage raises the log-probability of its actions")
    {
        Rng rng(14);
        auto const policy = support::random_policy(rng, 0.3);
        auto groups = support::sample_groups(policy, Objective::TaskFailure, 1, 2, 15);
        auto& g = groups.front();
        g.episodes[0].reward.total = 1.0;
        g.episodes[1].reward.total = 0.0;
        auto const updated = grpo_update(policy, groups, GrpoOptions { .learning_rate = 1e-3 });
        double before = 0.0;
        double after = 0.0;
        for (auto const& step: g.episodes[0].trajectory)
        {
            before += action_log_prob(policy, step.features, step.mask, step.action_id);
            after += action_log_prob(updated, step.features, step.mask, step.action_id);
        }
        CHECK(after > before);
    }

    TEST_CASE("clipping zeroes the gradient outside the trust region")
    {
        Rng rng(16);
        auto const behavior = support::random_policy(rng, 0.3);
        auto groups = support::sample_groups(behavior, Objective::TaskFailure, 1, 2, 17);
        auto& g = groups.front();
        g.episodes[0].reward.total = 1.0;
        g.episodes[1].reward.total = 0.0;
        // Pretend the behavior policy was far less likely to take the recorded actions: every ratio is large.
        for (auto& e: g.episodes)
            for (auto& step: e.trajectory)
                step.log_prob -= 5.0;
        g.episodes[1].trajectory.clear();
        auto const grad = surrogate_gradient(behavior, groups, 0.2);
        for (auto v: grad)
            CHECK(v == 0.0);
    }

    TEST_CASE("stale trajectories are rejected")
    {
        Rng rng(18);
        auto const policy = support::random_policy(rng, 0.3);
        auto groups = support::sample_groups(policy, Objective::TaskFailure, 1, 2, 19);
        groups.front().episodes.front().trajectory.front().action_id = 99;
        CHECK_THROWS_AS((void) grpo_update(policy, groups), Error);
    }

    TEST_CASE("scripted attacker follows its script without exploration")
    {
        auto const s1 = canonical_s1();
        Rng rng(1);
        auto const tf = scripted_attacker(Objective::TaskFailure, s1, rng, 0.0);
        CHECK(tf == std::vector<ActionTemplate> { TokenEdit { TokenEditKind::Replace, Slot::ObjectNoun }, StopAction {} });
        auto const ai = scripted_attacker(Objective::ActionInflation, s1, rng, 0.0);
        CHECK(ai
              == std::vector<ActionTemplate> { InjectClause { ClauseKind::VerificationWrap, Anchor::Suffix },
                                               InjectClause { ClauseKind::UncertaintyClause, Anchor::Suffix },
                                               StopAction {} });
        auto const cv = scripted_attacker(Objective::ConstraintViolation, s1, rng, 0.0);
        CHECK(cv.back() == ActionTemplate { StopAction {} });
        CHECK(std::find(cv.begin(), cv.end(), ActionTemplate { CharTypo { CharEditKind::Substitution, Slot::ReceptacleNoun } })
              != cv.end());
    }

    TEST_CASE("scripted log-probabilities are exact under the exploration mixture")
    {
        auto const space = default_action_space();
        auto chooser = scripted_chooser(space, Objective::TaskFailure, 0.2);
        StateFeatures features {};
        auto const planned = static_cast<std::size_t>(
            std::find(space.begin(), space.end(), ActionTemplate { TokenEdit { TokenEditKind::Replace, Slot::ObjectNoun } })
            - space.begin());
        ActionMask const mask { 0, 1, 2, planned };
        Rng rng(20);
        auto const choice = chooser(features, mask, rng);
        auto const expected = choice.index == planned ? 0.8 + 0.2 / 4 : 0.2 / 4;
        CHECK(choice.log_prob == doctest::Approx(std::log(expected)));

        // Exploration fires roughly 20% of the time.
        std::size_t off_script = 0;
        for (int trial = 0; trial < 2000; ++trial)
        {
            auto fresh = scripted_chooser(space, Objective::TaskFailure, 0.2);
            off_script += fresh(features, mask, rng).index != planned;
        }
        CHECK(off_script > 200);
        CHECK(off_script < 400);
    }

    TEST_CASE("behavior cloning increases demonstration likelihood")
    {
        auto const suite = generate_desk_suite(7, 12, 6);
        auto const demos = collect_demonstrations(suite.split("train"), Objective::TaskFailure, 200, 3);
        std::vector<double> history;
        auto const policy = bc_coldstart(AttackerPolicy::uniform(), demos, 0.01, 50, &history);
        REQUIRE(history.size() == 51);
        for (std::size_t i = 1; i < history.size(); ++i)
            CHECK(history[i] >= history[i - 1]);
        CHECK(history.back() > history.front());
        CHECK(demonstration_log_likelihood(policy, demos) == doctest::Approx(history.back()));
        CHECK_THROWS_AS((void) bc_coldstart(AttackerPolicy::uniform(), {}, 0.01, 1), Error);
    }

    TEST_CASE("a repeated demonstration becomes the argmax")
    {
        auto const suite = generate_desk_suite(7, 12, 6);
        auto demos = collect_demonstrations({ suite.at("s1") }, Objective::ActionInflation, 1, 4, 0.0);
        demos = std::vector<Demonstration>(20, demos.front());
        auto const policy = bc_coldstart(AttackerPolicy::uniform(), demos, 0.5, 300);
        for (auto const& step: demos.front())
        {
            auto const probs = action_probabilities(policy, step.features, step.mask);
            auto const best = std::max_element(probs.begin(), probs.end()) - probs.begin();
            CHECK(step.mask[static_cast<std::size_t>(best)] == step.action_id);
        }
    }
}
