// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures for unit and acceptance tests.

#include <redline/grpo.hpp>
#include <redline/random.hpp>
#include <redline/scenario.hpp>

#include <cmath>
#include <vector>

namespace support
{

/// Policy over the default action space with weights drawn from N(0, scale^2).
inline redline::AttackerPolicy random_policy(redline::Rng& rng, double scale, double temperature = 1.0)
{
    auto policy = redline::AttackerPolicy::uniform(temperature);
    std::normal_distribution<double> normal(0.0, scale);
    for (auto& w: policy.weights)
        w = normal(rng);
    return policy;
}

/// Groups sampled by `policy` on the first `scenarios` training scenarios of a generated suite.
inline std::vector<redline::RolloutGroup> sample_groups(redline::AttackerPolicy const& policy,
                                                        redline::Objective objective,
                                                        std::size_t scenarios,
                                                        std::size_t group_size,
                                                        std::uint64_t seed)
{
    auto const suite = redline::generate_desk_suite(7, 12, 6);
    auto const train = suite.split("train");
    redline::EpisodeConfig config;
    config.objective = objective;
    config.victim = redline::make_victim({});
    config.seed = seed;
    redline::BaselineCache cache;
    std::vector<redline::RolloutGroup> groups;
    for (std::size_t s = 0; s < scenarios && s < train.size(); ++s)
        groups.push_back(redline::sample_group(policy, train[s], config, group_size, redline::derive_seed(seed, s), cache));
    return groups;
}

/// Central finite-difference gradient of the surrogate objective.
inline std::vector<double> finite_difference_gradient(redline::AttackerPolicy const& policy,
                                                      std::vector<redline::RolloutGroup> const& groups,
                                                      double clip_ratio,
                                                      double h = 1e-6)
{
    std::vector<double> out(policy.weights.size());
    auto probe = policy;
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        auto const keep = probe.weights[i];
        probe.weights[i] = keep + h;
        auto const up = redline::surrogate_objective(probe, groups, clip_ratio);
        probe.weights[i] = keep - h;
        auto const down = redline::surrogate_objective(probe, groups, clip_ratio);
        probe.weights[i] = keep;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

/// ||a - b|| / max(||b||, floor).
inline double relative_error(std::vector<double> const& a, std::vector<double> const& b, double floor = 1e-12)
{
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        norm += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(norm), floor);
}

} // namespace support
