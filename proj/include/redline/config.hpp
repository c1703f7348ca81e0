// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: one JSON document holding every tunable default. Absent keys keep their built-in value.

#include <redline/deskworld.hpp>
#include <redline/grpo.hpp>
#include <redline/instruction.hpp>
#include <redline/reward.hpp>
#include <redline/toolbox.hpp>
#include <redline/victim.hpp>

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace redline
{

struct RunConfig
{
    EditBudget budget;
    RewardConfig reward;
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
    DeskWorldConfig deskworld;
    RemoteOptions remote;
    std::string suite_path = "suites/desk";
    std::size_t eval_episodes = 8;
    std::size_t workers = 1;

    /// Training options seeded from this configuration.
    [[nodiscard]] TrainOptions train_options(Objective objective, std::uint64_t seed) const;
};

void to_json(nlohmann::json& j, RunConfig const& config);
/// Throws Error(InvalidArgument) on type errors or out-of-range values.
void from_json(nlohmann::json const& j, RunConfig& config);

[[nodiscard]] RunConfig load_config(std::filesystem::path const& path);

} // namespace redline
