// SPDX-License-Identifier: Apache-2.0
#include <redline/config.hpp>
#include <redline/error.hpp>

#include <fstream>

#include <nlohmann/json.hpp>

namespace redline
{

TrainOptions RunConfig::train_options(Objective objective, std::uint64_t seed) const
{
    TrainOptions options;
    options.objective = objective;
    options.reward = reward;
    options.budget = budget;
    options.toolbox = toolbox;
    options.grpo = grpo;
    options.group_size = group_size;
    options.iterations = iterations;
    options.coldstart = coldstart;
    options.demonstrations = demonstrations;
    options.bc_learning_rate = bc_learning_rate;
    options.bc_epochs = bc_epochs;
    options.exploration = exploration;
    options.temperature = temperature;
    options.seed = seed;
    options.workers = workers;
    return options;
}

void to_json(nlohmann::json& j, RunConfig const& c)
{
    j = nlohmann::json {
        { "budget",
          { { "max_char_edits", c.budget.max_char_edits },
            { "max_tool_calls", c.budget.max_tool_calls },
            { "max_added_tokens_per_inject", c.budget.max_added_tokens_per_inject } } },
        { "reward", c.reward },
        { "toolbox",
          { { "stop_words", c.toolbox.stop_words }, { "attribute_vocabulary", c.toolbox.attribute_vocabulary } } },
        { "grpo",
          { { "learning_rate", c.grpo.learning_rate },
            { "clip_ratio", c.grpo.clip_ratio },
            { "epochs", c.grpo.epochs },
            { "epsilon", c.grpo.epsilon },
            { "group_size", c.group_size },
            { "iterations", c.iterations } } },
        { "coldstart",
          { { "enabled", c.coldstart },
            { "demonstrations", c.demonstrations },
            { "learning_rate", c.bc_learning_rate },
            { "epochs", c.bc_epochs },
            { "exploration", c.exploration } } },
        { "policy", { { "temperature", c.temperature } } },
        { "victim",
          { { "hesitation_cost", c.deskworld.hesitation_cost },
            { "parse_overhead", c.deskworld.parse_overhead },
            { "timeout_ms", c.remote.timeout.count() },
            { "max_connections", c.remote.max_connections } } },
        { "suite_path", c.suite_path },
        { "eval", { { "episodes_per_scenario", c.eval_episodes } } },
        { "workers", c.workers },
    };
    if (c.toolbox.char_site_cap != ToolboxOptions {}.char_site_cap)
        j["toolbox"]["char_site_cap"] = c.toolbox.char_site_cap;
}

namespace
{

template <typename T>
void read(nlohmann::json const& section, char const* key, T& target)
{
    if (section.contains(key))
        target = section.at(key).get<T>();
}

nlohmann::json const& section(nlohmann::json const& j, char const* key)
{
    static nlohmann::json const empty = nlohmann::json::object();
    return j.contains(key) ? j.at(key) : empty;
}

} // namespace

void from_json(nlohmann::json const& j, RunConfig& c)
{
    try
    {
        auto const& budget = section(j, "budget");
        read(budget, "max_char_edits", c.budget.max_char_edits);
        read(budget, "max_tool_calls", c.budget.max_tool_calls);
        read(budget, "max_added_tokens_per_inject", c.budget.max_added_tokens_per_inject);
        if (j.contains("reward"))
            c.reward = j.at("reward").get<RewardConfig>();

        auto const& toolbox = section(j, "toolbox");
        read(toolbox, "char_site_cap", c.toolbox.char_site_cap);
        read(toolbox, "stop_words", c.toolbox.stop_words);
        read(toolbox, "attribute_vocabulary", c.toolbox.attribute_vocabulary);

        auto const& grpo = section(j, "grpo");
        read(grpo, "learning_rate", c.grpo.learning_rate);
        read(grpo, "clip_ratio", c.grpo.clip_ratio);
        read(grpo, "epochs", c.grpo.epochs);
        read(grpo, "epsilon", c.grpo.epsilon);
        read(grpo, "group_size", c.group_size);
        read(grpo, "iterations", c.iterations);

        auto const& cold = section(j, "coldstart");
        read(cold, "enabled", c.coldstart);
        read(cold, "demonstrations", c.demonstrations);
        read(cold, "learning_rate", c.bc_learning_rate);
        read(cold, "epochs", c.bc_epochs);
        read(cold, "exploration", c.exploration);

        read(section(j, "policy"), "temperature", c.temperature);

        auto const& victim = section(j, "victim");
        read(victim, "hesitation_cost", c.deskworld.hesitation_cost);
        read(victim, "parse_overhead", c.deskworld.parse_overhead);
        if (victim.contains("timeout_ms"))
            c.remote.timeout = std::chrono::milliseconds(victim.at("timeout_ms").get<std::int64_t>());
        read(victim, "max_connections", c.remote.max_connections);

        read(j, "suite_path", c.suite_path);
        read(section(j, "eval"), "episodes_per_scenario", c.eval_episodes);
        read(j, "workers", c.workers);
    }
    catch (nlohmann::json::exception const& e)
    {
        throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }

    if (c.budget.max_char_edits < 1 || c.budget.max_tool_calls < 1)
        throw Error(ErrorCode::InvalidArgument, "config: budget caps must be at least 1");
    if (c.group_size < 2)
        throw Error(ErrorCode::InvalidArgument, "config: grpo.group_size must be at least 2");
    if (!(c.temperature > 0.0))
        throw Error(ErrorCode::InvalidArgument, "config: policy.temperature must be positive");
    if (!(c.grpo.clip_ratio > 0.0 && c.grpo.clip_ratio < 1.0))
        throw Error(ErrorCode::InvalidArgument, "config: grpo.clip_ratio must lie in (0, 1)");
    if (c.exploration < 0.0 || c.exploration > 1.0)
        throw Error(ErrorCode::InvalidArgument, "config: coldstart.exploration must lie in [0, 1]");
    if (c.remote.max_connections < 1)
        throw Error(ErrorCode::InvalidArgument, "config: victim.max_connections must be at least 1");
    validate(c.reward);
}

RunConfig load_config(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::InvalidArgument, "cannot open config " + path.string());
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw Error(ErrorCode::InvalidArgument, "config " + path.string() + ": " + e.what());
    }
    return j.get<RunConfig>();
}

} // namespace redline
