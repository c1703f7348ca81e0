// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace redline
{

struct Cell
{
    int x = 0;
    int y = 0;

    auto operator<=>(Cell const&) const = default;
};

struct SceneObject
{
    std::string object_id;
    std::string name;
    std::string color;
    Cell cell;

    bool operator==(SceneObject const&) const = default;
};

struct Receptacle
{
    std::string name;
    Cell cell;

    bool operator==(Receptacle const&) const = default;
};

struct Goal
{
    std::string object_id;
    std::string receptacle;

    bool operator==(Goal const&) const = default;
};

struct Scenario
{
    std::string id;
    int grid_w = 8;
    int grid_h = 8;
    Cell robot_start;
    std::vector<SceneObject> objects;
    std::vector<Receptacle> receptacles;
    std::vector<Cell> obstacles;
    Goal goal;
    std::size_t max_steps = 256;
    std::string clean_instruction;

    bool operator==(Scenario const&) const = default;

    [[nodiscard]] SceneObject const* find_object(std::string_view object_id) const;
    [[nodiscard]] Receptacle const* find_receptacle(std::string_view name) const;
};

/// Throws Error(InvalidScenario) when a cell is out of bounds, object/receptacle cells collide, or the goal
/// references something missing.
void validate(Scenario const& scenario);

void to_json(nlohmann::json& j, Cell const& cell);
void from_json(nlohmann::json const& j, Cell& cell);
void to_json(nlohmann::json& j, Scenario const& scenario);
void from_json(nlohmann::json const& j, Scenario& scenario);

[[nodiscard]] Scenario load_scenario(std::filesystem::path const& path);
void save_scenario(Scenario const& scenario, std::filesystem::path const& path);

/// Split membership plus optional named suites used to group report rows.
struct SuiteManifest
{
    std::string name;
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::map<std::string, std::vector<std::string>> suites;

    /// Suite name for a scenario id; throws Error(UnknownSuite).
    [[nodiscard]] std::string const& suite_of(std::string const& scenario_id) const;
};

void to_json(nlohmann::json& j, SuiteManifest const& manifest);
void from_json(nlohmann::json const& j, SuiteManifest& manifest);

[[nodiscard]] SuiteManifest load_manifest(std::filesystem::path const& path);

struct Suite
{
    SuiteManifest manifest;
    std::map<std::string, Scenario> scenarios;

    [[nodiscard]] Scenario const& at(std::string const& id) const;
    [[nodiscard]] std::vector<Scenario> split(std::string_view which) const; // "train", "test" or "all"
};

/// Loads manifest.json and every *.json scenario file it references from `dir`.
[[nodiscard]] Suite load_suite(std::filesystem::path const& dir);
void save_suite(Suite const& suite, std::filesystem::path const& dir);

/// The canonical scenario S1: 8x8, robot (0,0), mug_red (2,0), bowl_blue (4,0), shelf (6,0).
[[nodiscard]] Scenario canonical_s1();

/// Deterministic family of S1-like pick-and-place scenarios. Every scenario's clean instruction parses
/// without hesitation and succeeds under the default DeskWorld dynamics.
[[nodiscard]] Suite generate_desk_suite(std::uint64_t seed, std::size_t train_count, std::size_t test_count);

} // namespace redline
