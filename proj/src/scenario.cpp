// SPDX-License-Identifier: Apache-2.0
#include <redline/deskworld.hpp>
#include <redline/error.hpp>
#include <redline/random.hpp>
#include <redline/scenario.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace redline
{

using nlohmann::json;

SceneObject const* Scenario::find_object(std::string_view object_id) const
{
    for (auto const& object: objects)
        if (object.object_id == object_id)
            return &object;
    return nullptr;
}

Receptacle const* Scenario::find_receptacle(std::string_view name) const
{
    for (auto const& receptacle: receptacles)
        if (receptacle.name == name)
            return &receptacle;
    return nullptr;
}

void validate(Scenario const& scenario)
{
    auto const fail = [&](std::string const& why) {
        throw Error(ErrorCode::InvalidScenario, scenario.id + ": " + why);
    };
    if (scenario.id.empty())
        fail("empty id");
    if (scenario.grid_w <= 0 || scenario.grid_h <= 0)
        fail("grid must be non-empty");
    auto const in_bounds = [&](Cell c) {
        return c.x >= 0 && c.y >= 0 && c.x < scenario.grid_w && c.y < scenario.grid_h;
    };
    if (!in_bounds(scenario.robot_start))
        fail("robot_start out of bounds");

    std::set<Cell> used;
    std::set<std::string> ids;
    for (auto const& object: scenario.objects)
    {
        if (!in_bounds(object.cell))
            fail("object " + object.object_id + " out of bounds");
        if (!used.insert(object.cell).second)
            fail("object " + object.object_id + " shares a cell");
        if (!ids.insert(object.object_id).second)
            fail("duplicate object id " + object.object_id);
        if (object.name.empty())
            fail("object " + object.object_id + " has no name");
    }
    for (auto const& receptacle: scenario.receptacles)
    {
        if (!in_bounds(receptacle.cell))
            fail("receptacle " + receptacle.name + " out of bounds");
        if (!used.insert(receptacle.cell).second)
            fail("receptacle " + receptacle.name + " shares a cell");
    }
    for (auto const& obstacle: scenario.obstacles)
        if (!in_bounds(obstacle))
            fail("obstacle out of bounds");
    if (!scenario.find_object(scenario.goal.object_id))
        fail("goal object " + scenario.goal.object_id + " missing");
    if (!scenario.find_receptacle(scenario.goal.receptacle))
        fail("goal receptacle " + scenario.goal.receptacle + " missing");
}

void to_json(json& j, Cell const& cell)
{
    j = json::array({ cell.x, cell.y });
}

void from_json(json const& j, Cell& cell)
{
    if (!j.is_array() || j.size() != 2)
        throw Error(ErrorCode::InvalidScenario, "cell must be [x, y]");
    cell = Cell { j.at(0).get<int>(), j.at(1).get<int>() };
}

void to_json(json& j, Scenario const& s)
{
    auto objects = json::array();
    for (auto const& o: s.objects)
        objects.push_back({ { "object_id", o.object_id }, { "name", o.name }, { "color", o.color }, { "cell", o.cell } });
    auto receptacles = json::array();
    for (auto const& r: s.receptacles)
        receptacles.push_back({ { "name", r.name }, { "cell", r.cell } });
    j = json {
        { "id", s.id },
        { "grid_w", s.grid_w },
        { "grid_h", s.grid_h },
        { "robot_start", s.robot_start },
        { "objects", objects },
        { "receptacles", receptacles },
        { "obstacles", s.obstacles },
        { "goal", { { "object_id", s.goal.object_id }, { "receptacle", s.goal.receptacle } } },
        { "max_steps", s.max_steps },
        { "clean_instruction", s.clean_instruction },
    };
}

void from_json(json const& j, Scenario& s)
{
    try
    {
        s.id = j.at("id").get<std::string>();
        s.grid_w = j.value("grid_w", 8);
        s.grid_h = j.value("grid_h", 8);
        s.robot_start = j.at("robot_start").get<Cell>();
        s.objects.clear();
        for (auto const& o: j.at("objects"))
            s.objects.push_back(SceneObject { o.at("object_id").get<std::string>(), o.at("name").get<std::string>(),
                                              o.at("color").get<std::string>(), o.at("cell").get<Cell>() });
        s.receptacles.clear();
        for (auto const& r: j.at("receptacles"))
            s.receptacles.push_back(Receptacle { r.at("name").get<std::string>(), r.at("cell").get<Cell>() });
        s.obstacles = j.value("obstacles", std::vector<Cell> {});
        s.goal = Goal { j.at("goal").at("object_id").get<std::string>(),
                        j.at("goal").at("receptacle").get<std::string>() };
        s.max_steps = j.value("max_steps", std::size_t { 256 });
        s.clean_instruction = j.at("clean_instruction").get<std::string>();
    }
    catch (json::exception const& e)
    {
        throw Error(ErrorCode::InvalidScenario, e.what());
    }
    validate(s);
}

Scenario load_scenario(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::InvalidScenario, "cannot open " + path.string());
    try
    {
        return json::parse(in).get<Scenario>();
    }
    catch (json::parse_error const& e)
    {
        throw Error(ErrorCode::InvalidScenario, path.string() + ": " + e.what());
    }
}

void save_scenario(Scenario const& scenario, std::filesystem::path const& path)
{
    std::ofstream out(path);
    out << json(scenario).dump(2) << '\n';
}

std::string const& SuiteManifest::suite_of(std::string const& scenario_id) const
{
    for (auto const& [suite, ids]: suites)
        if (std::find(ids.begin(), ids.end(), scenario_id) != ids.end())
            return suite;
    if (suites.empty()
        && (std::find(train.begin(), train.end(), scenario_id) != train.end()
            || std::find(test.begin(), test.end(), scenario_id) != test.end()))
        return name;
    throw Error(ErrorCode::UnknownSuite, scenario_id);
}

void to_json(json& j, SuiteManifest const& m)
{
    j = json { { "name", m.name }, { "train", m.train }, { "test", m.test }, { "suites", m.suites } };
}

void from_json(json const& j, SuiteManifest& m)
{
    m.name = j.value("name", std::string("suite"));
    m.train = j.value("train", std::vector<std::string> {});
    m.test = j.value("test", std::vector<std::string> {});
    m.suites = j.value("suites", std::map<std::string, std::vector<std::string>> {});
}

SuiteManifest load_manifest(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::InvalidArgument, "cannot open manifest " + path.string());
    try
    {
        return json::parse(in).get<SuiteManifest>();
    }
    catch (json::exception const& e)
    {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

Scenario const& Suite::at(std::string const& id) const
{
    auto it = scenarios.find(id);
    if (it == scenarios.end())
        throw Error(ErrorCode::InvalidArgument, "scenario " + id + " not in suite " + manifest.name);
    return it->second;
}

std::vector<Scenario> Suite::split(std::string_view which) const
{
    std::vector<std::string> ids;
    if (which == "train" || which == "all")
        ids.insert(ids.end(), manifest.train.begin(), manifest.train.end());
    if (which == "test" || which == "all")
        ids.insert(ids.end(), manifest.test.begin(), manifest.test.end());
    if (which != "train" && which != "test" && which != "all")
        throw Error(ErrorCode::InvalidArgument, "split must be train, test or all");
    std::vector<Scenario> out;
    for (auto const& id: ids)
        out.push_back(at(id));
    return out;
}

Suite load_suite(std::filesystem::path const& dir)
{
    Suite suite;
    suite.manifest = load_manifest(dir / "manifest.json");
    for (auto const* ids: { &suite.manifest.train, &suite.manifest.test })
        for (auto const& id: *ids)
        {
            auto scenario = load_scenario(dir / (id + ".json"));
            if (scenario.id != id)
                throw Error(ErrorCode::InvalidScenario, "file " + id + ".json declares id " + scenario.id);
            suite.scenarios.emplace(id, std::move(scenario));
        }
    return suite;
}

void save_suite(Suite const& suite, std::filesystem::path const& dir)
{
    std::filesystem::create_directories(dir);
    for (auto const& [id, scenario]: suite.scenarios)
        save_scenario(scenario, dir / (id + ".json"));
    std::ofstream out(dir / "manifest.json");
    out << json(suite.manifest).dump(2) << '\n';
}

Scenario canonical_s1()
{
    return Scenario {
        .id = "s1",
        .grid_w = 8,
        .grid_h = 8,
        .robot_start = { 0, 0 },
        .objects = { { "mug_red", "mug", "red", { 2, 0 } }, { "bowl_blue", "bowl", "blue", { 4, 0 } } },
        .receptacles = { { "shelf", { 6, 0 } } },
        .obstacles = {},
        .goal = { "mug_red", "shelf" },
        .max_steps = 256,
        .clean_instruction = "put the red mug on the shelf",
    };
}

namespace
{

constexpr std::string_view kObjectNames[] = { "mug", "bowl", "cup", "plate", "block", "box", "bottle", "spoon" };
constexpr std::string_view kColors[] = { "red", "blue", "green", "yellow", "white", "black", "orange" };
constexpr std::string_view kReceptacles[] = { "shelf", "tray", "basket", "rack", "drawer" };

template <typename T, std::size_t N>
T const& pick(T const (&items)[N], Rng& rng)
{
    return items[uniform_index(rng, N)];
}

Cell random_free_cell(Rng& rng, std::set<Cell>& used, int w, int h)
{
    for (;;)
    {
        auto const c = Cell { static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(w))),
                              static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(h))) };
        if (used.insert(c).second)
            return c;
    }
}

Scenario random_scenario(std::string id, Rng& rng)
{
    for (;;)
    {
        Scenario s;
        s.id = id;
        std::set<Cell> used;
        s.robot_start = random_free_cell(rng, used, s.grid_w, s.grid_h);

        auto const goal_name = std::string(pick(kObjectNames, rng));
        auto const goal_color = std::string(pick(kColors, rng));
        s.objects.push_back({ goal_name + "_" + goal_color, goal_name, goal_color,
                              random_free_cell(rng, used, s.grid_w, s.grid_h) });

        // One distractor with another name, optionally a second that shares the goal's name.
        std::string other_name;
        do
            other_name = std::string(pick(kObjectNames, rng));
        while (other_name == goal_name);
        auto const other_color = std::string(pick(kColors, rng));
        s.objects.push_back({ other_name + "_" + other_color, other_name, other_color,
                              random_free_cell(rng, used, s.grid_w, s.grid_h) });
        if (uniform01(rng) < 0.4)
        {
            std::string twin_color;
            do
                twin_color = std::string(pick(kColors, rng));
            while (twin_color == goal_color);
            s.objects.push_back({ goal_name + "_" + twin_color, goal_name, twin_color,
                                  random_free_cell(rng, used, s.grid_w, s.grid_h) });
        }

        auto const goal_receptacle = std::string(pick(kReceptacles, rng));
        s.receptacles.push_back({ goal_receptacle, random_free_cell(rng, used, s.grid_w, s.grid_h) });
        if (uniform01(rng) < 0.5)
        {
            std::string other;
            do
                other = std::string(pick(kReceptacles, rng));
            while (other == goal_receptacle);
            s.receptacles.push_back({ other, random_free_cell(rng, used, s.grid_w, s.grid_h) });
        }
        auto const obstacles = uniform_index(rng, 3);
        for (std::uint64_t i = 0; i < obstacles; ++i)
            s.obstacles.push_back(random_free_cell(rng, used, s.grid_w, s.grid_h));

        s.goal = { s.objects.front().object_id, goal_receptacle };
        s.clean_instruction = "put the " + goal_color + " " + goal_name + " on the " + goal_receptacle;
        std::sort(s.objects.begin(), s.objects.end(),
                  [](auto const& a, auto const& b) { return a.object_id < b.object_id; });
        validate(s);

        auto const plan = parse_instruction(s, s.clean_instruction);
        auto const rollout = plan_and_execute(s, plan, 0);
        if (plan.hesitation_steps == 0 && rollout.success)
            return s;
    }
}

} // namespace

Suite generate_desk_suite(std::uint64_t seed, std::size_t train_count, std::size_t test_count)
{
    Suite suite;
    suite.manifest.name = "desk";
    Rng rng(mix_seed(seed));

    auto const add = [&](Scenario scenario, bool train) {
        auto const crowded = scenario.objects.size() > 2 ? "crowded" : "sparse";
        suite.manifest.suites[crowded].push_back(scenario.id);
        (train ? suite.manifest.train : suite.manifest.test).push_back(scenario.id);
        suite.scenarios.emplace(scenario.id, std::move(scenario));
    };

    if (train_count > 0)
        add(canonical_s1(), true);
    for (std::size_t i = suite.manifest.train.size(); i < train_count; ++i)
    {
        auto id = "train-" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        add(random_scenario(std::move(id), rng), true);
    }
    for (std::size_t i = 0; i < test_count; ++i)
    {
        auto id = "test-" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        add(random_scenario(std::move(id), rng), false);
    }
    return suite;
}

} // namespace redline
