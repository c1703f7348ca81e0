// SPDX-License-Identifier: Apache-2.0
#include <redline/deskworld.hpp>
#include <redline/error.hpp>
#include <redline/instruction.hpp>
#include <redline/toolbox.hpp>

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

namespace redline
{

namespace
{

struct Vocabulary
{
    std::set<std::string> names;
    std::set<std::string> colors;
    std::set<std::string> receptacles;
    std::set<std::string> all;
};

Vocabulary vocabulary_of(Scenario const& scenario)
{
    Vocabulary v;
    for (auto const& object: scenario.objects)
    {
        v.names.insert(object.name);
        v.colors.insert(object.color);
    }
    for (auto const& receptacle: scenario.receptacles)
        v.receptacles.insert(receptacle.name);
    v.all.insert(v.names.begin(), v.names.end());
    v.all.insert(v.colors.begin(), v.colors.end());
    v.all.insert(v.receptacles.begin(), v.receptacles.end());
    for (auto verb: kDeskVerbs)
        v.all.emplace(verb);
    return v;
}

std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> sentences;
    std::string current;
    for (char c: text)
    {
        if (c == '.')
        {
            sentences.push_back(std::move(current));
            current.clear();
        }
        else
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    sentences.push_back(std::move(current));
    std::erase_if(sentences, [](std::string const& s) { return tokenize(s).empty(); });
    return sentences;
}

class Executor
{
  public:
    Executor(Scenario const& scenario, std::string target_id):
        scenario_(scenario), target_id_(std::move(target_id)), robot_(scenario.robot_start)
    {
        for (auto const& object: scenario.objects)
            positions_.emplace_back(object.object_id, object.cell);
    }

    /// Returns false once the step cap has been hit.
    bool emit(Primitive primitive)
    {
        if (result_.steps >= scenario_.max_steps)
        {
            result_.truncated = true;
            return false;
        }
        result_.trace.push_back(primitive);
        ++result_.steps;
        return true;
    }

    bool wait(Primitive primitive, std::size_t count)
    {
        for (std::size_t i = 0; i < count; ++i)
            if (!emit(primitive))
                return false;
        return true;
    }

    /// Manhattan route, x-axis first then y-axis.
    bool travel(Cell destination)
    {
        while (robot_.x != destination.x)
        {
            auto const right = destination.x > robot_.x;
            if (!step_to({ robot_.x + (right ? 1 : -1), robot_.y }, right ? Primitive::Right : Primitive::Left))
                return false;
        }
        while (robot_.y != destination.y)
        {
            auto const down = destination.y > robot_.y;
            if (!step_to({ robot_.x, robot_.y + (down ? 1 : -1) }, down ? Primitive::Down : Primitive::Up))
                return false;
        }
        return true;
    }

    bool grasp()
    {
        if (!emit(Primitive::Grasp))
            return false;
        held_ = true;
        return true;
    }

    bool place()
    {
        if (!emit(Primitive::Place))
            return false;
        held_ = false;
        return true;
    }

    [[nodiscard]] Cell robot() const noexcept { return robot_; }

    [[nodiscard]] Cell position_of(std::string const& object_id) const
    {
        for (auto const& [id, cell]: positions_)
            if (id == object_id)
                return cell;
        throw Error(ErrorCode::InvalidScenario, "unknown object " + object_id);
    }

    RolloutResult finish()
    {
        auto const goal_object = position_of(scenario_.goal.object_id);
        auto const* goal_receptacle = scenario_.find_receptacle(scenario_.goal.receptacle);
        auto const goal_held = held_ && scenario_.goal.object_id == target_id_;
        result_.success = !result_.truncated && goal_receptacle && !goal_held && goal_object == goal_receptacle->cell;
        return std::move(result_);
    }

  private:
    bool step_to(Cell next, Primitive primitive)
    {
        if (!emit(primitive))
            return false;
        robot_ = next;
        if (held_)
            set_position(target_id_, robot_);
        auto occupied = std::find(scenario_.obstacles.begin(), scenario_.obstacles.end(), robot_)
                        != scenario_.obstacles.end();
        for (auto const& [id, cell]: positions_)
            if (id != target_id_ && cell == robot_)
                occupied = true;
        if (occupied)
            ++result_.violations;
        return true;
    }

    void set_position(std::string const& object_id, Cell cell)
    {
        for (auto& [id, pos]: positions_)
            if (id == object_id)
                pos = cell;
    }

    Scenario const& scenario_;
    std::string target_id_;
    Cell robot_;
    bool held_ = false;
    std::vector<std::pair<std::string, Cell>> positions_;
    RolloutResult result_;
};

bool run_plan(Executor& exec, Scenario const& scenario, ParsePlan const& plan)
{
    if (!exec.wait(Primitive::Hesitate, plan.hesitation_steps))
        return false;
    for (auto const& id: plan.visit_ids)
        if (!exec.travel(exec.position_of(id)))
            return false;
    if (!exec.grasp())
        return false;

    std::optional<Cell> grasp_cell = exec.robot();
    Receptacle const* receptacle = plan.receptacle ? scenario.find_receptacle(*plan.receptacle) : nullptr;
    if (receptacle)
    {
        if (!exec.travel(receptacle->cell) || !exec.place())
            return false;
    }
    for (auto extra: plan.extras)
    {
        if (extra == ExtraSentence::Verification && receptacle)
        {
            if (!exec.travel(*grasp_cell) || !exec.travel(receptacle->cell))
                return false;
        }
        else if (!exec.wait(Primitive::Overhead, plan.parse_overhead))
            return false;
    }
    return true;
}

} // namespace

std::string trace_string(RolloutResult const& result)
{
    std::string out;
    out.reserve(result.trace.size());
    for (auto p: result.trace)
        out.push_back(static_cast<char>(p));
    return out;
}

ParsePlan parse_instruction(Scenario const& scenario, std::string_view text, DeskWorldConfig const& config)
{
    auto const vocab = vocabulary_of(scenario);
    ParsePlan plan;
    plan.parse_overhead = config.parse_overhead;

    std::vector<std::string> names;
    std::vector<std::string> colors;
    std::vector<std::string> receptacles;
    auto const sentences = split_sentences(text);
    for (std::size_t s = 0; s < sentences.size(); ++s)
    {
        bool verifies = false;
        for (auto const& token: tokenize(sentences[s]))
        {
            auto word = normalize_word(token.text);
            if (word.empty())
                continue;
            if (!vocab.all.contains(word))
            {
                std::size_t best = std::numeric_limits<std::size_t>::max();
                std::size_t ties = 0;
                std::string match;
                for (auto const& candidate: vocab.all)
                {
                    auto const d = levenshtein(word, candidate);
                    if (d < best)
                        best = d, ties = 1, match = candidate;
                    else if (d == best)
                        ++ties;
                }
                if (best != 1 || ties != 1)
                    continue;
                word = match;
                plan.hesitation_steps += config.hesitation_cost;
            }
            if (vocab.names.contains(word))
                names.push_back(word);
            if (vocab.colors.contains(word))
                colors.push_back(word);
            if (vocab.receptacles.contains(word))
                receptacles.push_back(word);
            if (std::find(std::begin(kVerificationVerbs), std::end(kVerificationVerbs), word)
                != std::end(kVerificationVerbs))
                verifies = true;
        }
        if (s > 0)
            plan.extras.push_back(verifies ? ExtraSentence::Verification : ExtraSentence::Overhead);
    }

    auto const mentioned = [](std::vector<std::string> const& words, std::string const& w) {
        return std::find(words.begin(), words.end(), w) != words.end();
    };
    std::vector<SceneObject const*> survivors;
    for (auto const& object: scenario.objects)
        if (mentioned(names, object.name))
            survivors.push_back(&object);
    std::vector<SceneObject const*> colored;
    for (auto const* object: survivors)
        if (mentioned(colors, object->color))
            colored.push_back(object);
    if (!colored.empty())
        survivors = std::move(colored);
    std::sort(survivors.begin(), survivors.end(),
              [](auto const* a, auto const* b) { return a->object_id < b->object_id; });
    for (auto const* object: survivors)
        plan.visit_ids.push_back(object->object_id);
    if (!receptacles.empty())
        plan.receptacle = receptacles.front();
    return plan;
}

RolloutResult plan_and_execute(Scenario const& scenario, ParsePlan const& plan, std::uint64_t /*seed*/)
{
    if (plan.empty())
        return RolloutResult {};
    Executor exec(scenario, plan.visit_ids.back());
    run_plan(exec, scenario, plan);
    return exec.finish();
}

RolloutResult deskworld_rollout(Scenario const& scenario,
                                std::string_view instruction,
                                std::uint64_t seed,
                                DeskWorldConfig const& config)
{
    return plan_and_execute(scenario, parse_instruction(scenario, instruction, config), seed);
}

} // namespace redline
