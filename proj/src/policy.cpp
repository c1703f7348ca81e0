// SPDX-License-Identifier: Apache-2.0
#include <redline/error.hpp>
#include <redline/policy.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace redline
{

namespace
{

constexpr std::array kCharSlots = { Slot::FirstContentWord, Slot::ObjectNoun, Slot::ReceptacleNoun };
constexpr std::array kTokenSlots = { Slot::ObjectNoun, Slot::AttributeWord, Slot::ReceptacleNoun,
                                     Slot::SpatialModifier };

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view name, std::array<Enum, N> const& values, std::string_view what)
{
    for (auto v: values)
        if (to_string(v) == name)
            return v;
    throw Error(ErrorCode::InvalidArgument, "unknown " + std::string(what) + " '" + std::string(name) + "'");
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;)
    {
        auto const pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            return parts;
        start = pos + 1;
    }
}

/// Scaled scores over the mask, shifted so that the maximum is zero.
std::vector<double> shifted_scores(AttackerPolicy const& policy, StateFeatures const& features, ActionMask const& mask)
{
    if (mask.empty())
        throw Error(ErrorCode::InvalidArgument, "empty action mask");
    std::vector<double> scores(mask.size(), 0.0);
    for (std::size_t m = 0; m < mask.size(); ++m)
    {
        if (mask[m] >= policy.action_count())
            throw Error(ErrorCode::StaleTrajectory, "action " + std::to_string(mask[m]) + " outside action space");
        double s = 0.0;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            s += policy.weight(f, mask[m]) * features[f];
        scores[m] = s / policy.temperature;
    }
    auto const peak = *std::max_element(scores.begin(), scores.end());
    for (auto& s: scores)
        s -= peak;
    return scores;
}

} // namespace

std::string_view to_string(Slot slot) noexcept
{
    switch (slot)
    {
        case Slot::FirstContentWord: return "first_content_word";
        case Slot::ObjectNoun: return "object_noun";
        case Slot::AttributeWord: return "attribute_word";
        case Slot::ReceptacleNoun: return "receptacle_noun";
        case Slot::SpatialModifier: return "spatial_modifier";
    }
    return "object_noun";
}

std::optional<ToolFamily> family_of(ActionTemplate const& action) noexcept
{
    switch (action.index())
    {
        case 1: return ToolFamily::Char;
        case 2: return ToolFamily::Token;
        case 3: return ToolFamily::Prompt;
        default: return std::nullopt;
    }
}

std::string describe(ActionTemplate const& action)
{
    return std::visit(
        [](auto const& a) -> std::string {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, StopAction>)
                return "stop";
            else if constexpr (std::is_same_v<T, CharTypo>)
                return "char:" + std::string(to_string(a.kind)) + ":" + std::string(to_string(a.target));
            else if constexpr (std::is_same_v<T, TokenEdit>)
                return "token:" + std::string(to_string(a.kind)) + ":" + std::string(to_string(a.target));
            else
                return "prompt:" + std::string(to_string(a.kind)) + ":" + std::string(to_string(a.anchor));
        },
        action);
}

ActionTemplate parse_action(std::string_view descriptor)
{
    if (descriptor == "stop")
        return StopAction {};
    auto const parts = split(descriptor, ':');
    if (parts.size() != 3)
        throw Error(ErrorCode::InvalidArgument, "bad action descriptor '" + std::string(descriptor) + "'");
    if (parts[0] == "char")
        return CharTypo { enum_from(parts[1], kCharEditKinds, "char edit"), enum_from(parts[2], kCharSlots, "slot") };
    if (parts[0] == "token")
        return TokenEdit { enum_from(parts[1], kTokenEditKinds, "token edit"), enum_from(parts[2], kTokenSlots, "slot") };
    if (parts[0] == "prompt")
        return InjectClause { enum_from(parts[1], kClauseKinds, "clause"), enum_from(parts[2], kAnchors, "anchor") };
    throw Error(ErrorCode::InvalidArgument, "bad action family '" + std::string(parts[0]) + "'");
}

std::vector<ActionTemplate> default_action_space()
{
    std::vector<ActionTemplate> actions { StopAction {} };
    for (auto kind: kCharEditKinds)
        for (auto slot: kCharSlots)
            actions.emplace_back(CharTypo { kind, slot });
    for (auto kind: kTokenEditKinds)
        for (auto slot: kTokenSlots)
            actions.emplace_back(TokenEdit { kind, slot });
    for (auto kind: kClauseKinds)
        for (auto anchor: kAnchors)
            actions.emplace_back(InjectClause { kind, anchor });
    return actions;
}

StateFeatures featurize(Objective objective,
                        EditBudget const& budget,
                        Instruction const& instruction,
                        std::optional<ToolFamily> last_family,
                        bool last_rejected)
{
    StateFeatures x {};
    x[static_cast<std::size_t>(objective)] = 1.0;
    auto const left = budget_remaining(budget);
    x[3] = budget.max_tool_calls == 0 ? 0.0
                                      : static_cast<double>(left.tool_calls_left) / static_cast<double>(budget.max_tool_calls);
    x[4] = budget.max_char_edits == 0 ? 0.0
                                      : static_cast<double>(left.char_edits_left) / static_cast<double>(budget.max_char_edits);
    auto const n = instruction.tokens().size();
    x[n <= 5 ? 5 : (n <= 9 ? 6 : 7)] = 1.0;
    x[8 + (last_family ? static_cast<std::size_t>(*last_family) + 1 : 0)] = 1.0;
    x[12] = last_rejected ? 1.0 : 0.0;
    x[13] = 1.0;
    return x;
}

AttackerPolicy AttackerPolicy::uniform(double temperature)
{
    AttackerPolicy policy;
    policy.action_space = default_action_space();
    policy.weights.assign(kFeatureCount * policy.action_space.size(), 0.0);
    policy.temperature = temperature;
    return policy;
}

std::size_t AttackerPolicy::stop_index() const
{
    for (std::size_t i = 0; i < action_space.size(); ++i)
        if (std::holds_alternative<StopAction>(action_space[i]))
            return i;
    throw Error(ErrorCode::InvalidArgument, "action space has no stop action");
}

void AttackerPolicy::validate() const
{
    if (action_space.empty())
        throw Error(ErrorCode::InvalidArgument, "empty action space");
    (void) stop_index();
    if (weights.size() != kFeatureCount * action_space.size())
        throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(kFeatureCount * action_space.size())
                                                    + " weights, got " + std::to_string(weights.size()));
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
    if (!std::all_of(weights.begin(), weights.end(), [](double w) { return std::isfinite(w); }))
        throw Error(ErrorCode::InvalidArgument, "non-finite weight");
}

std::vector<double> action_probabilities(AttackerPolicy const& policy,
                                         StateFeatures const& features,
                                         ActionMask const& mask)
{
    auto probs = shifted_scores(policy, features, mask);
    double total = 0.0;
    for (auto& p: probs)
        total += (p = std::exp(p));
    for (auto& p: probs)
        p /= total;
    return probs;
}

double action_log_prob(AttackerPolicy const& policy,
                       StateFeatures const& features,
                       ActionMask const& mask,
                       std::size_t action)
{
    auto const scores = shifted_scores(policy, features, mask);
    double total = 0.0;
    for (auto s: scores)
        total += std::exp(s);
    auto const it = std::find(mask.begin(), mask.end(), action);
    if (it == mask.end())
        return -std::numeric_limits<double>::infinity();
    return scores[static_cast<std::size_t>(it - mask.begin())] - std::log(total);
}

SampledAction sample_action(AttackerPolicy const& policy, StateFeatures const& features, ActionMask const& mask, Rng& rng)
{
    auto const probs = action_probabilities(policy, features, mask);
    auto const u = uniform01(rng);
    std::size_t chosen = probs.size() - 1;
    double cumulative = 0.0;
    for (std::size_t m = 0; m < probs.size(); ++m)
    {
        cumulative += probs[m];
        if (u < cumulative)
        {
            chosen = m;
            break;
        }
    }
    // Guard against landing on a zero-probability tail entry through rounding.
    while (probs[chosen] == 0.0 && chosen > 0)
        --chosen;
    return SampledAction { mask[chosen], action_log_prob(policy, features, mask, mask[chosen]) };
}

void accumulate_log_prob_gradient(AttackerPolicy const& policy,
                                  StateFeatures const& features,
                                  ActionMask const& mask,
                                  std::size_t action,
                                  double coef,
                                  std::span<double> gradient)
{
    auto const probs = action_probabilities(policy, features, mask);
    auto const A = policy.action_count();
    for (std::size_t m = 0; m < mask.size(); ++m)
    {
        auto const indicator = mask[m] == action ? 1.0 : 0.0;
        auto const scale = coef * (indicator - probs[m]) / policy.temperature;
        if (scale == 0.0)
            continue;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            gradient[f * A + mask[m]] += scale * features[f];
    }
}

void to_json(nlohmann::json& j, AttackerPolicy const& policy)
{
    auto actions = nlohmann::json::array();
    for (auto const& a: policy.action_space)
        actions.push_back(describe(a));
    j = nlohmann::json {
        { "version", policy.version },
        { "temperature", policy.temperature },
        { "action_space", actions },
        { "weights", policy.weights },
    };
}

void from_json(nlohmann::json const& j, AttackerPolicy& policy)
{
    try
    {
        policy.version = j.at("version").get<std::string>();
        policy.temperature = j.at("temperature").get<double>();
        policy.action_space.clear();
        for (auto const& d: j.at("action_space"))
            policy.action_space.push_back(parse_action(d.get<std::string>()));
        policy.weights = j.at("weights").get<std::vector<double>>();
    }
    catch (nlohmann::json::exception const& e)
    {
        throw Error(ErrorCode::InvalidArgument, std::string("policy file: ") + e.what());
    }
    policy.validate();
}

AttackerPolicy load_policy(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::InvalidArgument, "cannot open policy " + path.string());
    try
    {
        return nlohmann::json::parse(in).get<AttackerPolicy>();
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

void save_policy(AttackerPolicy const& policy, std::filesystem::path const& path)
{
    std::ofstream out(path);
    out << nlohmann::json(policy).dump(2) << '\n';
}

} // namespace redline
