// SPDX-License-Identifier: Apache-2.0
#pragma once

// FIND/APPLY perturbation tools. FIND enumerates candidate sites on an instruction; APPLY executes exactly one
// edit and returns a new Instruction, leaving its input untouched. Every APPLY charges the edit budget against
// the clean text and throws redline::Error on rejection (the budget is then unchanged).

#include <redline/instruction.hpp>

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace redline
{

enum class CharEditKind
{
    Insertion,
    Deletion,
    Substitution,
    Transposition,
    CaseFlip,
};

enum class TokenEditKind
{
    Replace,
    Remove,
    Add,
    AttributeSwap,
};

enum class ClauseKind
{
    VerificationWrap,
    DecompositionStep,
    UncertaintyClause,
    ExtraConstraint,
    ObjectiveInjection,
};

enum class Anchor
{
    Prefix,
    Suffix,
};

inline constexpr std::array kCharEditKinds = { CharEditKind::Insertion, CharEditKind::Deletion,
                                               CharEditKind::Substitution, CharEditKind::Transposition,
                                               CharEditKind::CaseFlip };
inline constexpr std::array kTokenEditKinds = { TokenEditKind::Replace, TokenEditKind::Remove, TokenEditKind::Add,
                                                TokenEditKind::AttributeSwap };
inline constexpr std::array kClauseKinds = { ClauseKind::VerificationWrap, ClauseKind::DecompositionStep,
                                             ClauseKind::UncertaintyClause, ClauseKind::ExtraConstraint,
                                             ClauseKind::ObjectiveInjection };
inline constexpr std::array kAnchors = { Anchor::Prefix, Anchor::Suffix };

[[nodiscard]] std::string_view to_string(CharEditKind kind) noexcept;
[[nodiscard]] std::string_view to_string(TokenEditKind kind) noexcept;
[[nodiscard]] std::string_view to_string(ClauseKind kind) noexcept;
[[nodiscard]] std::string_view to_string(Anchor anchor) noexcept;

/// Fixed clause text per kind. ObjectiveInjection has no fixed text; its entry is a placeholder.
[[nodiscard]] std::string_view clause_template(ClauseKind kind) noexcept;

struct CandidateSite
{
    std::size_t token_index = 0;
    std::optional<std::size_t> char_position;
    std::vector<std::string> allowed_ops;

    bool operator==(CandidateSite const&) const = default;
};

struct FindResult
{
    ToolFamily family = ToolFamily::Char;
    std::vector<CandidateSite> candidates;
    std::vector<Anchor> anchors; // prompt family only
    std::string guidance;

    [[nodiscard]] bool offers(std::size_t token_index, std::optional<std::size_t> char_position,
                              std::string_view op) const;
};

struct ToolboxOptions
{
    std::size_t char_site_cap = std::numeric_limits<std::size_t>::max();
    std::vector<std::string> stop_words { "the", "a", "an", "on", "in", "to", "of" };
    std::vector<std::string> attribute_vocabulary { "red",   "blue",  "green", "yellow", "white", "black",
                                                    "orange", "purple", "pink", "brown", "gray",  "grey",
                                                    "small", "large", "big",  "tiny",   "tall",  "short" };
};

struct ApplyResult
{
    Instruction instruction;
    EditRecord record;
};

/// Lowercased token with leading/trailing non-alphanumerics stripped (ASCII).
[[nodiscard]] std::string normalize_word(std::string_view token);

[[nodiscard]] FindResult char_find(Instruction const& instr, ToolboxOptions const& options = {});
[[nodiscard]] ApplyResult char_apply(Instruction const& instr,
                                     EditBudget& budget,
                                     CandidateSite const& site,
                                     CharEditKind kind,
                                     std::optional<char32_t> ch);

[[nodiscard]] FindResult token_find(Instruction const& instr);
[[nodiscard]] ApplyResult token_apply(Instruction const& instr,
                                      EditBudget& budget,
                                      TokenEditKind kind,
                                      std::size_t index,
                                      std::optional<std::string> replacement,
                                      ToolboxOptions const& options = {});

[[nodiscard]] FindResult prompt_find(Instruction const& instr);
[[nodiscard]] ApplyResult prompt_apply(Instruction const& instr,
                                       EditBudget& budget,
                                       ClauseKind kind,
                                       Anchor anchor,
                                       std::string_view clause);

} // namespace redline
