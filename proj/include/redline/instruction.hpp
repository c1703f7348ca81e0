// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace redline
{

/// Decodes UTF-8 into Unicode scalar values; malformed bytes become U+FFFD.
[[nodiscard]] std::u32string utf8_decode(std::string_view text);
[[nodiscard]] std::string utf8_encode(std::u32string_view text);

struct Token
{
    std::string text;
    std::size_t index = 0;

    bool operator==(Token const&) const = default;
};

/// Whitespace-run split; punctuation stays attached and case is preserved.
[[nodiscard]] std::vector<Token> tokenize(std::string_view text);

/// Single-space join.
[[nodiscard]] std::string detokenize(std::vector<Token> const& tokens);

/// Unit-cost edit distance over Unicode scalar values.
[[nodiscard]] std::size_t levenshtein(std::string_view a, std::string_view b);
[[nodiscard]] std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

enum class ToolFamily
{
    Char,
    Token,
    Prompt,
};

[[nodiscard]] std::string_view to_string(ToolFamily family) noexcept;
[[nodiscard]] std::optional<ToolFamily> tool_family_from_string(std::string_view name) noexcept;

/// One accepted edit. The span [char_offset, char_offset + |before|) of the pre-edit text, counted in
/// scalar values, was replaced by `after`.
struct EditRecord
{
    ToolFamily tool_family = ToolFamily::Char;
    std::string op_kind;
    std::optional<std::size_t> token_index;
    std::size_t char_offset = 0;
    std::string before;
    std::string after;
    std::size_t char_cost = 0;

    bool operator==(EditRecord const&) const = default;
};

/// Applies one record to `text`; throws InvariantViolation if `before` does not match.
[[nodiscard]] std::string apply_edit_record(std::string_view text, EditRecord const& record);

/// The attackable instruction. Text is kept whitespace-normalized so that detokenize(tokens) == text.
class Instruction
{
  public:
    Instruction() = default;
    explicit Instruction(std::string_view text);

    [[nodiscard]] std::string const& text() const noexcept { return raw_text_; }
    [[nodiscard]] std::string const& clean_text() const noexcept { return clean_text_; }
    [[nodiscard]] std::vector<Token> const& tokens() const noexcept { return tokens_; }
    [[nodiscard]] std::vector<EditRecord> const& edit_log() const noexcept { return edit_log_; }
    [[nodiscard]] bool empty() const noexcept { return tokens_.empty(); }

    /// Returns a new instruction whose text is `candidate` (normalized) and the record describing the change.
    /// `this` is left untouched.
    [[nodiscard]] std::pair<Instruction, EditRecord> with_text(std::string_view candidate,
                                                               ToolFamily family,
                                                               std::string op_kind,
                                                               std::optional<std::size_t> token_index) const;

    /// Replays the edit log on top of the clean text.
    [[nodiscard]] std::string replay() const;

  private:
    std::string clean_text_;
    std::string raw_text_;
    std::vector<Token> tokens_;
    std::vector<EditRecord> edit_log_;
};

struct EditBudget
{
    std::size_t max_char_edits = 200;
    std::size_t max_tool_calls = 4;
    std::size_t max_added_tokens_per_inject = 12;
    std::size_t used_char_edits = 0;
    std::size_t used_tool_calls = 0;
};

struct BudgetRemaining
{
    std::size_t char_edits_left = 0;
    std::size_t tool_calls_left = 0;

    bool operator==(BudgetRemaining const&) const = default;
};

/// Accepts `candidate` iff levenshtein(clean, candidate) <= max_char_edits, in which case used_char_edits
/// becomes that distance. A rejection leaves the budget unchanged.
[[nodiscard]] bool budget_charge(EditBudget& budget, std::string_view clean, std::string_view candidate);

[[nodiscard]] BudgetRemaining budget_remaining(EditBudget const& budget) noexcept;

} // namespace redline
