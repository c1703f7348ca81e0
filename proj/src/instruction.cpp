// SPDX-License-Identifier: Apache-2.0
#include <redline/error.hpp>
#include <redline/instruction.hpp>

#include <algorithm>
#include <numeric>

namespace redline
{

namespace
{

constexpr char32_t kReplacement = 0xFFFD;

bool is_space(char c) noexcept
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

} // namespace

std::u32string utf8_decode(std::string_view text)
{
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size())
    {
        auto const lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (lead < 0x80)
        {
            out.push_back(lead);
            ++i;
            continue;
        }
        if ((lead & 0xE0) == 0xC0)
            len = 2, cp = lead & 0x1F;
        else if ((lead & 0xF0) == 0xE0)
            len = 3, cp = lead & 0x0F;
        else if ((lead & 0xF8) == 0xF0)
            len = 4, cp = lead & 0x07;
        else
        {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > text.size())
        {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k)
        {
            auto const cont = static_cast<unsigned char>(text[i + k]);
            if ((cont & 0xC0) != 0x80)
            {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cont & 0x3F);
        }
        // Reject overlong forms, surrogates and out-of-range values.
        static constexpr char32_t kMin[] = { 0, 0, 0x80, 0x800, 0x10000 };
        if (!ok || cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
        {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string utf8_encode(std::u32string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (char32_t cp: text)
    {
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            cp = kReplacement;
        if (cp < 0x80)
            out.push_back(static_cast<char>(cp));
        else if (cp < 0x800)
        {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
        else if (cp < 0x10000)
        {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
        else
        {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::vector<Token> tokenize(std::string_view text)
{
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size())
    {
        while (i < text.size() && is_space(text[i]))
            ++i;
        auto const start = i;
        while (i < text.size() && !is_space(text[i]))
            ++i;
        if (i > start)
            tokens.push_back(Token { std::string(text.substr(start, i - start)), tokens.size() });
    }
    return tokens;
}

std::string detokenize(std::vector<Token> const& tokens)
{
    std::string out;
    for (auto const& token: tokens)
    {
        if (!out.empty())
            out.push_back(' ');
        out += token.text;
    }
    return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b)
{
    if (a.size() < b.size())
        std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t { 0 });
    for (std::size_t i = 1; i <= a.size(); ++i)
    {
        auto diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
        {
            auto const up = row[j];
            auto const substitute = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({ up + 1, row[j - 1] + 1, substitute });
            diag = up;
        }
    }
    return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b)
{
    if (a == b)
        return 0;
    return levenshtein(std::u32string_view(utf8_decode(a)), std::u32string_view(utf8_decode(b)));
}

std::string_view to_string(ToolFamily family) noexcept
{
    switch (family)
    {
        case ToolFamily::Char: return "char";
        case ToolFamily::Token: return "token";
        case ToolFamily::Prompt: return "prompt";
    }
    return "char";
}

std::optional<ToolFamily> tool_family_from_string(std::string_view name) noexcept
{
    if (name == "char")
        return ToolFamily::Char;
    if (name == "token")
        return ToolFamily::Token;
    if (name == "prompt")
        return ToolFamily::Prompt;
    return std::nullopt;
}

std::string apply_edit_record(std::string_view text, EditRecord const& record)
{
    auto chars = utf8_decode(text);
    auto const before = utf8_decode(record.before);
    if (record.char_offset + before.size() > chars.size()
        || chars.compare(record.char_offset, before.size(), before) != 0)
        throw Error(ErrorCode::InvariantViolation, "edit record does not match text at offset "
                                                       + std::to_string(record.char_offset));
    chars.replace(record.char_offset, before.size(), utf8_decode(record.after));
    return utf8_encode(chars);
}

Instruction::Instruction(std::string_view text):
    clean_text_(detokenize(tokenize(text))), raw_text_(clean_text_), tokens_(tokenize(raw_text_))
{
}

std::pair<Instruction, EditRecord> Instruction::with_text(std::string_view candidate,
                                                          ToolFamily family,
                                                          std::string op_kind,
                                                          std::optional<std::size_t> token_index) const
{
    auto next = *this;
    next.tokens_ = tokenize(candidate);
    next.raw_text_ = detokenize(next.tokens_);

    auto const old_chars = utf8_decode(raw_text_);
    auto const new_chars = utf8_decode(next.raw_text_);
    std::size_t prefix = 0;
    while (prefix < old_chars.size() && prefix < new_chars.size() && old_chars[prefix] == new_chars[prefix])
        ++prefix;
    std::size_t suffix = 0;
    while (suffix < old_chars.size() - prefix && suffix < new_chars.size() - prefix
           && old_chars[old_chars.size() - 1 - suffix] == new_chars[new_chars.size() - 1 - suffix])
        ++suffix;

    auto record = EditRecord {
        .tool_family = family,
        .op_kind = std::move(op_kind),
        .token_index = token_index,
        .char_offset = prefix,
        .before = utf8_encode(std::u32string_view(old_chars).substr(prefix, old_chars.size() - prefix - suffix)),
        .after = utf8_encode(std::u32string_view(new_chars).substr(prefix, new_chars.size() - prefix - suffix)),
        .char_cost = levenshtein(std::u32string_view(old_chars), std::u32string_view(new_chars)),
    };
    next.edit_log_.push_back(record);
    return { std::move(next), std::move(record) };
}

std::string Instruction::replay() const
{
    auto text = clean_text_;
    for (auto const& record: edit_log_)
        text = apply_edit_record(text, record);
    return text;
}

bool budget_charge(EditBudget& budget, std::string_view clean, std::string_view candidate)
{
    auto const distance = levenshtein(clean, candidate);
    if (distance > budget.max_char_edits)
        return false;
    budget.used_char_edits = distance;
    return true;
}

BudgetRemaining budget_remaining(EditBudget const& budget) noexcept
{
    return BudgetRemaining {
        .char_edits_left = budget.max_char_edits - std::min(budget.used_char_edits, budget.max_char_edits),
        .tool_calls_left = budget.max_tool_calls - std::min(budget.used_tool_calls, budget.max_tool_calls),
    };
}

} // namespace redline
