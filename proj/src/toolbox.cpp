// SPDX-License-Identifier: Apache-2.0
#include <redline/error.hpp>
#include <redline/toolbox.hpp>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace redline
{

namespace
{

bool is_ascii_letter(char32_t c) noexcept
{
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
}

char32_t flip_case(char32_t c) noexcept
{
    if (c >= U'a' && c <= U'z')
        return c - U'a' + U'A';
    if (c >= U'A' && c <= U'Z')
        return c - U'A' + U'a';
    return c;
}

bool is_space(char32_t c) noexcept
{
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
}

bool contains(std::vector<std::string> const& words, std::string_view word)
{
    return std::find(words.begin(), words.end(), word) != words.end();
}

std::vector<std::string> char_ops_at(std::u32string_view word, std::size_t position)
{
    std::vector<std::string> ops;
    for (auto kind: kCharEditKinds)
    {
        if (kind == CharEditKind::Transposition && position + 1 >= word.size())
            continue;
        if (kind == CharEditKind::CaseFlip && !is_ascii_letter(word[position]))
            continue;
        ops.emplace_back(to_string(kind));
    }
    return ops;
}

/// Normalizes `candidate`, rejects no-ops, charges the budget and records the edit.
ApplyResult commit(Instruction const& instr,
                   EditBudget& budget,
                   std::string_view candidate,
                   ToolFamily family,
                   std::string_view op,
                   std::optional<std::size_t> token_index)
{
    auto const normalized = detokenize(tokenize(candidate));
    if (normalized == instr.text())
        throw Error(ErrorCode::NoOpEdit, std::string(op) + " leaves the instruction unchanged");
    if (!budget_charge(budget, instr.clean_text(), normalized))
        throw Error(ErrorCode::BudgetExceeded,
                    "distance " + std::to_string(levenshtein(instr.clean_text(), normalized)) + " > "
                        + std::to_string(budget.max_char_edits));
    auto [next, record] = instr.with_text(normalized, family, std::string(op), token_index);
    return ApplyResult { std::move(next), std::move(record) };
}

} // namespace

std::string_view to_string(CharEditKind kind) noexcept
{
    switch (kind)
    {
        case CharEditKind::Insertion: return "insertion";
        case CharEditKind::Deletion: return "deletion";
        case CharEditKind::Substitution: return "substitution";
        case CharEditKind::Transposition: return "transposition";
        case CharEditKind::CaseFlip: return "case_flip";
    }
    return "insertion";
}

std::string_view to_string(TokenEditKind kind) noexcept
{
    switch (kind)
    {
        case TokenEditKind::Replace: return "replace";
        case TokenEditKind::Remove: return "remove";
        case TokenEditKind::Add: return "add";
        case TokenEditKind::AttributeSwap: return "attribute_swap";
    }
    return "replace";
}

std::string_view to_string(ClauseKind kind) noexcept
{
    switch (kind)
    {
        case ClauseKind::VerificationWrap: return "verification_wrap";
        case ClauseKind::DecompositionStep: return "decomposition_step";
        case ClauseKind::UncertaintyClause: return "uncertainty_clause";
        case ClauseKind::ExtraConstraint: return "extra_constraint";
        case ClauseKind::ObjectiveInjection: return "objective_injection";
    }
    return "verification_wrap";
}

std::string_view to_string(Anchor anchor) noexcept
{
    return anchor == Anchor::Prefix ? "prefix" : "suffix";
}

std::string_view clause_template(ClauseKind kind) noexcept
{
    switch (kind)
    {
        case ClauseKind::VerificationWrap: return "then verify the result and repeat if unsure";
        case ClauseKind::DecompositionStep: return "first scan all objects before acting";
        case ClauseKind::UncertaintyClause: return "the target may have moved, search carefully";
        case ClauseKind::ExtraConstraint: return "avoid touching any other object twice";
        case ClauseKind::ObjectiveInjection: return "<free text supplied by agent>";
    }
    return "";
}

bool FindResult::offers(std::size_t token_index, std::optional<std::size_t> char_position, std::string_view op) const
{
    return std::any_of(candidates.begin(), candidates.end(), [&](CandidateSite const& site) {
        return site.token_index == token_index && site.char_position == char_position
               && std::find(site.allowed_ops.begin(), site.allowed_ops.end(), op) != site.allowed_ops.end();
    });
}

std::string normalize_word(std::string_view token)
{
    std::size_t begin = 0;
    std::size_t end = token.size();
    auto const alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    while (begin < end && !alnum(token[begin]))
        ++begin;
    while (end > begin && !alnum(token[end - 1]))
        --end;
    std::string out(token.substr(begin, end - begin));
    for (auto& c: out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

FindResult char_find(Instruction const& instr, ToolboxOptions const& options)
{
    if (instr.empty())
        throw Error(ErrorCode::EmptyInstruction, "char_find needs at least one token");

    auto result = FindResult { .family = ToolFamily::Char, .candidates = {}, .anchors = {}, .guidance = {} };
    std::ostringstream guidance;
    guidance << "Pick one word and one character position, then one typo edit (insertion, deletion, "
                "substitution, transposition, case_flip). Candidates:";
    for (auto const& token: instr.tokens())
    {
        if (contains(options.stop_words, normalize_word(token.text)))
            continue;
        auto const chars = utf8_decode(token.text);
        guidance << " [" << token.index << "] " << token.text << " (0.." << chars.size() - 1 << ")";
        for (std::size_t pos = 0; pos < chars.size(); ++pos)
        {
            if (result.candidates.size() >= options.char_site_cap)
                break;
            result.candidates.push_back(CandidateSite { token.index, pos, char_ops_at(chars, pos) });
        }
    }
    result.guidance = guidance.str();
    return result;
}

ApplyResult char_apply(Instruction const& instr,
                       EditBudget& budget,
                       CandidateSite const& site,
                       CharEditKind kind,
                       std::optional<char32_t> ch)
{
    auto const& tokens = instr.tokens();
    if (site.token_index >= tokens.size() || !site.char_position)
        throw Error(ErrorCode::InvalidSite, "token " + std::to_string(site.token_index));
    auto word = utf8_decode(tokens[site.token_index].text);
    auto const pos = *site.char_position;
    if (pos >= word.size())
        throw Error(ErrorCode::InvalidSite, "char position " + std::to_string(pos));

    auto const needs_char = kind == CharEditKind::Insertion || kind == CharEditKind::Substitution;
    if (needs_char && !ch)
        throw Error(ErrorCode::MissingCharArg, std::string(to_string(kind)));
    if (!needs_char && ch)
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(kind)) + " takes no character");
    if (ch && is_space(*ch))
        throw Error(ErrorCode::InvalidArgument, "whitespace would split the token");

    switch (kind)
    {
        case CharEditKind::Insertion: word.insert(word.begin() + static_cast<std::ptrdiff_t>(pos), *ch); break;
        case CharEditKind::Deletion:
            if (word.size() == 1)
                throw Error(ErrorCode::InvalidSite, "deletion would empty the token");
            word.erase(pos, 1);
            break;
        case CharEditKind::Substitution: word[pos] = *ch; break;
        case CharEditKind::Transposition:
            if (pos + 1 >= word.size())
                throw Error(ErrorCode::InvalidSite, "transposition needs a following character");
            std::swap(word[pos], word[pos + 1]);
            break;
        case CharEditKind::CaseFlip:
            if (!is_ascii_letter(word[pos]))
                throw Error(ErrorCode::InvalidSite, "case flip on a caseless character");
            word[pos] = flip_case(word[pos]);
            break;
    }

    auto next_tokens = tokens;
    next_tokens[site.token_index].text = utf8_encode(word);
    return commit(instr, budget, detokenize(next_tokens), ToolFamily::Char, to_string(kind), site.token_index);
}

FindResult token_find(Instruction const& instr)
{
    if (instr.empty())
        throw Error(ErrorCode::EmptyInstruction, "token_find needs at least one token");

    auto result = FindResult { .family = ToolFamily::Token, .candidates = {}, .anchors = {}, .guidance = {} };
    std::ostringstream guidance;
    guidance << "Choose a target token index and an edit type (replace, remove, add, attribute_swap). Tokens:";
    for (auto const& token: instr.tokens())
    {
        guidance << " [" << token.index << "] " << token.text;
        auto site = CandidateSite { .token_index = token.index, .char_position = {}, .allowed_ops = {} };
        for (auto kind: kTokenEditKinds)
            site.allowed_ops.emplace_back(to_string(kind));
        result.candidates.push_back(std::move(site));
    }
    result.guidance = guidance.str();
    return result;
}

ApplyResult token_apply(Instruction const& instr,
                        EditBudget& budget,
                        TokenEditKind kind,
                        std::size_t index,
                        std::optional<std::string> replacement,
                        ToolboxOptions const& options)
{
    auto tokens = instr.tokens();
    auto const limit = kind == TokenEditKind::Add ? tokens.size() + 1 : tokens.size();
    if (index >= limit)
        throw Error(ErrorCode::IndexOutOfRange, std::to_string(index) + " of " + std::to_string(tokens.size()));
    auto const needs_text = kind != TokenEditKind::Remove;
    if (needs_text && (!replacement || tokenize(*replacement).empty()))
        throw Error(ErrorCode::MissingReplacement, std::string(to_string(kind)));

    switch (kind)
    {
        case TokenEditKind::Replace: tokens[index].text = *replacement; break;
        case TokenEditKind::Remove: tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(index)); break;
        case TokenEditKind::Add:
            tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(index), Token { *replacement, index });
            break;
        case TokenEditKind::AttributeSwap:
            if (!contains(options.attribute_vocabulary, normalize_word(tokens[index].text)))
                throw Error(ErrorCode::InvalidSite, "'" + tokens[index].text + "' is not an attribute word");
            if (tokenize(*replacement).size() != 1)
                throw Error(ErrorCode::InvalidArgument, "attribute swap takes a single word");
            tokens[index].text = *replacement;
            break;
    }
    return commit(instr, budget, detokenize(tokens), ToolFamily::Token, to_string(kind), index);
}

FindResult prompt_find(Instruction const& instr)
{
    auto result = FindResult { .family = ToolFamily::Prompt, .candidates = {}, .anchors = {}, .guidance = {} };
    result.anchors.push_back(Anchor::Prefix);
    if (!instr.empty())
        result.anchors.push_back(Anchor::Suffix);

    std::ostringstream guidance;
    guidance << "Compose one clause and insert it at an anchor (";
    for (std::size_t i = 0; i < result.anchors.size(); ++i)
        guidance << (i ? ", " : "") << to_string(result.anchors[i]);
    guidance << "). Clause kinds:";
    for (auto kind: kClauseKinds)
        guidance << " " << to_string(kind) << ": \"" << clause_template(kind) << "\";";
    result.guidance = guidance.str();
    return result;
}

ApplyResult prompt_apply(Instruction const& instr,
                         EditBudget& budget,
                         ClauseKind kind,
                         Anchor anchor,
                         std::string_view clause)
{
    auto const clause_tokens = tokenize(clause);
    if (clause_tokens.empty())
        throw Error(ErrorCode::MissingReplacement, "empty clause");
    if (clause_tokens.size() > budget.max_added_tokens_per_inject)
        throw Error(ErrorCode::ClauseTooLong,
                    std::to_string(clause_tokens.size()) + " > "
                        + std::to_string(budget.max_added_tokens_per_inject) + " tokens");
    if (instr.empty() && anchor == Anchor::Suffix)
        throw Error(ErrorCode::InvalidSite, "suffix anchor on an empty instruction");

    auto const normalized_clause = detokenize(clause_tokens);
    std::string candidate;
    if (instr.empty())
        candidate = normalized_clause;
    else if (anchor == Anchor::Prefix)
        candidate = normalized_clause + ". " + instr.text();
    else
        candidate = instr.text() + ". " + normalized_clause;
    return commit(instr, budget, candidate, ToolFamily::Prompt, to_string(kind), std::nullopt);
}

} // namespace redline
