// SPDX-License-Identifier: Apache-2.0
#pragma once

// Evaluation metrics over episode logs and the tables built from them.

#include <redline/episode.hpp>
#include <redline/scenario.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace redline
{

/// Attack success rate in percentage points: base TER minus attack TER. May be negative.
[[nodiscard]] double compute_asr(double base_ter, double attack_ter);

/// attack_len / base_len. Throws Error(ZeroBaseline) when base_len is zero.
[[nodiscard]] double compute_air(double base_len, double attack_len);

/// attack_cv / base_cv. Throws Error(ZeroBaseline) when base_cv is zero.
[[nodiscard]] double compute_cvi(double base_cv, double attack_cv);

/// Arithmetic mean; zero for an empty list.
[[nodiscard]] double mean_of(std::vector<double> const& values);

struct SuiteReport
{
    std::string suite_name;
    double base_ter = 0.0;
    double attack_ter = 0.0;
    double asr = 0.0;
    double base_len = 0.0;
    double attack_len = 0.0;
    std::optional<double> air;          // ratio of means; empty when base_len is zero
    std::optional<double> air_mean;     // mean of per-episode ratios
    double base_cv = 0.0;
    double attack_cv = 0.0;
    std::optional<double> cvi;          // ratio of means; empty when base_cv is zero
    std::optional<double> cvi_mean;     // mean of per-episode ratios over episodes with base violations
    double mean_tool_calls = 0.0;
    double mean_char_edits = 0.0;
    std::size_t episode_count = 0;

    bool operator==(SuiteReport const&) const = default;
};

void to_json(nlohmann::json& j, SuiteReport const& report);

/// One row summarizing `records` under `name`.
[[nodiscard]] SuiteReport summarize(std::string name, std::vector<EpisodeRecord const*> const& records);

/// Rows per manifest suite (manifest order, suites with no episodes omitted) followed by an "Overall" row.
/// Empty input yields an empty report. Throws Error(UnknownSuite) for a scenario outside the manifest.
[[nodiscard]] std::vector<SuiteReport> aggregate_report(std::vector<EpisodeRecord> const& records,
                                                        SuiteManifest const& manifest);

enum class ReportFormat
{
    Markdown,
    Csv,
    Json,
};

[[nodiscard]] ReportFormat report_format_from_string(std::string_view name);

/// GitHub-flavored markdown table. Missing ratios render as "n/a".
[[nodiscard]] std::string render_markdown(std::vector<SuiteReport> const& rows);
/// RFC-4180 CSV with CRLF line endings; fixed column order and number formatting.
[[nodiscard]] std::string render_csv(std::vector<SuiteReport> const& rows);
/// JSON array of SuiteReport objects.
[[nodiscard]] std::string render_json(std::vector<SuiteReport> const& rows);
[[nodiscard]] std::string render_report(std::vector<SuiteReport> const& rows, ReportFormat format);

} // namespace redline
