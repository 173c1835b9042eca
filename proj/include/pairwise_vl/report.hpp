// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pairwise_vl/runner.hpp"
#include "pairwise_vl/scoring.hpp"

namespace pairwise_vl {

enum class ReportFormat { kMarkdown, kCsv, kText };

std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Marks a score that was not evaluated, as opposed to 0.00.
inline constexpr std::string_view kNotEvaluated = "—";

struct ComparisonRow {
  std::string label;
  std::optional<Percent> text;
  std::optional<Percent> image;
  std::optional<Percent> group;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

/// One row per summary. Labels are the experiment labels; a repeated
/// label gets " #2", " #3", ... appended. Throws MissingSummary if empty.
ComparisonTable comparison_table(const std::vector<RunSummary>& summaries);

std::string render_score_table(const ComparisonTable& table, ReportFormat format);

/// Loads each run's summary.json. Throws MissingSummary.
std::string emit_score_table(const std::vector<std::filesystem::path>& runs, ReportFormat format);

/// Throws NoTags when no scored pair carries a tag.
std::vector<TagAccuracy> tag_rows(const RunSummary& summary, ScoreKind kind);

std::string render_tag_table(const std::vector<TagAccuracy>& rows, ReportFormat format);

std::string emit_tag_table(const std::filesystem::path& run, ScoreKind kind, ReportFormat format);

/// Tags x runs accuracy matrix as CSV: header `tag,<label>,...`, one row
/// per tag in tag-table order over the union of tags, "—" where a run did
/// not score that tag. Throws DatasetMismatch on differing dataset digests.
std::string render_tag_comparison(const std::vector<RunSummary>& summaries, ScoreKind kind);

std::string emit_tag_comparison(const std::vector<std::filesystem::path>& runs, ScoreKind kind);

/// RFC 4180 reader for the CSV this module writes.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace pairwise_vl
