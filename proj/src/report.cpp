// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/report.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "pairwise_vl/errors.hpp"

namespace pairwise_vl {
namespace {

std::string cell(const std::optional<Percent>& p) {
  return p ? p->str() : std::string(kNotEvaluated);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

// Display width in code points, good enough for padding.
std::size_t width(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xc0) != 0x80;
  return n;
}

std::string render_text(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w;
  for (const auto& r : rows) {
    w.resize(std::max(w.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], width(r[i]));
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) line += "  ";
      line += r[i];
      if (i + 1 < r.size()) line.append(w[i] - width(r[i]), ' ');
    }
    out << line << "\n";
  }
  return out.str();
}

std::vector<std::string> unique_labels(const std::vector<RunSummary>& summaries) {
  std::map<std::string, int> seen;
  std::vector<std::string> out;
  for (const auto& s : summaries) {
    int n = ++seen[s.label];
    out.push_back(n == 1 ? s.label : s.label + " #" + std::to_string(n));
  }
  return out;
}

std::vector<RunSummary> load_all(const std::vector<std::filesystem::path>& runs) {
  if (runs.empty()) throw MissingSummary("no runs given");
  std::vector<RunSummary> out;
  for (const auto& r : runs) out.push_back(RunSummary::load(r));
  return out;
}

std::string tag_cell(const TagAccuracy& t) {
  return "[" + std::to_string(t.correct) + " | " + std::to_string(t.tagged) + "]";
}

}  // namespace

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "markdown" || text == "md") return ReportFormat::kMarkdown;
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "text" || text == "txt") return ReportFormat::kText;
  return std::nullopt;
}

ComparisonTable comparison_table(const std::vector<RunSummary>& summaries) {
  if (summaries.empty()) throw MissingSummary("no runs given");
  ComparisonTable table;
  auto labels = unique_labels(summaries);
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i].scores;
    table.rows.push_back({labels[i], s.text_score, s.image_score, s.group_score});
  }
  return table;
}

std::string render_score_table(const ComparisonTable& table, ReportFormat format) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Run", "Text", "Image", "Group"});
  for (const auto& r : table.rows) rows.push_back({r.label, cell(r.text), cell(r.image), cell(r.group)});

  std::ostringstream out;
  switch (format) {
    case ReportFormat::kCsv:
      for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_field(r[i]);
        out << "\n";
      }
      break;
    case ReportFormat::kMarkdown:
      out << "| Run | Text | Image | Group |\n|---|---:|---:|---:|\n";
      for (std::size_t i = 1; i < rows.size(); ++i) {
        out << "| " << md_escape(rows[i][0]) << " | " << rows[i][1] << " | " << rows[i][2] << " | "
            << rows[i][3] << " |\n";
      }
      break;
    case ReportFormat::kText:
      out << render_text(rows);
      break;
  }
  return out.str();
}

std::string emit_score_table(const std::vector<std::filesystem::path>& runs, ReportFormat format) {
  return render_score_table(comparison_table(load_all(runs)), format);
}

std::vector<TagAccuracy> tag_rows(const RunSummary& summary, ScoreKind kind) {
  auto rows = tag_accuracy(summary.scores, kind);
  if (rows.empty()) {
    throw NoTags("run has no tagged pairs with a " + std::string(to_string(kind)) + " score");
  }
  return rows;
}

std::string render_tag_table(const std::vector<TagAccuracy>& rows, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kCsv:
      out << "tag,correct,tagged,accuracy\n";
      for (const auto& t : rows) {
        out << csv_field(t.tag) << "," << t.correct << "," << t.tagged << ","
            << t.accuracy.str() << "\n";
      }
      break;
    case ReportFormat::kMarkdown: {
      out << "| Tag | Correct \\| Tagged | Accuracy |\n|---|---:|---:|\n";
      int block = -1;
      for (const auto& t : rows) {
        // blank separator row between category blocks
        if (block != -1 && tag_block(t.tag) != block) out << "| | | |\n";
        block = tag_block(t.tag);
        out << "| " << md_escape(t.tag) << " | " << md_escape(tag_cell(t)) << " | "
            << t.accuracy.str() << "% |\n";
      }
      break;
    }
    case ReportFormat::kText: {
      std::vector<std::vector<std::string>> table{{"Tag", "Correct | Tagged", "Accuracy"}};
      for (const auto& t : rows) table.push_back({t.tag, tag_cell(t), t.accuracy.str() + "%"});
      out << render_text(table);
      break;
    }
  }
  return out.str();
}

std::string emit_tag_table(const std::filesystem::path& run, ScoreKind kind, ReportFormat format) {
  return render_tag_table(tag_rows(RunSummary::load(run), kind), format);
}

std::string render_tag_comparison(const std::vector<RunSummary>& summaries, ScoreKind kind) {
  if (summaries.empty()) throw MissingSummary("no runs given");
  for (const auto& s : summaries) {
    if (s.dataset_digest != summaries.front().dataset_digest) {
      throw DatasetMismatch("runs were made over different datasets (" +
                            summaries.front().dataset_digest.substr(0, 12) + " vs " +
                            s.dataset_digest.substr(0, 12) + ")");
    }
  }

  std::vector<std::map<std::string, Percent>> per_run;
  std::vector<TagAccuracy> order;
  std::map<std::string, std::size_t> slot;
  for (const auto& s : summaries) {
    auto rows = tag_accuracy(s.scores, kind);
    auto& m = per_run.emplace_back();
    for (const auto& t : rows) {
      m.emplace(t.tag, t.accuracy);
      auto [it, fresh] = slot.emplace(t.tag, order.size());
      if (fresh) order.push_back(t);
      // a subset run sees fewer pairs; order by the widest count
      auto& o = order[it->second];
      o.tagged = std::max(o.tagged, t.tagged);
    }
  }
  if (order.empty()) throw NoTags("no run has tagged pairs");
  // Tag-table order for the union; ties on tagged count break by name.
  std::stable_sort(order.begin(), order.end(), [](const TagAccuracy& a, const TagAccuracy& b) {
    auto ba = tag_block(a.tag);
    auto bb = tag_block(b.tag);
    if (ba != bb) return ba < bb;
    if (a.tagged != b.tagged) return a.tagged > b.tagged;
    return a.tag < b.tag;
  });

  std::ostringstream out;
  out << "tag";
  for (const auto& l : unique_labels(summaries)) out << "," << csv_field(l);
  out << "\n";
  for (const auto& t : order) {
    out << csv_field(t.tag);
    for (const auto& m : per_run) {
      auto it = m.find(t.tag);
      out << "," << (it == m.end() ? std::string(kNotEvaluated) : it->second.str());
    }
    out << "\n";
  }
  return out.str();
}

std::string emit_tag_comparison(const std::vector<std::filesystem::path>& runs, ScoreKind kind) {
  return render_tag_comparison(load_all(runs), kind);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw Error("unterminated quoted CSV field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pairwise_vl
