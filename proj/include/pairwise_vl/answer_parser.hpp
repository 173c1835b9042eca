// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pairwise_vl/dataset.hpp"

namespace pairwise_vl {

/// Rule ids, in priority order:
///   R1  answer marker ("answer is", "answer:", "option", "choice") directly
///       followed by the option token
///   R2  parenthesized letter "(a)" / "(b)"             (text probes)
///   R3  ordinal phrase "first image", "image 2", ...   (image probes)
///   R4  verbatim echo of exactly one caption           (text probes)
///   R5  both options at the deciding level -> Unparseable
enum class ParseRule { kAnswerMarker, kParenthesizedLetter, kOrdinalPhrase, kCaptionEcho };

std::string_view rule_id(ParseRule rule);

struct ParsedChoice {
  Choice choice;
  ParseRule rule;
  std::size_t span_begin = 0;  // byte offsets into the original text
  std::size_t span_end = 0;

  friend bool operator==(const ParsedChoice&, const ParsedChoice&) = default;
};

struct Unparseable {
  /// True when R5 fired (both options matched), false when nothing matched.
  bool ambiguous = false;

  friend bool operator==(const Unparseable&, const Unparseable&) = default;
};

using ParseResult = std::variant<ParsedChoice, Unparseable>;

inline const ParsedChoice* parsed(const ParseResult& r) { return std::get_if<ParsedChoice>(&r); }

/// Extracts the model's binary choice. Matching is case-insensitive and
/// whitespace-insensitive. An explicit "answer is"/"answer:" statement
/// wins outright (the last one if repeated); otherwise the last sentence
/// containing any evidence decides, using the highest-priority rule present
/// in it. `caption_0`/`caption_1` are the captions as presented to the
/// model, i.e. options (A)/(B).
ParseResult extract_choice(std::string_view text, ProbeKind kind, std::string_view caption_0,
                           std::string_view caption_1);

inline ParseResult extract_choice(std::string_view text, ProbeKind kind,
                                  const ExamplePair& pair) {
  return extract_choice(text, kind, pair.caption_0, pair.caption_1);
}

/// "A", "B", "first", "second" or "unparseable".
std::string result_label(const ParseResult& r);

struct CorpusEntry {
  std::size_t line = 0;
  std::string text;
  ProbeKind kind = ProbeKind::kText;
  std::string caption_0;
  std::string caption_1;
  std::optional<Choice> expected;  // nullopt means "unparseable"
};

/// Line-delimited JSON with `text`, `kind`, `caption_0`, `caption_1`,
/// `expected`. Throws MalformedCorpus.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path);
std::vector<CorpusEntry> parse_corpus(std::string_view contents);

struct CorpusMismatch {
  std::size_t line;
  std::string expected;
  std::string actual;
};

struct CorpusReport {
  std::size_t total = 0;
  std::vector<CorpusMismatch> mismatches;
  std::vector<std::string> warnings;

  bool ok() const { return mismatches.empty(); }
  std::string to_string() const;
};

CorpusReport check_corpus(const std::vector<CorpusEntry>& corpus);

}  // namespace pairwise_vl
