// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwise_vl/answer_parser.hpp"
#include "pairwise_vl/dataset.hpp"
#include "pairwise_vl/gateway.hpp"

namespace pairwise_vl {

/// A percentage held exactly in hundredths, so "87.80" is never a float
/// approximation. Built from counts with round-half-up.
class Percent {
 public:
  constexpr Percent() = default;

  static Percent of(std::size_t count, std::size_t total);
  static constexpr Percent from_hundredths(std::int64_t h) { return Percent(h); }
  static std::optional<Percent> parse(std::string_view text);

  constexpr std::int64_t hundredths() const noexcept { return hundredths_; }
  double value() const noexcept { return static_cast<double>(hundredths_) / 100.0; }
  std::string str() const;  // "87.80"

  friend constexpr auto operator<=>(const Percent&, const Percent&) = default;

 private:
  constexpr explicit Percent(std::int64_t h) : hundredths_(h) {}
  std::int64_t hundredths_ = 0;
};

struct ProbeResult {
  Probe probe;
  std::string config_name;
  ModelResponse response;
  ParseResult parsed = Unparseable{};
  bool correct = false;
  bool failed = false;  // the request never succeeded; scored wrong
  std::string error;
  std::optional<std::string> description_text;
};

/// `parsed` is in dataset order (any option swap already undone).
bool is_correct(const Probe& probe, const ParseResult& parsed);

ProbeResult make_probe_result(const Probe& probe, std::string config_name, ModelResponse response,
                              ParseResult parsed);
ProbeResult make_failed_result(const Probe& probe, std::string config_name, std::string error);

/// 1 iff the pair's two text probes are both correct. Needs exactly one
/// result per image index; throws IncompleteProbeSet otherwise.
int text_score_pair(std::span<const ProbeResult> results);
/// 1 iff the pair's two image probes are both correct.
int image_score_pair(std::span<const ProbeResult> results);
int group_score_pair(int text, int image);

struct PairScore {
  std::int64_t id = 0;
  std::vector<TagLabel> tags;
  std::optional<int> text;
  std::optional<int> image;
  std::optional<int> group;
};

/// What an aggregate covers. With a declared subset only those pairs count;
/// otherwise every dataset pair must have a complete probe set.
struct ScoringScope {
  Setting setting = Setting::kBoth;
  std::optional<std::vector<std::int64_t>> subset;
};

struct ScoreSummary {
  Setting setting = Setting::kBoth;
  std::size_t n_pairs = 0;
  std::optional<Percent> text_score;
  std::optional<Percent> image_score;
  std::optional<Percent> group_score;
  std::size_t text_correct = 0;
  std::size_t image_correct = 0;
  std::size_t group_correct = 0;
  std::size_t probe_count = 0;
  std::size_t unparseable_count = 0;  // answered but no choice extracted
  std::size_t failed_count = 0;
  std::vector<PairScore> pairs;  // dataset order

  nlohmann::json to_json() const;
  static ScoreSummary from_json(const nlohmann::json& j);
};

ScoreSummary aggregate(std::span<const ProbeResult> results, const Dataset& dataset,
                       const ScoringScope& scope);

enum class ScoreKind { kText, kImage, kGroup };

std::string_view to_string(ScoreKind kind);
std::optional<ScoreKind> parse_score_kind(std::string_view text);

struct TagAccuracy {
  TagLabel tag;
  std::size_t correct = 0;
  std::size_t tagged = 0;
  Percent accuracy;
};

/// Per-tag accuracy over the pairs that have a `kind` score. Tags with no
/// scored pairs are omitted. Ordered by tag_block, then by descending
/// tagged count, then by name.
std::vector<TagAccuracy> tag_accuracy(const ScoreSummary& summary, ScoreKind kind);
std::vector<TagAccuracy> tag_accuracy(std::span<const ProbeResult> results,
                                      const Dataset& dataset, const ScoringScope& scope,
                                      ScoreKind kind);

/// Error-analysis category block for a tag: 0 = Symbolic/Series/
/// Pragmatics, 1 = Adjective-*, 2 = Determiner-Numeral,
/// 3 = Object-Centric-Spatial, 4 = Temporal Dynamics, 5 = anything else.
int tag_block(std::string_view tag);

}  // namespace pairwise_vl
