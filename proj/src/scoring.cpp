// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/scoring.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "pairwise_vl/errors.hpp"

namespace pairwise_vl {
namespace {

using json = nlohmann::json;

int pair_score(std::span<const ProbeResult> results, ProbeKind kind) {
  std::array<const ProbeResult*, 2> by_index{nullptr, nullptr};
  std::int64_t pair_id = results.empty() ? -1 : results.front().probe.pair_id;
  for (const auto& r : results) {
    if (r.probe.kind != kind) continue;
    if (r.probe.pair_id != pair_id) {
      throw IncompleteProbeSet(pair_id, "results from more than one pair");
    }
    auto& slot = by_index[static_cast<std::size_t>(r.probe.index)];
    if (slot != nullptr) {
      throw IncompleteProbeSet(pair_id, "two results for " + r.probe.label());
    }
    slot = &r;
  }
  for (int i = 0; i < 2; ++i) {
    if (by_index[i] == nullptr) {
      throw IncompleteProbeSet(pair_id, "no result for " + std::string(to_string(kind)) + "-" +
                                            std::to_string(i));
    }
  }
  return (by_index[0]->correct && by_index[1]->correct) ? 1 : 0;
}

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

std::optional<int> read_optional_int(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<int>();
}

json percent_json(const std::optional<Percent>& p) { return p ? json(p->value()) : json(nullptr); }

std::optional<Percent> percent_from_json(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return Percent::from_hundredths(std::llround(it->get<double>() * 100.0));
}

}  // namespace

Percent Percent::of(std::size_t count, std::size_t total) {
  if (total == 0) return Percent(0);
  // round-half-up of 10000 * count / total, in integers
  auto c = static_cast<std::int64_t>(count);
  auto n = static_cast<std::int64_t>(total);
  return Percent((20000 * c + n) / (2 * n));
}

std::optional<Percent> Percent::parse(std::string_view text) {
  if (!text.empty() && text.back() == '%') text.remove_suffix(1);
  auto dot = text.find('.');
  if (dot == std::string_view::npos || text.size() - dot != 3) return std::nullopt;
  std::int64_t whole = 0;
  int frac = 0;
  auto w = text.substr(0, dot);
  auto f = text.substr(dot + 1);
  if (w.empty() || std::from_chars(w.data(), w.data() + w.size(), whole).ptr != w.data() + w.size() ||
      std::from_chars(f.data(), f.data() + f.size(), frac).ptr != f.data() + f.size() ||
      whole < 0) {
    return std::nullopt;
  }
  return Percent(whole * 100 + frac);
}

std::string Percent::str() const {
  auto frac = hundredths_ % 100;
  return std::to_string(hundredths_ / 100) + (frac < 10 ? ".0" : ".") + std::to_string(frac);
}

bool is_correct(const Probe& probe, const ParseResult& result) {
  const auto* p = parsed(result);
  return p != nullptr && p->choice == probe.correct_choice;
}

ProbeResult make_probe_result(const Probe& probe, std::string config_name, ModelResponse response,
                              ParseResult parsed) {
  ProbeResult r;
  r.probe = probe;
  r.config_name = std::move(config_name);
  r.response = std::move(response);
  r.parsed = std::move(parsed);
  r.correct = is_correct(probe, r.parsed);
  return r;
}

ProbeResult make_failed_result(const Probe& probe, std::string config_name, std::string error) {
  ProbeResult r;
  r.probe = probe;
  r.config_name = std::move(config_name);
  r.failed = true;
  r.error = std::move(error);
  return r;
}

int text_score_pair(std::span<const ProbeResult> results) {
  return pair_score(results, ProbeKind::kText);
}

int image_score_pair(std::span<const ProbeResult> results) {
  return pair_score(results, ProbeKind::kImage);
}

int group_score_pair(int text, int image) { return (text == 1 && image == 1) ? 1 : 0; }

json ScoreSummary::to_json() const {
  json pair_list = json::array();
  for (const auto& p : pairs) {
    pair_list.push_back({{"id", p.id},
                         {"tags", p.tags},
                         {"text", optional_int(p.text)},
                         {"image", optional_int(p.image)},
                         {"group", optional_int(p.group)}});
  }
  return {{"setting", to_string(setting)},
          {"n_pairs", n_pairs},
          {"text_score", percent_json(text_score)},
          {"image_score", percent_json(image_score)},
          {"group_score", percent_json(group_score)},
          {"text_correct", text_correct},
          {"image_correct", image_correct},
          {"group_correct", group_correct},
          {"probe_count", probe_count},
          {"unparseable_count", unparseable_count},
          {"failed_count", failed_count},
          {"pairs", std::move(pair_list)}};
}

ScoreSummary ScoreSummary::from_json(const json& j) {
  ScoreSummary s;
  auto setting = parse_setting(j.at("setting").get<std::string>());
  if (!setting) throw Error("summary has an unknown setting");
  s.setting = *setting;
  s.n_pairs = j.at("n_pairs").get<std::size_t>();
  s.text_score = percent_from_json(j, "text_score");
  s.image_score = percent_from_json(j, "image_score");
  s.group_score = percent_from_json(j, "group_score");
  s.text_correct = j.value("text_correct", std::size_t{0});
  s.image_correct = j.value("image_correct", std::size_t{0});
  s.group_correct = j.value("group_correct", std::size_t{0});
  s.probe_count = j.value("probe_count", std::size_t{0});
  s.unparseable_count = j.value("unparseable_count", std::size_t{0});
  s.failed_count = j.value("failed_count", std::size_t{0});
  for (const auto& p : j.at("pairs")) {
    PairScore ps;
    ps.id = p.at("id").get<std::int64_t>();
    ps.tags = p.value("tags", std::vector<std::string>{});
    ps.text = read_optional_int(p, "text");
    ps.image = read_optional_int(p, "image");
    ps.group = read_optional_int(p, "group");
    s.pairs.push_back(std::move(ps));
  }
  return s;
}

ScoreSummary aggregate(std::span<const ProbeResult> results, const Dataset& dataset,
                       const ScoringScope& scope) {
  std::unordered_map<std::int64_t, std::vector<ProbeResult>> by_pair;
  for (const auto& r : results) {
    if (!includes(scope.setting, r.probe.kind)) continue;
    by_pair[r.probe.pair_id].push_back(r);
  }

  std::optional<std::set<std::int64_t>> subset;
  if (scope.subset) subset.emplace(scope.subset->begin(), scope.subset->end());
  if (subset) {
    for (auto id : *subset) {
      if (dataset.find(id) == nullptr) throw IncompleteProbeSet(id, "subset id not in dataset");
    }
  }

  ScoreSummary s;
  s.setting = scope.setting;
  const bool text = includes(scope.setting, ProbeKind::kText);
  const bool image = includes(scope.setting, ProbeKind::kImage);
  for (const auto& pair : dataset.pairs) {
    if (subset && !subset->contains(pair.id)) continue;
    auto it = by_pair.find(pair.id);
    std::span<const ProbeResult> pr;
    if (it != by_pair.end()) pr = it->second;

    if (pr.empty()) throw IncompleteProbeSet(pair.id, "no results");

    PairScore ps;
    ps.id = pair.id;
    ps.tags = pair.tags;
    if (text) ps.text = text_score_pair(pr);
    if (image) ps.image = image_score_pair(pr);
    if (text && image) ps.group = group_score_pair(*ps.text, *ps.image);

    for (const auto& r : pr) {
      ++s.probe_count;
      if (r.failed) {
        ++s.failed_count;
      } else if (!parsed(r.parsed)) {
        ++s.unparseable_count;
      }
    }
    s.text_correct += ps.text.value_or(0);
    s.image_correct += ps.image.value_or(0);
    s.group_correct += ps.group.value_or(0);
    ++s.n_pairs;
    s.pairs.push_back(std::move(ps));
  }

  if (s.n_pairs > 0) {
    if (text) s.text_score = Percent::of(s.text_correct, s.n_pairs);
    if (image) s.image_score = Percent::of(s.image_correct, s.n_pairs);
    if (text && image) s.group_score = Percent::of(s.group_correct, s.n_pairs);
  }
  return s;
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kText: return "text";
    case ScoreKind::kImage: return "image";
    case ScoreKind::kGroup: return "group";
  }
  return "?";
}

std::optional<ScoreKind> parse_score_kind(std::string_view text) {
  if (text == "text") return ScoreKind::kText;
  if (text == "image") return ScoreKind::kImage;
  if (text == "group") return ScoreKind::kGroup;
  return std::nullopt;
}

int tag_block(std::string_view tag) {
  if (tag == "Symbolic" || tag == "Series" || tag == "Pragmatics") return 0;
  if (tag.starts_with("Adjective-")) return 1;
  if (tag == "Determiner-Numeral") return 2;
  if (tag == "Object-Centric-Spatial") return 3;
  if (tag == "Temporal Dynamics") return 4;
  return 5;
}

std::vector<TagAccuracy> tag_accuracy(const ScoreSummary& summary, ScoreKind kind) {
  std::map<TagLabel, std::pair<std::size_t, std::size_t>> counts;  // correct, tagged
  for (const auto& p : summary.pairs) {
    const auto& score = kind == ScoreKind::kText ? p.text
                        : kind == ScoreKind::kImage ? p.image
                                                    : p.group;
    if (!score) continue;
    for (const auto& tag : p.tags) {
      auto& [correct, tagged] = counts[tag];
      correct += static_cast<std::size_t>(*score);
      ++tagged;
    }
  }
  std::vector<TagAccuracy> out;
  for (const auto& [tag, c] : counts) {
    out.push_back({tag, c.first, c.second, Percent::of(c.first, c.second)});
  }
  std::sort(out.begin(), out.end(), [](const TagAccuracy& a, const TagAccuracy& b) {
    auto ba = tag_block(a.tag);
    auto bb = tag_block(b.tag);
    if (ba != bb) return ba < bb;
    if (a.tagged != b.tagged) return a.tagged > b.tagged;
    return a.tag < b.tag;
  });
  return out;
}

std::vector<TagAccuracy> tag_accuracy(std::span<const ProbeResult> results,
                                      const Dataset& dataset, const ScoringScope& scope,
                                      ScoreKind kind) {
  return tag_accuracy(aggregate(results, dataset, scope), kind);
}

}  // namespace pairwise_vl
