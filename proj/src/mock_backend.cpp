// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "pairwise_vl/gateway.hpp"
#include "util.hpp"

namespace pairwise_vl {
namespace {

using json = nlohmann::json;

constexpr std::string_view kMockDescription =
    "shows the people, objects and attributes needed to tell the two options apart.";

// Names the image so that descriptions of different images differ, as a
// real model's would; otherwise text-only second turns would collide.
std::string mock_description(const MessageSequence& messages) {
  for (const auto& m : messages.messages) {
    for (const auto& part : m.parts) {
      if (const auto* img = std::get_if<ImagePart>(&part)) {
        return "The image " + to_hex(img->image.digest).substr(0, 12) + " " +
               std::string(kMockDescription);
      }
    }
  }
  return "The image " + std::string(kMockDescription);
}

std::string answer_text(Choice choice) {
  switch (choice) {
    case Choice::kA: return "The answer is (A).";
    case Choice::kB: return "The answer is (B).";
    case Choice::kFirst: return "The first image better aligns with the description.";
    case Choice::kSecond: return "The second image better aligns with the description.";
  }
  return {};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class ChoiceMock final : public Backend {
 public:
  ChoiceMock(MockKind kind, std::uint64_t seed) : kind_(kind), seed_(seed) {}

  ModelResponse send(const MessageSequence& messages, const RequestContext& ctx) override {
    ModelResponse r;
    r.finish_reason = "stop";
    if (ctx.description_request) {
      r.text = mock_description(messages);
      return r;
    }
    Choice correct = ctx.swapped ? flip(ctx.probe.correct_choice) : ctx.probe.correct_choice;
    switch (kind_) {
      case MockKind::kOracle:
        r.text = answer_text(correct);
        break;
      case MockKind::kAntiOracle:
        r.text = answer_text(flip(correct));
        break;
      default: {
        // Keyed by probe identity so worker scheduling cannot change the draw.
        std::uint64_t h = splitmix64(seed_);
        h = splitmix64(h ^ static_cast<std::uint64_t>(ctx.probe.pair_id));
        h = splitmix64(h ^ (ctx.probe.kind == ProbeKind::kText ? 0u : 2u) ^
                       static_cast<std::uint64_t>(ctx.probe.index));
        h = splitmix64(h ^ static_cast<std::uint64_t>(ctx.turn));
        r.text = answer_text(choice_for(ctx.probe.kind, static_cast<int>(h >> 63)));
        break;
      }
    }
    return r;
  }

  std::string cache_identity() const override {
    switch (kind_) {
      case MockKind::kOracle: return "mock:oracle";
      case MockKind::kAntiOracle: return "mock:anti-oracle";
      default: return "mock:uniform-random:" + std::to_string(seed_);
    }
  }

 private:
  MockKind kind_;
  std::uint64_t seed_;
};

class ScriptedMock final : public Backend {
 public:
  explicit ScriptedMock(ScriptTable table)
      : table_(std::move(table)), identity_("mock:scripted:" + to_hex(sha256(table_.to_jsonl()))) {}

  ModelResponse send(const MessageSequence& messages, const RequestContext& ctx) override {
    auto text = table_.find(messages.digest(), ctx);
    if (!text) {
      throw ScriptMiss("pair " + std::to_string(ctx.probe.pair_id) + " " + ctx.probe.label() +
                       " config " + ctx.config_name + " turn " + std::to_string(ctx.turn) +
                       " (request " + to_hex(messages.digest()) + ")");
    }
    ModelResponse r;
    r.text = *text;
    r.finish_reason = "stop";
    return r;
  }

  std::string cache_identity() const override { return identity_; }

 private:
  ScriptTable table_;
  std::string identity_;
};

}  // namespace

void ScriptTable::add_for_request(const Digest& request_digest, std::string text) {
  by_request_[to_hex(request_digest)] = std::move(text);
}

void ScriptTable::add(std::int64_t pair_id, const std::string& probe_label,
                      const std::string& config, int turn, std::string text) {
  by_probe_[{pair_id, probe_label, config, turn}] = std::move(text);
}

std::optional<std::string> ScriptTable::find(const Digest& request_digest,
                                             const RequestContext& ctx) const {
  if (auto it = by_request_.find(to_hex(request_digest)); it != by_request_.end()) {
    return it->second;
  }
  auto label = ctx.probe.label();
  if (auto it = by_probe_.find({ctx.probe.pair_id, label, ctx.config_name, ctx.turn});
      it != by_probe_.end()) {
    return it->second;
  }
  if (auto it = by_probe_.find({ctx.probe.pair_id, label, "*", ctx.turn}); it != by_probe_.end()) {
    return it->second;
  }
  return std::nullopt;
}

ScriptTable ScriptTable::load(const std::filesystem::path& path) {
  auto contents = detail::read_file(path);
  if (!contents) throw UsageError("cannot read script " + path.string());
  ScriptTable table;
  std::istringstream lines(*contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      auto j = json::parse(line);
      auto text = j.at("text").get<std::string>();
      if (j.contains("request_digest")) {
        auto d = digest_from_hex(j["request_digest"].get<std::string>());
        if (!d) throw UsageError(where + "bad request_digest");
        table.add_for_request(*d, std::move(text));
      } else {
        auto probe = j.at("probe").get<std::string>();
        if (!Probe::from_label(0, probe)) throw UsageError(where + "bad probe label " + probe);
        table.add(j.at("pair_id").get<std::int64_t>(), probe, j.value("config", "*"),
                  j.value("turn", 1), std::move(text));
      }
    } catch (const json::exception& e) {
      throw UsageError(where + e.what());
    }
  }
  return table;
}

std::string ScriptTable::to_jsonl() const {
  std::string out;
  for (const auto& [digest, text] : by_request_) {
    out += json{{"request_digest", digest}, {"text", text}}.dump() + "\n";
  }
  for (const auto& [k, text] : by_probe_) {
    const auto& [pair_id, probe, config, turn] = k;
    out += json{{"pair_id", pair_id}, {"probe", probe}, {"config", config}, {"turn", turn},
                {"text", text}}
               .dump() +
           "\n";
  }
  return out;
}

std::optional<MockKind> parse_mock_kind(std::string_view name) {
  if (name == "oracle") return MockKind::kOracle;
  if (name == "anti-oracle") return MockKind::kAntiOracle;
  if (name == "uniform-random") return MockKind::kUniformRandom;
  if (name == "scripted") return MockKind::kScripted;
  return std::nullopt;
}

std::unique_ptr<Backend> make_mock(MockSpec spec) {
  if (spec.kind == MockKind::kScripted) {
    return std::make_unique<ScriptedMock>(std::move(spec.table));
  }
  return std::make_unique<ChoiceMock>(spec.kind, spec.seed);
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (!spec.is_mock()) return make_http_backend(spec);
  MockSpec mock{*parse_mock_kind(spec.mock), seed, {}};
  if (mock.kind == MockKind::kScripted) mock.table = ScriptTable::load(spec.script);
  return make_mock(std::move(mock));
}

}  // namespace pairwise_vl
