// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "pairwise_vl/errors.hpp"
#include "pairwise_vl/runner.hpp"
#include "support.hpp"

namespace pairwise_vl {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using testing::read_text;
using testing::TempDir;
using namespace std::chrono_literals;

BackendSpec mock_spec(const std::string& kind) {
  BackendSpec s;
  s.mock = kind;
  s.model_name = kind;
  return s;
}

PromptConfig config(const char* name) { return *PromptConfig::from_name(name); }

RunOptions options(const char* name, Setting setting, const fs::path& cache) {
  RunOptions o;
  o.config = config(name);
  o.setting = setting;
  o.cache_dir = cache;
  o.retry = RetryPolicy{1ms, 2.0, 2ms};
  return o;
}

RunOptions uncached(const char* name, Setting setting) {
  auto o = options(name, setting, {});
  o.use_cache = false;
  return o;
}

std::vector<json> transcript_lines(const fs::path& run_dir) {
  std::vector<json> out;
  std::ifstream in(run_dir / std::string(kTranscriptFile));
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

/// Oracle that fails transport for chosen pairs, or every call with an
/// auth error.
class FaultyBackend : public Backend {
 public:
  FaultyBackend(std::vector<std::int64_t> bad_pairs, bool auth = false)
      : inner_(make_mock({MockKind::kOracle, 0, {}})), bad_(std::move(bad_pairs)), auth_(auth) {}
  ModelResponse send(const MessageSequence& m, const RequestContext& ctx) override {
    if (auth_) throw AuthError("key revoked");
    if (std::find(bad_.begin(), bad_.end(), ctx.probe.pair_id) != bad_.end()) {
      throw TransportError("connection reset");
    }
    return inner_->send(m, ctx);
  }
  std::string cache_identity() const override { return "faulty"; }

 private:
  std::unique_ptr<Backend> inner_;
  std::vector<std::int64_t> bad_;
  bool auth_;
};

class RunnerTest : public ::testing::Test {
 protected:
  Dataset dataset(std::size_t n) {
    auto path = testing::write_synthetic_dataset(dir_ / "data", n);
    return load_dataset(path, dir_ / "data");
  }

  TempDir dir_;
};

TEST_F(RunnerTest, OracleOneTurnBothSettings) {
  auto ds = dataset(10);
  auto out = run(ds, mock_spec("oracle"), options("one-turn", Setting::kBoth, dir_ / "cache"),
                 dir_ / "run");
  EXPECT_EQ(out.stats.probes_total, 40u);
  EXPECT_EQ(out.stats.probes_executed, 40u);
  EXPECT_TRUE(out.stats.complete);
  ASSERT_TRUE(out.summary.has_value());
  EXPECT_EQ(out.summary->scores.text_score->str(), "100.00");
  EXPECT_EQ(out.summary->scores.image_score->str(), "100.00");
  EXPECT_EQ(out.summary->scores.group_score->str(), "100.00");
  EXPECT_EQ(transcript_lines(dir_ / "run").size(), 40u);
  EXPECT_TRUE(fs::exists(dir_ / "run" / std::string(kManifestFile)));
  EXPECT_EQ(RunSummary::load(dir_ / "run").to_json(), out.summary->to_json());
}

TEST_F(RunnerTest, ProbeAndRecordCounts) {
  auto ds = dataset(7);
  for (auto setting : {Setting::kText, Setting::kImage, Setting::kBoth}) {
    for (const auto* name : {"one-turn", "one-turn-cot", "two-turn-text-qa", "two-turn-vision-cot"}) {
      auto cfg = config(name);
      if (cfg.turns == Turns::kTwo && setting != Setting::kText) continue;
      TempDir run_dir;
      auto out = run(ds, mock_spec("oracle"), uncached(name, setting), run_dir.path());
      std::size_t probes = 7 * (setting == Setting::kBoth ? 4 : 2);
      EXPECT_EQ(out.stats.probes_total, probes);
      EXPECT_EQ(transcript_lines(run_dir.path()).size(), probes * cfg.turn_count()) << name;
      EXPECT_EQ(out.summary->scores.probe_count, probes);
    }
  }
}

TEST_F(RunnerTest, TwoTurnOutsideTextSettingRejected) {
  auto ds = dataset(2);
  for (auto setting : {Setting::kImage, Setting::kBoth}) {
    EXPECT_THROW(run(ds, mock_spec("oracle"), uncached("two-turn-text-cot", setting), dir_ / "r"),
                 InvalidSetting);
  }
  EXPECT_FALSE(fs::exists(dir_ / "r" / std::string(kManifestFile)));
}

TEST_F(RunnerTest, TwoTurnFeedsDescriptionVerbatim) {
  auto ds = dataset(6);
  auto out = run(ds, mock_spec("oracle"), uncached("two-turn-vision-qa", Setting::kText),
                 dir_ / "run");
  EXPECT_EQ(out.summary->scores.text_score->str(), "100.00");
  std::map<std::pair<std::int64_t, std::string>, std::string> turn1;
  for (const auto& rec : read_transcript(dir_ / "run" / std::string(kTranscriptFile))) {
    auto key = std::make_pair(rec.probe.pair_id, rec.probe.label());
    if (rec.turn == 1) {
      EXPECT_FALSE(rec.parsed.has_value());
      turn1[key] = rec.response.text;
    } else {
      ASSERT_TRUE(turn1.count(key)) << "turn 2 before turn 1";
      EXPECT_EQ(rec.description_digest, to_hex(sha256(turn1[key])));
    }
  }
  EXPECT_EQ(turn1.size(), 12u);
}

TEST_F(RunnerTest, ConcurrencyDoesNotChangeResults) {
  auto ds = dataset(40);
  auto o1 = uncached("one-turn-cot", Setting::kBoth);
  o1.seed = 3;
  o1.concurrency = 1;
  auto o8 = o1;
  o8.concurrency = 8;
  auto a = run(ds, mock_spec("uniform-random"), o1, dir_ / "c1");
  auto b = run(ds, mock_spec("uniform-random"), o8, dir_ / "c8");
  EXPECT_EQ(read_text(dir_ / "c1" / std::string(kSummaryFile)),
            read_text(dir_ / "c8" / std::string(kSummaryFile)));
  std::map<std::string, std::string> parsed_a;
  for (const auto& r : read_transcript(dir_ / "c1" / std::string(kTranscriptFile))) {
    parsed_a[std::to_string(r.probe.pair_id) + r.probe.label()] = result_label(*r.parsed);
  }
  for (const auto& r : read_transcript(dir_ / "c8" / std::string(kTranscriptFile))) {
    EXPECT_EQ(parsed_a.at(std::to_string(r.probe.pair_id) + r.probe.label()),
              result_label(*r.parsed));
  }
  // uniform guessing should land strictly between the mocks' extremes
  EXPECT_GT(a.summary->scores.text_score->hundredths(), 0);
  EXPECT_LT(a.summary->scores.text_score->hundredths(), 10000);
}

TEST_F(RunnerTest, InterruptedRunResumesToIdenticalSummary) {
  auto ds = dataset(25);
  auto o = uncached("two-turn-text-cot", Setting::kText);
  o.seed = 9;
  run(ds, mock_spec("uniform-random"), o, dir_ / "full");

  auto partial_opts = o;
  partial_opts.probe_budget = 13;
  auto partial = run(ds, mock_spec("uniform-random"), partial_opts, dir_ / "cut");
  EXPECT_FALSE(partial.stats.complete);
  EXPECT_FALSE(partial.summary.has_value());
  EXPECT_FALSE(fs::exists(dir_ / "cut" / std::string(kSummaryFile)));
  EXPECT_THROW(RunSummary::load(dir_ / "cut"), MissingSummary);

  // a write cut short by the kill
  {
    std::ofstream t(dir_ / "cut" / std::string(kTranscriptFile), std::ios::app);
    t << R"j({"run_id":"x","pair_id":1,"probe":"te)j";
  }
  ResumeOptions ro;
  ro.use_cache = false;
  auto resumed = resume(dir_ / "cut", ro);
  EXPECT_EQ(resumed.stats.probes_skipped, 13u);
  EXPECT_EQ(resumed.stats.probes_executed, 50u - 13u);
  EXPECT_TRUE(resumed.stats.complete);
  EXPECT_EQ(read_text(dir_ / "full" / std::string(kSummaryFile)),
            read_text(dir_ / "cut" / std::string(kSummaryFile)));
}

TEST_F(RunnerTest, ResumeOfCompleteRunSendsNothing) {
  auto ds = dataset(5);
  run(ds, mock_spec("oracle"), uncached("one-turn", Setting::kBoth), dir_ / "run");
  auto before = read_text(dir_ / "run" / std::string(kTranscriptFile));
  ResumeOptions ro;
  ro.use_cache = false;
  auto out = resume(dir_ / "run", ro);
  EXPECT_EQ(out.stats.probes_executed, 0u);
  EXPECT_EQ(out.stats.backend_calls, 0u);
  EXPECT_EQ(out.stats.probes_skipped, 20u);
  EXPECT_EQ(read_text(dir_ / "run" / std::string(kTranscriptFile)), before);
}

TEST_F(RunnerTest, EditedDatasetIsManifestMismatch) {
  auto ds = dataset(3);
  run(ds, mock_spec("oracle"), uncached("one-turn", Setting::kText), dir_ / "run");
  std::ofstream(dir_ / "data" / "dataset.jsonl", std::ios::app) << "\n";
  EXPECT_THROW(resume(dir_ / "run"), ManifestMismatch);
  EXPECT_THROW(score_run(dir_ / "run"), ManifestMismatch);
}

TEST_F(RunnerTest, ExistingRunDirectoryRejected) {
  auto ds = dataset(2);
  run(ds, mock_spec("oracle"), uncached("one-turn", Setting::kText), dir_ / "run");
  EXPECT_THROW(run(ds, mock_spec("oracle"), uncached("one-turn", Setting::kText), dir_ / "run"),
               UsageError);
}

TEST_F(RunnerTest, FailedProbesScoredWrongThenRetriedOnResume) {
  auto ds = dataset(4);
  auto o = uncached("one-turn", Setting::kText);
  auto out = run(ds, mock_spec("oracle"), o, dir_ / "run",
                 std::make_unique<FaultyBackend>(std::vector<std::int64_t>{2}));
  EXPECT_EQ(out.stats.probes_failed, 2u);
  EXPECT_EQ(out.summary->scores.failed_count, 2u);
  EXPECT_EQ(out.summary->scores.text_score->str(), "75.00");
  int failed_lines = 0;
  for (const auto& line : transcript_lines(dir_ / "run")) {
    if (line["status"] == "failed") {
      ++failed_lines;
      EXPECT_NE(line["error"].get<std::string>().find("connection reset"), std::string::npos);
    }
  }
  EXPECT_EQ(failed_lines, 2);

  ResumeOptions ro;
  ro.use_cache = false;
  auto fixed = resume(dir_ / "run", ro, make_mock({MockKind::kOracle, 0, {}}));
  EXPECT_EQ(fixed.stats.probes_executed, 2u);
  EXPECT_EQ(fixed.summary->scores.failed_count, 0u);
  EXPECT_EQ(fixed.summary->scores.text_score->str(), "100.00");
}

TEST_F(RunnerTest, AuthErrorAbortsRun) {
  auto ds = dataset(4);
  EXPECT_THROW(run(ds, mock_spec("oracle"), uncached("one-turn", Setting::kText), dir_ / "run",
                   std::make_unique<FaultyBackend>(std::vector<std::int64_t>{}, true)),
               AuthError);
  EXPECT_FALSE(fs::exists(dir_ / "run" / std::string(kSummaryFile)));
}

TEST_F(RunnerTest, DescriptionsSharedAcrossSecondTurnVariants) {
  auto ds = dataset(5);
  auto cache = dir_ / "cache";
  auto a = run(ds, mock_spec("oracle"), options("two-turn-text-qa", Setting::kText, cache),
               dir_ / "a");
  EXPECT_EQ(a.stats.cache_hits[0], 0u);
  EXPECT_EQ(a.stats.requests[0], 10u);
  auto b = run(ds, mock_spec("oracle"), options("two-turn-vision-cot", Setting::kText, cache),
               dir_ / "b");
  EXPECT_EQ(b.stats.requests[0], 10u);
  EXPECT_EQ(b.stats.cache_hits[0], 10u);
  EXPECT_EQ(b.stats.cache_hits[1], 0u);

  auto fresh = options("two-turn-text-cot", Setting::kText, cache);
  fresh.fresh_descriptions = true;
  auto c = run(ds, mock_spec("oracle"), fresh, dir_ / "c");
  EXPECT_EQ(c.stats.cache_hits[0], 0u);
}

TEST_F(RunnerTest, SwappedOptionsUndoneBeforeScoring) {
  auto ds = dataset(5);
  auto o = uncached("one-turn", Setting::kBoth);
  o.swap_options = true;
  auto good = run(ds, mock_spec("oracle"), o, dir_ / "good");
  EXPECT_EQ(good.summary->scores.group_score->str(), "100.00");
  auto bad = run(ds, mock_spec("anti-oracle"), o, dir_ / "bad");
  EXPECT_EQ(bad.summary->scores.text_score->str(), "0.00");
  for (const auto& line : transcript_lines(dir_ / "good")) EXPECT_TRUE(line["swapped"].get<bool>());
}

TEST_F(RunnerTest, ScoreIsReproducible) {
  auto ds = dataset(8);
  auto o = uncached("one-turn", Setting::kBoth);
  o.seed = 1;
  run(ds, mock_spec("uniform-random"), o, dir_ / "run");
  auto original = read_text(dir_ / "run" / std::string(kSummaryFile));
  score_run(dir_ / "run");
  auto once = read_text(dir_ / "run" / std::string(kSummaryFile));
  score_run(dir_ / "run");
  EXPECT_EQ(once, read_text(dir_ / "run" / std::string(kSummaryFile)));
  EXPECT_EQ(once, original);
}

TEST_F(RunnerTest, ScoreNeedsNoImages) {
  auto ds = dataset(3);
  run(ds, mock_spec("oracle"), uncached("one-turn", Setting::kImage), dir_ / "run");
  fs::remove_all(dir_ / "data" / "images");
  EXPECT_EQ(score_run(dir_ / "run").scores.image_score->str(), "100.00");
}

TEST_F(RunnerTest, SubsetRestrictsPairs) {
  auto ds = dataset(6);
  auto o = uncached("one-turn", Setting::kText);
  o.subset = std::vector<std::int64_t>{1, 4};
  auto out = run(ds, mock_spec("oracle"), o, dir_ / "run");
  EXPECT_EQ(out.stats.probes_total, 4u);
  EXPECT_EQ(out.summary->scores.n_pairs, 2u);
  EXPECT_TRUE(out.summary->subset_declared);
  o.subset = std::vector<std::int64_t>{99};
  EXPECT_THROW(run(ds, mock_spec("oracle"), o, dir_ / "bad"), UsageError);
}

TEST_F(RunnerTest, ScriptedReplayIsDeterministic) {
  auto ds = dataset(4);
  std::string script;
  for (const auto& pair : ds.pairs) {
    for (const auto& probe : probes_for(pair, Setting::kText)) {
      auto text = (pair.id + probe.index) % 3 == 0 ? "I think the answer is (B)." : "(A)";
      script += json{{"pair_id", pair.id}, {"probe", probe.label()}, {"text", text}}.dump() + "\n";
    }
  }
  testing::write_text(dir_ / "script.jsonl", script);
  auto spec = BackendSpec::load(testing::write_backend_spec(
      dir_ / "spec.json", {{"mock", "scripted"}, {"script", "script.jsonl"}}));
  run(ds, spec, uncached("one-turn", Setting::kText), dir_ / "a");
  run(ds, spec, uncached("one-turn", Setting::kText), dir_ / "b");
  EXPECT_EQ(read_text(dir_ / "a" / std::string(kSummaryFile)),
            read_text(dir_ / "b" / std::string(kSummaryFile)));
  // only pair 2 gets (A) for text-0 and (B) for text-1
  EXPECT_EQ(RunSummary::load(dir_ / "a").scores.text_correct, 1u);
}

TEST_F(RunnerTest, ScriptMissRecordedAsFailure) {
  auto ds = dataset(2);
  testing::write_text(dir_ / "script.jsonl", "");
  auto spec = BackendSpec::load(testing::write_backend_spec(
      dir_ / "spec.json", {{"mock", "scripted"}, {"script", "script.jsonl"}}));
  auto out = run(ds, spec, uncached("one-turn", Setting::kText), dir_ / "run");
  EXPECT_EQ(out.summary->scores.failed_count, 4u);
}

TEST(Transcript, TruncatedFinalLineIgnoredButCorruptMiddleThrows) {
  TempDir dir;
  TranscriptRecord rec;
  rec.run_id = "r";
  rec.probe = Probe{1, ProbeKind::kText, 0, Choice::kA};
  rec.config_name = "one-turn";
  rec.request_digest = to_hex(sha256("x"));
  rec.response.text = "The answer is (A).";
  rec.parsed = ParseResult(ParsedChoice{Choice::kA, ParseRule::kAnswerMarker, 14, 17});
  rec.correct = true;
  auto line = rec.to_json().dump() + "\n";
  testing::write_text(dir / "t.jsonl", line + line.substr(0, 20));
  auto records = read_transcript(dir / "t.jsonl");
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].response.text, rec.response.text);
  EXPECT_EQ(*records[0].parsed, *rec.parsed);
  EXPECT_EQ(records[0].probe, rec.probe);

  testing::write_text(dir / "t.jsonl", line.substr(0, 20) + "\n" + line);
  EXPECT_THROW(read_transcript(dir / "t.jsonl"), Error);
}

TEST(Manifest, JsonRoundTrip) {
  RunManifest m;
  m.run_id = "abc";
  m.dataset_digest = to_hex(sha256("d"));
  m.dataset_path = "/data/d.jsonl";
  m.image_root = "/data";
  m.config = *PromptConfig::from_name("two-turn-vision-qa");
  m.backend = mock_spec("oracle");
  m.setting = Setting::kText;
  m.subset = std::vector<std::int64_t>{3, 1};
  m.seed = 42;
  m.swap_options = true;
  auto back = RunManifest::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.subset, m.subset);
}

}  // namespace
}  // namespace pairwise_vl
