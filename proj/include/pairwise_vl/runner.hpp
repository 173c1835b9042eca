// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwise_vl/answer_parser.hpp"
#include "pairwise_vl/dataset.hpp"
#include "pairwise_vl/gateway.hpp"
#include "pairwise_vl/prompts.hpp"
#include "pairwise_vl/scoring.hpp"

namespace pairwise_vl {

inline constexpr std::string_view kHarnessVersion = "0.1.0";

inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kTranscriptFile = "transcripts.jsonl";
inline constexpr std::string_view kSummaryFile = "summary.json";

struct RunManifest {
  std::string run_id;
  std::string dataset_digest;  // hex
  std::filesystem::path dataset_path;
  std::filesystem::path image_root;
  PromptConfig config;
  BackendSpec backend;
  Setting setting = Setting::kBoth;
  std::optional<std::vector<std::int64_t>> subset;  // nullopt = all pairs
  std::uint64_t seed = 0;
  int concurrency = 4;
  bool fresh_descriptions = false;
  bool swap_options = false;
  std::string created_at;
  std::string harness_version{kHarnessVersion};
  nlohmann::json resolved_config = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  static RunManifest load(const std::filesystem::path& run_dir);
};

enum class RecordStatus { kOk, kFailed };

struct TranscriptRecord {
  std::string run_id;
  Probe probe;
  std::string config_name;
  int turn = 1;
  std::string request_digest;  // hex of MessageSequence::digest
  RecordStatus status = RecordStatus::kOk;
  std::string error;
  ModelResponse response;
  /// Dataset order. Absent for turn-1 description records and failures.
  std::optional<ParseResult> parsed;
  bool correct = false;
  bool swapped = false;
  /// Turn 2 only: sha256 of the description text that was sent.
  std::string description_digest;
  std::string recorded_at;

  nlohmann::json to_json() const;
  static TranscriptRecord from_json(const nlohmann::json& j);
};

/// Reads a transcript file. A final line cut short by an interrupted write
/// is ignored; a bad line anywhere else throws Error.
std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path);

struct RunOptions {
  PromptConfig config;
  Setting setting = Setting::kBoth;
  int concurrency = 4;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::int64_t>> subset;
  bool fresh_descriptions = false;
  bool swap_options = false;

  /// Empty means default_cache_dir(). Ignored when `use_cache` is false.
  std::filesystem::path cache_dir;
  bool use_cache = true;
  RetryPolicy retry;

  /// Stop after this many probes have been attempted, leaving the run
  /// incomplete as if it had been killed.
  std::optional<std::size_t> probe_budget;

  nlohmann::json resolved_config = nlohmann::json::object();
};

struct RunStats {
  std::size_t probes_total = 0;
  std::size_t probes_skipped = 0;  // already complete in the transcript
  std::size_t probes_executed = 0;
  std::size_t probes_failed = 0;
  /// Index 0 = turn 1, 1 = turn 2.
  std::array<std::size_t, 2> requests{};
  std::array<std::size_t, 2> cache_hits{};
  std::uint64_t backend_calls = 0;
  bool complete = false;
};

/// What summary.json holds. No run id or timestamps, so re-scoring the
/// same transcript always yields the same bytes.
struct RunSummary {
  std::string config_name;
  std::string label;
  std::string dataset_digest;
  bool subset_declared = false;
  ScoreSummary scores;

  nlohmann::json to_json() const;
  static RunSummary from_json(const nlohmann::json& j);
  /// Throws MissingSummary.
  static RunSummary load(const std::filesystem::path& run_dir);
};

struct RunOutcome {
  std::filesystem::path run_dir;
  RunStats stats;
  std::optional<RunSummary> summary;  // set once every probe has settled
};

/// Executes every probe and writes manifest.json, transcripts.jsonl and
/// summary.json under `run_dir`. `backend` overrides the one `spec`
/// describes. Throws InvalidSetting for two-turn configs outside the text
/// setting and UsageError if `run_dir` already holds a manifest.
RunOutcome run(const Dataset& dataset, const BackendSpec& spec, const RunOptions& options,
               const std::filesystem::path& run_dir, std::unique_ptr<Backend> backend = nullptr);

/// Throws InvalidSetting unless the config can run under `setting`
/// (two-turn configs are text-only).
void check_setting(const PromptConfig& config, Setting setting);

struct ResumeOptions {
  std::optional<int> concurrency;
  std::filesystem::path cache_dir;
  bool use_cache = true;
  RetryPolicy retry;
  std::optional<std::size_t> probe_budget;
};

/// Runs whatever the transcript lacks (failed probes are retried).
/// Throws ManifestMismatch when the dataset file changed.
RunOutcome resume(const std::filesystem::path& run_dir, const ResumeOptions& options = {},
                  std::unique_ptr<Backend> backend = nullptr);

/// Re-parses and re-scores the transcript and rewrites summary.json.
/// Never sends a request and never reads images.
RunSummary score_run(const std::filesystem::path& run_dir);

/// Final per-probe results from a transcript, re-parsed with the current
/// parser. Probes without a final record are absent.
std::vector<ProbeResult> results_from_transcript(const std::vector<TranscriptRecord>& records,
                                                 const RunManifest& manifest,
                                                 const Dataset& dataset);

}  // namespace pairwise_vl
