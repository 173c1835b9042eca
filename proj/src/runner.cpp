// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/runner.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "pairwise_vl/errors.hpp"
#include "util.hpp"

namespace pairwise_vl {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

using ProbeKey = std::pair<std::int64_t, std::string>;  // pair id, probe label

json parse_result_json(const ParseResult& r) {
  if (const auto* p = parsed(r)) {
    return {{"choice", to_string(p->choice)},
            {"rule", rule_id(p->rule)},
            {"span", {p->span_begin, p->span_end}}};
  }
  return {{"choice", nullptr}, {"ambiguous", std::get<Unparseable>(r).ambiguous}};
}

std::optional<ParseRule> parse_rule_id(std::string_view id) {
  if (id == "R1") return ParseRule::kAnswerMarker;
  if (id == "R2") return ParseRule::kParenthesizedLetter;
  if (id == "R3") return ParseRule::kOrdinalPhrase;
  if (id == "R4") return ParseRule::kCaptionEcho;
  return std::nullopt;
}

ParseResult parse_result_from_json(const json& j) {
  if (j.at("choice").is_null()) return Unparseable{j.value("ambiguous", false)};
  auto choice = parse_choice(j.at("choice").get<std::string>());
  auto rule = parse_rule_id(j.at("rule").get<std::string>());
  if (!choice || !rule) throw Error("bad parsed result in transcript");
  ParsedChoice p{*choice, *rule, 0, 0};
  if (auto span = j.find("span"); span != j.end() && span->is_array() && span->size() == 2) {
    p.span_begin = (*span)[0].get<std::size_t>();
    p.span_end = (*span)[1].get<std::size_t>();
  }
  return p;
}

std::string new_run_id() {
  std::random_device rd;
  std::uint64_t r = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  auto stamp = detail::utc_now_iso8601();
  std::string compact;
  for (char c : stamp) {
    if (std::isdigit(static_cast<unsigned char>(c)) || c == 'T') compact += c;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(r));
  return "run-" + compact + "-" + std::string(hex, 8);
}

std::string file_digest_hex(const fs::path& path) {
  auto contents = detail::read_file(path);
  if (!contents) throw ManifestMismatch("dataset file " + path.string() + " is missing");
  return to_hex(sha256(*contents));
}

// Captions in the order the model saw them.
std::pair<std::string_view, std::string_view> presented_captions(const ExamplePair& pair,
                                                                 bool swapped) {
  if (swapped) return {pair.caption_1, pair.caption_0};
  return {pair.caption_0, pair.caption_1};
}

ParseResult parse_response(std::string_view text, const Probe& probe, const ExamplePair& pair,
                           bool swapped) {
  auto [c0, c1] = presented_captions(pair, swapped);
  auto result = extract_choice(text, probe.kind, c0, c1);
  if (auto* p = std::get_if<ParsedChoice>(&result)) {
    p->choice = presented(p->choice, RenderOptions{swapped});
  }
  return result;
}

std::vector<Probe> scoped_probes(const Dataset& dataset, Setting setting,
                                 const std::optional<std::vector<std::int64_t>>& subset) {
  std::optional<std::set<std::int64_t>> keep;
  if (subset) keep.emplace(subset->begin(), subset->end());
  std::vector<Probe> out;
  for (const auto& pair : dataset.pairs) {
    if (keep && !keep->contains(pair.id)) continue;
    for (auto& p : probes_for(pair, setting)) out.push_back(p);
  }
  return out;
}

struct ProbeState {
  std::optional<TranscriptRecord> turn[2];
};

std::map<ProbeKey, ProbeState> latest_records(const std::vector<TranscriptRecord>& records) {
  std::map<ProbeKey, ProbeState> out;
  for (const auto& r : records) {
    if (r.turn < 1 || r.turn > 2) continue;
    out[{r.probe.pair_id, r.probe.label()}].turn[r.turn - 1] = r;
  }
  return out;
}

// The record that settles a probe, if any: the final turn's latest record,
// or a failed turn-1 record in a two-turn run.
const TranscriptRecord* settling_record(const ProbeState& s, int turns) {
  const auto& last = s.turn[turns - 1];
  if (last) return &*last;
  if (turns == 2 && s.turn[0] && s.turn[0]->status == RecordStatus::kFailed) return &*s.turn[0];
  return nullptr;
}

class TranscriptWriter {
 public:
  explicit TranscriptWriter(const fs::path& path) : out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw Error("cannot open transcript " + path.string());
  }

  void append(const TranscriptRecord& record) {
    auto line = record.to_json().dump() + "\n";
    std::lock_guard lock(mu_);
    out_ << line;
    out_.flush();
    if (!out_) throw Error("transcript write failed");
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// Drops a trailing partial line left by an interrupted write, so appended
// records start on a fresh line.
void trim_partial_line(const fs::path& path) {
  auto contents = detail::read_file(path);
  if (!contents || contents->empty() || contents->back() == '\n') return;
  auto cut = contents->rfind('\n');
  fs::resize_file(path, cut == std::string::npos ? 0 : cut + 1);
}

struct Task {
  Probe probe;
  const ExamplePair* pair = nullptr;
  std::optional<std::string> description;  // turn-1 text already on record
};

struct ExecContext {
  const RunManifest& manifest;
  Gateway& gateway;
  TranscriptWriter& writer;
  std::mutex stats_mu;
  RunStats& stats;
};

TranscriptRecord base_record(const ExecContext& ctx, const Probe& probe, int turn) {
  TranscriptRecord r;
  r.run_id = ctx.manifest.run_id;
  r.probe = probe;
  r.config_name = std::string(ctx.manifest.config.name());
  r.turn = turn;
  r.swapped = ctx.manifest.swap_options;
  return r;
}

void execute(ExecContext& ctx, const Task& task) {
  const auto& m = ctx.manifest;
  const RenderOptions ro{m.swap_options};
  RequestContext rc{task.probe, std::string(m.config.name()), 1, false, m.swap_options};
  const int turns = m.config.turn_count();
  int turn = 1;
  MessageSequence messages;
  bool failed = false;

  auto send = [&](const MessageSequence& msgs, bool bypass) {
    auto response = ctx.gateway.complete(msgs, rc, CompleteOptions{bypass});
    std::lock_guard lock(ctx.stats_mu);
    ++ctx.stats.requests[turn - 1];
    if (response.cached) ++ctx.stats.cache_hits[turn - 1];
    return response;
  };

  try {
    std::optional<std::string> description = task.description;
    if (turns == 2 && !description) {
      rc.turn = 1;
      rc.description_request = true;
      messages = render_description_request(task.probe, *task.pair, ro);
      auto response = send(messages, m.fresh_descriptions);
      auto rec = base_record(ctx, task.probe, 1);
      rec.request_digest = to_hex(messages.digest());
      rec.response = response;
      rec.recorded_at = detail::utc_now_iso8601();
      ctx.writer.append(rec);
      description = response.text;
    }

    turn = turns;
    rc.turn = turns;
    rc.description_request = false;
    messages = turns == 1 ? render_one_turn(task.probe, *task.pair, m.config.cot, ro)
                          : render_second_turn(task.probe, *task.pair, *description, m.config.cot,
                                               m.config.second_turn_vision, ro);
    auto response = send(messages, false);
    auto rec = base_record(ctx, task.probe, turns);
    rec.request_digest = to_hex(messages.digest());
    rec.response = response;
    rec.parsed = parse_response(response.text, task.probe, *task.pair, m.swap_options);
    rec.correct = is_correct(task.probe, *rec.parsed);
    if (turns == 2) rec.description_digest = to_hex(sha256(*description));
    rec.recorded_at = detail::utc_now_iso8601();
    ctx.writer.append(rec);
  } catch (const AuthError&) {
    throw;  // every other probe would fail the same way
  } catch (const Error& e) {
    failed = true;
    auto rec = base_record(ctx, task.probe, turn);
    rec.status = RecordStatus::kFailed;
    rec.error = e.what();
    rec.recorded_at = detail::utc_now_iso8601();
    ctx.writer.append(rec);
  }

  std::lock_guard lock(ctx.stats_mu);
  ++ctx.stats.probes_executed;
  if (failed) ++ctx.stats.probes_failed;
}

void run_pool(ExecContext& ctx, const std::vector<Task>& tasks, int concurrency) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    while (!abort.load()) {
      auto i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        execute(ctx, tasks[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true);
      }
    }
  };

  auto n = static_cast<std::size_t>(std::max(1, concurrency));
  n = std::min(n, std::max<std::size_t>(1, tasks.size()));
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_summary(const fs::path& run_dir, const RunSummary& summary) {
  detail::write_file_atomic(run_dir / kSummaryFile, summary.to_json().dump(2) + "\n");
}

RunSummary summarize(const RunManifest& manifest, const Dataset& dataset,
                     const std::vector<TranscriptRecord>& records) {
  auto results = results_from_transcript(records, manifest, dataset);
  RunSummary s;
  s.config_name = std::string(manifest.config.name());
  s.label = std::string(manifest.config.label());
  s.dataset_digest = manifest.dataset_digest;
  s.subset_declared = manifest.subset.has_value();
  s.scores = aggregate(results, dataset, ScoringScope{manifest.setting, manifest.subset});
  return s;
}

std::shared_ptr<ResponseCache> open_cache(bool use_cache, const fs::path& dir) {
  if (!use_cache) return nullptr;
  return std::make_shared<ResponseCache>(dir.empty() ? default_cache_dir() : dir);
}

// Runs every unsettled (or failed) probe, then scores if all settled.
RunOutcome drive(const fs::path& run_dir, const RunManifest& manifest, const Dataset& dataset,
                 std::unique_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache,
                 const RetryPolicy& retry, int concurrency,
                 std::optional<std::size_t> probe_budget) {
  const auto transcript_path = run_dir / kTranscriptFile;
  trim_partial_line(transcript_path);
  auto existing = read_transcript(transcript_path);
  auto state = latest_records(existing);
  const int turns = manifest.config.turn_count();

  RunOutcome outcome;
  outcome.run_dir = run_dir;
  auto probes = scoped_probes(dataset, manifest.setting, manifest.subset);
  outcome.stats.probes_total = probes.size();

  std::vector<Task> tasks;
  for (const auto& probe : probes) {
    Task task{probe, dataset.find(probe.pair_id), std::nullopt};
    auto it = state.find({probe.pair_id, probe.label()});
    if (it != state.end()) {
      const auto* settled = settling_record(it->second, turns);
      if (settled && settled->status == RecordStatus::kOk) {
        ++outcome.stats.probes_skipped;
        continue;
      }
      const auto& t1 = it->second.turn[0];
      if (turns == 2 && t1 && t1->status == RecordStatus::kOk) task.description = t1->response.text;
    }
    tasks.push_back(std::move(task));
  }
  bool truncated = false;
  if (probe_budget && tasks.size() > *probe_budget) {
    tasks.resize(*probe_budget);
    truncated = true;
  }

  if (!tasks.empty()) {
    if (!backend) backend = make_backend(manifest.backend, manifest.seed);
    Gateway gateway(manifest.backend, std::move(backend), std::move(cache), retry);
    TranscriptWriter writer(transcript_path);
    ExecContext ctx{manifest, gateway, writer, {}, outcome.stats};
    run_pool(ctx, tasks, concurrency);
    outcome.stats.backend_calls = gateway.stats().backend_calls;
  }

  if (!truncated) {
    outcome.stats.complete = true;
    outcome.summary = summarize(manifest, dataset, read_transcript(transcript_path));
    write_summary(run_dir, *outcome.summary);
  }
  return outcome;
}

void check_subset(const Dataset& dataset, const std::optional<std::vector<std::int64_t>>& subset) {
  if (!subset) return;
  std::set<std::int64_t> seen;
  for (auto id : *subset) {
    if (dataset.find(id) == nullptr) {
      throw UsageError("subset id " + std::to_string(id) + " is not in the dataset");
    }
    if (!seen.insert(id).second) throw UsageError("subset id " + std::to_string(id) + " repeated");
  }
}

}  // namespace

void check_setting(const PromptConfig& config, Setting setting) {
  if (config.turns == Turns::kTwo && setting != Setting::kText) {
    throw InvalidSetting("two-turn config " + std::string(config.name()) +
                         " supports only the text setting, not " +
                         std::string(to_string(setting)));
  }
}

json RunManifest::to_json() const {
  json subset_json = subset ? json(*subset) : json("all");
  return {{"run_id", run_id},
          {"dataset_digest", dataset_digest},
          {"dataset_path", dataset_path.string()},
          {"image_root", image_root.string()},
          {"config", config.name()},
          {"config_label", config.label()},
          {"backend", backend.to_json()},
          {"setting", to_string(setting)},
          {"subset", subset_json},
          {"seed", seed},
          {"concurrency", concurrency},
          {"fresh_descriptions", fresh_descriptions},
          {"swap_options", swap_options},
          {"created_at", created_at},
          {"harness_version", harness_version},
          {"resolved_config", resolved_config}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.dataset_digest = j.at("dataset_digest").get<std::string>();
    m.dataset_path = j.at("dataset_path").get<std::string>();
    m.image_root = j.at("image_root").get<std::string>();
    auto config = PromptConfig::from_name(j.at("config").get<std::string>());
    if (!config) throw Error("manifest has an unknown config");
    m.config = *config;
    m.backend = BackendSpec::from_json(j.at("backend"));
    auto setting = parse_setting(j.at("setting").get<std::string>());
    if (!setting) throw Error("manifest has an unknown setting");
    m.setting = *setting;
    const auto& subset = j.at("subset");
    if (subset.is_array()) m.subset = subset.get<std::vector<std::int64_t>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.concurrency = j.value("concurrency", 4);
    m.fresh_descriptions = j.value("fresh_descriptions", false);
    m.swap_options = j.value("swap_options", false);
    m.created_at = j.value("created_at", "");
    m.harness_version = j.value("harness_version", "");
    m.resolved_config = j.value("resolved_config", json::object());
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& run_dir) {
  auto contents = detail::read_file(run_dir / kManifestFile);
  if (!contents) throw Error("no manifest in " + run_dir.string());
  try {
    return from_json(json::parse(*contents));
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
}

json TranscriptRecord::to_json() const {
  json j = {{"run_id", run_id},
            {"pair_id", probe.pair_id},
            {"probe", probe.label()},
            {"config", config_name},
            {"turn", turn},
            {"request_digest", request_digest},
            {"status", status == RecordStatus::kOk ? "ok" : "failed"}};
  if (status == RecordStatus::kFailed) {
    j["error"] = error;
  } else {
    j["response"] = {{"text", response.text},
                     {"finish_reason", response.finish_reason},
                     {"prompt_tokens", response.prompt_tokens ? json(*response.prompt_tokens)
                                                              : json(nullptr)},
                     {"completion_tokens", response.completion_tokens
                                               ? json(*response.completion_tokens)
                                               : json(nullptr)}};
    j["parsed"] = parsed ? parse_result_json(*parsed) : json(nullptr);
    j["correct"] = correct;
    j["timing"] = {{"latency", response.latency},
                   {"cached", response.cached},
                   {"attempts", response.attempt_count}};
  }
  j["swapped"] = swapped;
  if (!description_digest.empty()) j["description_digest"] = description_digest;
  j["recorded_at"] = recorded_at;
  return j;
}

TranscriptRecord TranscriptRecord::from_json(const json& j) {
  TranscriptRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  auto probe = Probe::from_label(j.at("pair_id").get<std::int64_t>(),
                                 j.at("probe").get<std::string>());
  if (!probe) throw Error("bad probe label in transcript");
  r.probe = *probe;
  r.config_name = j.at("config").get<std::string>();
  r.turn = j.at("turn").get<int>();
  r.request_digest = j.value("request_digest", "");
  r.status = j.at("status").get<std::string>() == "ok" ? RecordStatus::kOk : RecordStatus::kFailed;
  r.error = j.value("error", "");
  if (auto resp = j.find("response"); resp != j.end() && resp->is_object()) {
    r.response.text = resp->at("text").get<std::string>();
    r.response.finish_reason = resp->value("finish_reason", "");
    if (auto t = resp->find("prompt_tokens"); t != resp->end() && t->is_number_integer()) {
      r.response.prompt_tokens = t->get<std::int64_t>();
    }
    if (auto t = resp->find("completion_tokens"); t != resp->end() && t->is_number_integer()) {
      r.response.completion_tokens = t->get<std::int64_t>();
    }
  }
  if (auto p = j.find("parsed"); p != j.end() && p->is_object()) {
    r.parsed = parse_result_from_json(*p);
  }
  r.correct = j.value("correct", false);
  if (auto t = j.find("timing"); t != j.end() && t->is_object()) {
    r.response.latency = t->value("latency", 0.0);
    r.response.cached = t->value("cached", false);
    r.response.attempt_count = t->value("attempts", 1);
  }
  r.swapped = j.value("swapped", false);
  r.description_digest = j.value("description_digest", "");
  r.recorded_at = j.value("recorded_at", "");
  return r;
}

std::vector<TranscriptRecord> read_transcript(const fs::path& path) {
  std::vector<TranscriptRecord> out;
  auto contents = detail::read_file(path);
  if (!contents) return out;
  std::istringstream lines(*contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    const bool last = lines.peek() == std::char_traits<char>::eof();
    try {
      out.push_back(TranscriptRecord::from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (last && contents->back() != '\n') break;  // interrupted write
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json RunSummary::to_json() const {
  json j = {{"config", config_name},
            {"label", label},
            {"dataset_digest", dataset_digest},
            {"subset_declared", subset_declared}};
  j.update(scores.to_json());
  return j;
}

RunSummary RunSummary::from_json(const json& j) {
  RunSummary s;
  s.config_name = j.at("config").get<std::string>();
  s.label = j.at("label").get<std::string>();
  s.dataset_digest = j.at("dataset_digest").get<std::string>();
  s.subset_declared = j.value("subset_declared", false);
  s.scores = ScoreSummary::from_json(j);
  return s;
}

RunSummary RunSummary::load(const fs::path& run_dir) {
  auto contents = detail::read_file(run_dir / kSummaryFile);
  if (!contents) throw MissingSummary("no summary.json in " + run_dir.string());
  try {
    return from_json(json::parse(*contents));
  } catch (const json::exception& e) {
    throw MissingSummary("unreadable summary.json in " + run_dir.string() + ": " + e.what());
  }
}

std::vector<ProbeResult> results_from_transcript(const std::vector<TranscriptRecord>& records,
                                                 const RunManifest& manifest,
                                                 const Dataset& dataset) {
  auto state = latest_records(records);
  const int turns = manifest.config.turn_count();
  const auto config_name = std::string(manifest.config.name());
  std::vector<ProbeResult> out;
  for (const auto& probe : scoped_probes(dataset, manifest.setting, manifest.subset)) {
    auto it = state.find({probe.pair_id, probe.label()});
    if (it == state.end()) continue;
    const auto* rec = settling_record(it->second, turns);
    if (rec == nullptr) continue;
    if (rec->status == RecordStatus::kFailed) {
      out.push_back(make_failed_result(probe, config_name, rec->error));
      continue;
    }
    const auto& pair = *dataset.find(probe.pair_id);
    auto result = make_probe_result(probe, config_name, rec->response,
                                    parse_response(rec->response.text, probe, pair, rec->swapped));
    if (turns == 2 && it->second.turn[0]) result.description_text = it->second.turn[0]->response.text;
    out.push_back(std::move(result));
  }
  return out;
}

RunOutcome run(const Dataset& dataset, const BackendSpec& spec, const RunOptions& options,
               const fs::path& run_dir, std::unique_ptr<Backend> backend) {
  check_setting(options.config, options.setting);
  check_subset(dataset, options.subset);
  if (options.concurrency < 1) throw UsageError("concurrency must be at least 1");
  spec.validate();
  if (fs::exists(run_dir / kManifestFile)) {
    throw UsageError(run_dir.string() + " already holds a run; use resume");
  }
  fs::create_directories(run_dir);

  RunManifest m;
  m.run_id = new_run_id();
  m.dataset_digest = to_hex(dataset.digest);
  m.dataset_path = fs::absolute(dataset.source);
  m.image_root = fs::absolute(dataset.image_root);
  m.config = options.config;
  m.backend = spec;
  m.setting = options.setting;
  m.subset = options.subset;
  m.seed = options.seed;
  m.concurrency = options.concurrency;
  m.fresh_descriptions = options.fresh_descriptions;
  m.swap_options = options.swap_options;
  m.created_at = detail::utc_now_iso8601();
  m.resolved_config = options.resolved_config;
  detail::write_file_atomic(run_dir / kManifestFile, m.to_json().dump(2) + "\n");
  // create the transcript even if nothing runs
  std::ofstream(run_dir / kTranscriptFile, std::ios::app);

  return drive(run_dir, m, dataset, std::move(backend),
               open_cache(options.use_cache, options.cache_dir), options.retry,
               options.concurrency, options.probe_budget);
}

RunOutcome resume(const fs::path& run_dir, const ResumeOptions& options,
                  std::unique_ptr<Backend> backend) {
  auto m = RunManifest::load(run_dir);
  if (file_digest_hex(m.dataset_path) != m.dataset_digest) {
    throw ManifestMismatch("dataset " + m.dataset_path.string() +
                           " no longer matches the digest recorded in the manifest");
  }
  auto dataset = load_dataset(m.dataset_path, m.image_root);
  if (to_hex(dataset.digest) != m.dataset_digest) {
    throw ManifestMismatch("dataset changed while loading");
  }
  return drive(run_dir, m, dataset, std::move(backend),
               open_cache(options.use_cache, options.cache_dir), options.retry,
               options.concurrency.value_or(m.concurrency), options.probe_budget);
}

RunSummary score_run(const fs::path& run_dir) {
  auto m = RunManifest::load(run_dir);
  if (file_digest_hex(m.dataset_path) != m.dataset_digest) {
    throw ManifestMismatch("dataset " + m.dataset_path.string() +
                           " no longer matches the digest recorded in the manifest");
  }
  auto dataset = load_dataset(m.dataset_path, m.image_root, LoadOptions{false});
  auto summary = summarize(m, dataset, read_transcript(run_dir / kTranscriptFile));
  write_summary(run_dir, summary);
  return summary;
}

}  // namespace pairwise_vl
