// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "pairwise_vl/answer_parser.hpp"
#include "pairwise_vl/dataset.hpp"
#include "pairwise_vl/errors.hpp"
#include "pairwise_vl/prompts.hpp"
#include "pairwise_vl/report.hpp"
#include "pairwise_vl/runner.hpp"
#include "util.hpp"

namespace pairwise_vl {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct RunArgs {
  std::string dataset;
  std::string images;
  std::string config;
  std::string backend;
  std::string setting = "both";
  int concurrency = 4;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string subset;
  bool fresh_descriptions = false;
  bool swap_options = false;
  std::string cache_dir;
  bool no_cache = false;
};

struct ReportArgs {
  std::vector<std::string> runs;
  std::string format = "markdown";
  std::string score = "text";
  std::string out_file;
};

// "1,2,3", or "@path" naming a file of ids separated by commas/whitespace.
std::vector<std::int64_t> parse_subset(const std::string& spec) {
  std::string text = spec;
  if (!spec.empty() && spec.front() == '@') {
    auto contents = detail::read_file(spec.substr(1));
    if (!contents) throw UsageError("cannot read subset file " + spec.substr(1));
    text = *contents;
  }
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<std::int64_t> ids;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v < 0) throw UsageError("bad subset id '" + tok + "'");
    ids.push_back(v);
  }
  if (ids.empty()) throw UsageError("--subset names no pairs");
  return ids;
}

std::string summary_text(const RunSummary& s) {
  std::ostringstream out;
  out << render_score_table(comparison_table({s}), ReportFormat::kText);
  out << "pairs " << s.scores.n_pairs << ", probes " << s.scores.probe_count << ", unparseable "
      << s.scores.unparseable_count << ", failed " << s.scores.failed_count << "\n";
  return out.str();
}

void emit(const std::string& text, const std::string& out_file, std::ostream& out) {
  if (out_file.empty()) {
    out << text;
    return;
  }
  std::ofstream f(out_file, std::ios::binary);
  if (!f) throw Error("cannot write " + out_file);
  f << text;
}

ReportFormat require_format(const std::string& name) {
  auto f = parse_report_format(name);
  if (!f) throw UsageError("unknown format '" + name + "'");
  return *f;
}

ScoreKind require_score(const std::string& name) {
  auto k = parse_score_kind(name);
  if (!k) throw UsageError("unknown score '" + name + "' (text, image or group)");
  return *k;
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

int do_validate(const std::string& dataset_path, const std::string& images, std::ostream& out,
                std::ostream& err) {
  fs::path root = images.empty() ? fs::path(dataset_path).parent_path() : fs::path(images);
  auto dataset = load_dataset(dataset_path, root);
  std::size_t warnings = 0;
  std::map<std::string, std::size_t> tags;
  for (const auto& pair : dataset.pairs) {
    for (const auto& w : validate_pair(pair)) {
      err << "warning: pair " << w.pair_id << ": " << w.message << "\n";
      ++warnings;
    }
    for (const auto& t : pair.tags) ++tags[t];
  }
  out << dataset.size() << " pairs, " << tags.size() << " tags, " << warnings << " warnings\n";
  out << "digest " << to_hex(dataset.digest) << "\n";
  return kExitOk;
}

int do_run(const RunArgs& a, const std::string& run_config, std::ostream& out) {
  auto config = PromptConfig::from_name(a.config);
  if (!config) throw UsageError("unknown prompt config '" + a.config + "'");
  auto setting = parse_setting(a.setting);
  if (!setting) throw UsageError("unknown setting '" + a.setting + "'");
  check_setting(*config, *setting);
  if (a.concurrency < 1) throw UsageError("--concurrency must be at least 1");

  RunOptions opts;
  opts.config = *config;
  opts.setting = *setting;
  opts.concurrency = a.concurrency;
  opts.seed = a.seed;
  if (!a.subset.empty()) opts.subset = parse_subset(a.subset);
  opts.fresh_descriptions = a.fresh_descriptions;
  opts.swap_options = a.swap_options;
  opts.cache_dir = a.cache_dir;
  opts.use_cache = !a.no_cache;
  opts.resolved_config = {{"dataset", a.dataset},
                          {"images", a.images},
                          {"config", a.config},
                          {"backend", a.backend},
                          {"setting", a.setting},
                          {"concurrency", a.concurrency},
                          {"seed", a.seed},
                          {"out", a.out_dir},
                          {"subset", a.subset},
                          {"fresh_descriptions", a.fresh_descriptions},
                          {"swap_options", a.swap_options},
                          {"cache_dir", a.cache_dir},
                          {"no_cache", a.no_cache},
                          {"run_config", run_config}};

  auto spec = BackendSpec::load(a.backend);
  fs::path root = a.images.empty() ? fs::path(a.dataset).parent_path() : fs::path(a.images);
  auto dataset = load_dataset(a.dataset, root);
  auto outcome = run(dataset, spec, opts, a.out_dir);
  out << "run " << outcome.run_dir.string() << ": " << outcome.stats.probes_executed
      << " probes executed, " << outcome.stats.probes_failed << " failed\n";
  if (outcome.summary) out << summary_text(*outcome.summary);
  return kExitOk;
}

int do_resume(const std::string& dir, int concurrency, bool no_cache, std::ostream& out) {
  ResumeOptions opts;
  if (concurrency > 0) opts.concurrency = concurrency;
  opts.use_cache = !no_cache;
  auto outcome = resume(dir, opts);
  out << "run " << dir << ": " << outcome.stats.probes_skipped << " already done, "
      << outcome.stats.probes_executed << " executed, " << outcome.stats.probes_failed
      << " failed\n";
  if (outcome.summary) out << summary_text(*outcome.summary);
  return kExitOk;
}

int do_parser_check(const std::string& corpus, std::ostream& out) {
  auto report = check_corpus(load_corpus(corpus));
  out << report.to_string();
  return report.ok() ? kExitOk : kExitFailure;
}

// CLI11 only reads config files attached to the root app, so `run --run-config`
// is expanded by hand: each TOML key becomes a flag placed before the user's own.
std::vector<std::string> splice_run_config(const std::vector<std::string>& args,
                                           const CLI::App& run_cmd) {
  if (args.empty() || args.front() != "run") return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--run-config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--run-config=", 0) == 0) path = args[i].substr(13);
  }
  if (path.empty()) return args;
  if (!fs::is_regular_file(path)) throw std::runtime_error("cannot read run config " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw UsageError("run config " + path + ": " + e.what());
  }
  std::vector<std::string> out{args.front()};
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    auto where = item.parents.empty() ? item.name : CLI::detail::join(item.parents, ".") + "." + item.name;
    const CLI::Option* opt = item.parents.empty() && item.name != "run-config"
                                 ? run_cmd.get_option_no_throw("--" + item.name)
                                 : nullptr;
    if (opt == nullptr) throw UsageError("run config " + path + ": unknown key '" + where + "'");
    if (item.inputs.size() != 1) {
      throw UsageError("run config " + path + ": key '" + where + "' needs one value");
    }
    // --name=value works for flags ("true"/"false") and options alike
    out.push_back("--" + item.name + "=" + item.inputs.front());
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Choice-based evaluation of image-caption matching with vision-chat models",
               "pairwise-vl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kHarnessVersion));

  std::string dataset_path;
  std::string images;
  auto* validate = app.add_subcommand("validate", "Check a dataset file and its images");
  validate->add_option("dataset", dataset_path, "Dataset JSONL")->required();
  validate->add_option("--images", images, "Image root (default: the dataset's directory)");

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "Start an evaluation run");
  std::string run_config;
  run_cmd->add_option("--run-config", run_config, "TOML file of run options; flags take precedence");
  // config values are spliced in ahead of the real flags, so the last one wins
  run_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  run_cmd->add_option("--dataset", ra.dataset, "Dataset JSONL")->required();
  run_cmd->add_option("--images", ra.images, "Image root (default: the dataset's directory)");
  std::vector<std::string> config_names;
  for (const auto& c : PromptConfig::all()) config_names.emplace_back(c.name());
  run_cmd->add_option("--config", ra.config, "Prompt config")
      ->required()
      ->check(CLI::IsMember(config_names));
  run_cmd->add_option("--backend", ra.backend, "Backend spec JSON")->required();
  run_cmd->add_option("--setting", ra.setting, "text, image or both")
      ->check(CLI::IsMember({"text", "image", "both"}))
      ->capture_default_str();
  run_cmd->add_option("--concurrency", ra.concurrency, "Worker count")->capture_default_str();
  run_cmd->add_option("--seed", ra.seed, "Run seed (feeds the uniform-random mock)")
      ->capture_default_str();
  run_cmd->add_option("--out", ra.out_dir, "Run directory")->required();
  run_cmd->add_option("--subset", ra.subset, "Pair ids \"1,2,3\" or @file");
  run_cmd->add_flag("--fresh-descriptions", ra.fresh_descriptions,
                    "Do not reuse cached turn-1 descriptions");
  run_cmd->add_flag("--swap-options", ra.swap_options, "Present the options in reverse order");
  run_cmd->add_option("--cache-dir", ra.cache_dir, "Response cache (default $PAIRWISE_VL_CACHE_DIR or ./cache)");
  run_cmd->add_flag("--no-cache", ra.no_cache, "Neither read nor write the response cache");

  std::string resume_dir;
  int resume_concurrency = 0;
  bool resume_no_cache = false;
  auto* resume_cmd = app.add_subcommand("resume", "Finish an interrupted run");
  resume_cmd->add_option("dir", resume_dir, "Run directory")->required();
  resume_cmd->add_option("--concurrency", resume_concurrency, "Worker count (default: as run)");
  resume_cmd->add_flag("--no-cache", resume_no_cache, "Neither read nor write the response cache");

  std::string score_dir;
  auto* score_cmd = app.add_subcommand("score", "Re-parse and re-score a run's transcript");
  score_cmd->add_option("dir", score_dir, "Run directory")->required();

  auto* report = app.add_subcommand("report", "Tables from finished runs");
  report->require_subcommand(1);
  ReportArgs rt;
  auto* table = report->add_subcommand("table", "Text/Image/Group scores, one row per run");
  table->add_option("runs", rt.runs, "Run directories")->required();
  table->add_option("--format", rt.format, "markdown, csv or text")->capture_default_str();
  table->add_option("--out", rt.out_file, "Write to a file instead of stdout");
  auto* tags = report->add_subcommand("tags", "Per-tag accuracy for one run");
  tags->add_option("run", rt.runs, "Run directory")->required()->expected(1);
  tags->add_option("--score", rt.score, "text, image or group")->capture_default_str();
  tags->add_option("--format", rt.format, "markdown, csv or text")->capture_default_str();
  tags->add_option("--out", rt.out_file, "Write to a file instead of stdout");
  auto* compare = report->add_subcommand("compare", "Tags x runs accuracy matrix (CSV)");
  compare->add_option("runs", rt.runs, "Run directories, in column order")->required();
  compare->add_option("--score", rt.score, "text, image or group")->capture_default_str();
  compare->add_option("--out", rt.out_file, "Write to a file instead of stdout");

  std::string corpus;
  auto* parser_check = app.add_subcommand("parser-check", "Run the answer parser over a corpus");
  parser_check->add_option("corpus", corpus, "Corpus JSONL")->required();

  auto* templates = app.add_subcommand("templates", "Print every prompt template");

  std::vector<std::string> expanded;
  try {
    expanded = splice_run_config(args, *run_cmd);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  try {
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) return do_validate(dataset_path, images, out, err);
    if (*run_cmd) return do_run(ra, run_config, out);
    if (*resume_cmd) return do_resume(resume_dir, resume_concurrency, resume_no_cache, out);
    if (*score_cmd) {
      out << summary_text(score_run(score_dir));
      return kExitOk;
    }
    if (*table) {
      emit(emit_score_table(as_paths(rt.runs), require_format(rt.format)), rt.out_file, out);
      return kExitOk;
    }
    if (*tags) {
      emit(emit_tag_table(rt.runs.at(0), require_score(rt.score), require_format(rt.format)),
           rt.out_file, out);
      return kExitOk;
    }
    if (*compare) {
      emit(emit_tag_comparison(as_paths(rt.runs), require_score(rt.score)), rt.out_file, out);
      return kExitOk;
    }
    if (*parser_check) return do_parser_check(corpus, out);
    if (*templates) {
      out << template_catalog();
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pairwise_vl
