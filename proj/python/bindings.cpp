// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pairwise_vl/answer_parser.hpp"
#include "pairwise_vl/cli.hpp"
#include "pairwise_vl/dataset.hpp"
#include "pairwise_vl/errors.hpp"
#include "pairwise_vl/prompts.hpp"
#include "pairwise_vl/report.hpp"
#include "pairwise_vl/runner.hpp"
#include "pairwise_vl/scoring.hpp"

namespace py = pybind11;
namespace pv = pairwise_vl;
namespace fs = std::filesystem;

namespace {

// nlohmann::json -> Python object via the json module.
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

pv::ProbeKind kind_arg(const std::string& kind) {
  auto k = pv::parse_probe_kind(kind);
  if (!k) throw pv::UsageError("kind must be 'text' or 'image'");
  return *k;
}

pv::Setting setting_arg(const std::string& setting) {
  auto s = pv::parse_setting(setting);
  if (!s) throw pv::UsageError("setting must be text, image or both");
  return *s;
}

pv::ReportFormat format_arg(const std::string& format) {
  auto f = pv::parse_report_format(format);
  if (!f) throw pv::UsageError("format must be markdown, csv or text");
  return *f;
}

pv::ScoreKind score_arg(const std::string& score) {
  auto k = pv::parse_score_kind(score);
  if (!k) throw pv::UsageError("score must be text, image or group");
  return *k;
}

py::object parse_result(const pv::ParseResult& r) {
  const auto* p = pv::parsed(r);
  if (p == nullptr) return py::none();
  py::dict d;
  d["choice"] = std::string(pv::to_string(p->choice));
  d["rule"] = std::string(pv::rule_id(p->rule));
  d["span"] = py::make_tuple(p->span_begin, p->span_end);
  return d;
}

py::list messages_to_python(const pv::MessageSequence& seq) {
  py::list out;
  for (const auto& m : seq.messages) {
    py::list parts;
    for (const auto& part : m.parts) {
      py::dict d;
      if (const auto* t = std::get_if<pv::TextPart>(&part)) {
        d["type"] = "text";
        d["text"] = t->text;
      } else {
        const auto& img = std::get<pv::ImagePart>(part).image;
        d["type"] = "image";
        d["locator"] = img.locator;
        d["digest"] = pv::to_hex(img.digest);
      }
      parts.append(d);
    }
    py::dict msg;
    msg["role"] = std::string(pv::to_string(m.role));
    msg["parts"] = parts;
    out.append(msg);
  }
  return out;
}

pv::PromptConfig config_arg(const std::string& name) {
  auto c = pv::PromptConfig::from_name(name);
  if (!c) throw pv::UsageError("unknown prompt config '" + name + "'");
  return *c;
}

}  // namespace

PYBIND11_MODULE(_pairwise_vl, m) {
  m.doc() = "Choice-based image-caption matching evaluation (C++ core)";
  m.attr("__version__") = std::string(pv::kHarnessVersion);

  static py::exception<pv::Error> error(m, "Error");
  static py::exception<pv::UsageError> usage_error(m, "UsageError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pv::UsageError& e) {
      py::set_error(usage_error, e.what());
    } catch (const pv::Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("config_names", [] {
    std::vector<std::string> out;
    for (const auto& c : pv::PromptConfig::all()) out.emplace_back(c.name());
    return out;
  });
  m.def("config_label", [](const std::string& name) {
    return std::string(config_arg(name).label());
  }, py::arg("name"));
  m.def("template_catalog", &pv::template_catalog);

  m.def("load_dataset", [](const fs::path& path, std::optional<fs::path> images) {
    auto ds = pv::load_dataset(path, images.value_or(path.parent_path()));
    py::list pairs;
    for (const auto& p : ds.pairs) {
      py::dict d;
      d["id"] = p.id;
      d["caption_0"] = p.caption_0;
      d["caption_1"] = p.caption_1;
      d["image_0"] = p.image_0.locator;
      d["image_1"] = p.image_1.locator;
      d["tags"] = p.tags;
      pairs.append(d);
    }
    py::dict out;
    out["digest"] = pv::to_hex(ds.digest);
    out["pairs"] = pairs;
    return out;
  }, py::arg("path"), py::arg("images") = py::none());

  m.def("render", [](const fs::path& dataset, std::int64_t pair_id, const std::string& probe,
                     const std::string& config, std::optional<std::string> description,
                     bool swap_options, std::optional<fs::path> images) {
    auto ds = pv::load_dataset(dataset, images.value_or(dataset.parent_path()));
    const auto* pair = ds.find(pair_id);
    if (pair == nullptr) throw pv::UsageError("no pair " + std::to_string(pair_id));
    auto pr = pv::Probe::from_label(pair_id, probe);
    if (!pr) throw pv::UsageError("bad probe label '" + probe + "'");
    auto cfg = config_arg(config);
    pv::RenderOptions ro{swap_options};
    if (cfg.turns == pv::Turns::kOne) {
      return messages_to_python(pv::render_one_turn(*pr, *pair, cfg.cot, ro));
    }
    if (!description) return messages_to_python(pv::render_description_request(*pr, *pair, ro));
    return messages_to_python(
        pv::render_second_turn(*pr, *pair, *description, cfg.cot, cfg.second_turn_vision, ro));
  }, py::arg("dataset"), py::arg("pair_id"), py::arg("probe"), py::arg("config"),
     py::arg("description") = py::none(), py::arg("swap_options") = false,
     py::arg("images") = py::none(),
     "Messages for one probe. Two-turn configs give the description request\n"
     "unless `description` is passed, then the second turn.");

  m.def("extract_choice", [](const std::string& text, const std::string& kind,
                             const std::string& caption_0, const std::string& caption_1) {
    return parse_result(pv::extract_choice(text, kind_arg(kind), caption_0, caption_1));
  }, py::arg("text"), py::arg("kind") = "text", py::arg("caption_0") = "",
     py::arg("caption_1") = "");

  m.def("check_corpus", [](const fs::path& path) {
    auto report = pv::check_corpus(pv::load_corpus(path));
    py::dict d;
    d["total"] = report.total;
    d["mismatches"] = report.mismatches.size();
    d["ok"] = report.ok();
    d["report"] = report.to_string();
    return d;
  }, py::arg("path"));

  m.def("pair_scores", [](bool text_0, bool text_1, bool image_0, bool image_1) {
    int t = text_0 && text_1;
    int i = image_0 && image_1;
    return py::make_tuple(t, i, pv::group_score_pair(t, i));
  }, py::arg("text_0"), py::arg("text_1"), py::arg("image_0"), py::arg("image_1"));
  m.def("percent", [](std::size_t count, std::size_t total) {
    return pv::Percent::of(count, total).str();
  }, py::arg("count"), py::arg("total"));

  m.def("run", [](const fs::path& dataset, const fs::path& backend, const std::string& config,
                  const fs::path& out, const std::string& setting, int concurrency,
                  std::uint64_t seed, std::optional<std::vector<std::int64_t>> subset,
                  std::optional<fs::path> images, std::optional<fs::path> cache_dir,
                  bool use_cache, bool fresh_descriptions, bool swap_options) {
    pv::RunOptions opts;
    opts.config = config_arg(config);
    opts.setting = setting_arg(setting);
    opts.concurrency = concurrency;
    opts.seed = seed;
    opts.subset = std::move(subset);
    opts.cache_dir = cache_dir.value_or(fs::path{});
    opts.use_cache = use_cache;
    opts.fresh_descriptions = fresh_descriptions;
    opts.swap_options = swap_options;
    auto spec = pv::BackendSpec::load(backend);
    auto ds = pv::load_dataset(dataset, images.value_or(dataset.parent_path()));
    pv::RunOutcome outcome;
    {
      py::gil_scoped_release release;
      outcome = pv::run(ds, spec, opts, out);
    }
    return to_python(outcome.summary->to_json());
  }, py::arg("dataset"), py::arg("backend"), py::arg("config"), py::arg("out"),
     py::arg("setting") = "both", py::arg("concurrency") = 4, py::arg("seed") = 0,
     py::arg("subset") = py::none(), py::arg("images") = py::none(),
     py::arg("cache_dir") = py::none(), py::arg("use_cache") = true,
     py::arg("fresh_descriptions") = false, py::arg("swap_options") = false,
     "Runs every probe and returns summary.json as a dict.");

  m.def("resume", [](const fs::path& dir) {
    pv::RunOutcome outcome;
    {
      py::gil_scoped_release release;
      outcome = pv::resume(dir);
    }
    return to_python(outcome.summary->to_json());
  }, py::arg("dir"));
  m.def("score", [](const fs::path& dir) { return to_python(pv::score_run(dir).to_json()); },
        py::arg("dir"));

  m.def("report_table", [](const std::vector<fs::path>& runs, const std::string& format) {
    return pv::emit_score_table(runs, format_arg(format));
  }, py::arg("runs"), py::arg("format") = "markdown");
  m.def("report_tags", [](const fs::path& run, const std::string& score,
                          const std::string& format) {
    return pv::emit_tag_table(run, score_arg(score), format_arg(format));
  }, py::arg("run"), py::arg("score") = "text", py::arg("format") = "markdown");
  m.def("report_compare", [](const std::vector<fs::path>& runs, const std::string& score) {
    return pv::emit_tag_comparison(runs, score_arg(score));
  }, py::arg("runs"), py::arg("score") = "text");

  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = pv::run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command line in-process; returns (exit code, stdout, stderr).");
}
