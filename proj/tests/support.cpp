// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace pairwise_vl::testing {

namespace fs = std::filesystem;
using json = nlohmann::json;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto p = fs::temp_directory_path() /
             ("pairwise_vl_test_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter.fetch_add(1)) + "_" + std::to_string(rd() % 100000));
    if (fs::create_directory(p)) {
      path_ = p;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fake_png(std::uint64_t seed) {
  std::string bytes = "\x89PNG\r\n\x1a\n";
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((seed >> (8 * i)) & 0xff));
  return bytes;
}

namespace {

constexpr std::array<const char*, 12> kNouns = {"dog",  "cat",   "horse", "bird", "child", "chair",
                                                "lamp", "plant", "boat",  "tree", "cup",   "book"};

std::pair<std::string, std::string> captions_for(std::int64_t id) {
  auto n = static_cast<std::int64_t>(kNouns.size());
  std::string a = kNouns[id % n];
  std::string b = kNouns[(id / n + id + 1) % n];
  if (a == b) b = kNouns[(id + 5) % n];
  return {"a " + a + " is on top of a " + b, "a " + b + " is on top of a " + a};
}

}  // namespace

fs::path write_synthetic_dataset(const fs::path& dir, const std::vector<SyntheticPair>& pairs) {
  fs::create_directories(dir / "images");
  std::string lines;
  for (const auto& p : pairs) {
    auto [c0, c1] = captions_for(p.id);
    auto i0 = "images/" + std::to_string(p.id) + "_0.png";
    auto i1 = "images/" + std::to_string(p.id) + "_1.png";
    write_text(dir / i0, fake_png(static_cast<std::uint64_t>(p.id) * 2));
    write_text(dir / i1, fake_png(static_cast<std::uint64_t>(p.id) * 2 + 1));
    json rec = {{"id", p.id}, {"caption_0", c0}, {"caption_1", c1}, {"image_0", i0},
                {"image_1", i1}};
    if (!p.tags.empty()) rec["tags"] = p.tags;
    lines += rec.dump() + "\n";
  }
  auto path = dir / "dataset.jsonl";
  write_text(path, lines);
  return path;
}

fs::path write_synthetic_dataset(const fs::path& dir, std::size_t n) {
  std::vector<SyntheticPair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({static_cast<std::int64_t>(i), {}});
  return write_synthetic_dataset(dir, pairs);
}

fs::path write_backend_spec(const fs::path& path, const json& spec) {
  write_text(path, spec.dump(2));
  return path;
}

ProbeResult fake_result(const Probe& probe, bool correct) {
  Choice c = correct ? probe.correct_choice : flip(probe.correct_choice);
  ModelResponse r;
  r.text = "(" + std::string(to_string(c)) + ")";
  return make_probe_result(probe, "one-turn", r, ParsedChoice{c, ParseRule::kAnswerMarker, 0, 0});
}

const std::vector<TagCount>& reference_tag_counts() {
  static const std::vector<TagCount> counts = {
      {"Symbolic", 36, 41},
      {"Series", 21, 31},
      {"Pragmatics", 17, 24},
      {"Adjective-Color", 40, 47},
      {"Adjective-Size/Amount", 13, 24},
      {"Adjective-Animate", 9, 9},
      {"Adjective-Texture", 8, 8},
      {"Adjective-Height", 7, 7},
      {"Adjective-Shape", 6, 6},
      {"Adjective-Temperature", 5, 6},
      {"Adjective-Weight", 0, 3},
      {"Adjective-Age", 2, 2},
      {"Determiner-Numeral", 23, 27},
      {"Object-Centric-Spatial", 9, 16},
      {"Temporal Dynamics", 7, 16},
  };
  return counts;
}

TagFixture make_tag_fixture(const std::vector<TagCount>& counts, std::size_t n_pairs,
                            std::size_t extra_correct) {
  TagFixture f;
  std::vector<bool> correct;
  std::int64_t id = 0;
  auto add_pair = [&](std::vector<std::string> tags, bool ok) {
    ExamplePair p;
    p.id = id++;
    auto [c0, c1] = captions_for(p.id);
    p.caption_0 = c0;
    p.caption_1 = c1;
    p.image_0.locator = std::to_string(p.id) + "_0.png";
    p.image_1.locator = std::to_string(p.id) + "_1.png";
    p.tags = std::move(tags);
    f.dataset.pairs.push_back(p);
    correct.push_back(ok);
  };
  for (const auto& c : counts) {
    for (std::size_t i = 0; i < c.tagged; ++i) add_pair({c.tag}, i < c.correct);
  }
  std::size_t extra = 0;
  while (f.dataset.pairs.size() < n_pairs) add_pair({}, extra++ < extra_correct);

  for (std::size_t i = 0; i < f.dataset.pairs.size(); ++i) {
    for (const auto& probe : probes_for(f.dataset.pairs[i], Setting::kText)) {
      // a wrong pair gets one wrong probe out of two
      bool ok = correct[i] || probe.index == 1;
      f.results.push_back(fake_result(probe, ok));
    }
  }
  return f;
}

}  // namespace pairwise_vl::testing
