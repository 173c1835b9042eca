// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwise_vl/dataset.hpp"
#include "pairwise_vl/scoring.hpp"

namespace pairwise_vl::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

/// Bytes that sniff as PNG and differ for every `seed`.
std::string fake_png(std::uint64_t seed);

struct SyntheticPair {
  std::int64_t id;
  std::vector<std::string> tags;
};

/// Writes dataset.jsonl plus images under `dir` and returns the dataset
/// path. Captions are word-order swaps of each other.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir,
                                              const std::vector<SyntheticPair>& pairs);
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, std::size_t n);

std::filesystem::path write_backend_spec(const std::filesystem::path& path,
                                         const nlohmann::json& spec);

/// A probe result with a parsed choice that is right or wrong on demand.
ProbeResult fake_result(const Probe& probe, bool correct);

/// One tag per pair with (correct, tagged) counts; the rest of the pairs
/// are untagged.
struct TagCount {
  std::string tag;
  std::size_t correct;
  std::size_t tagged;
};

/// Counts from the reference tag table, in its printed order.
const std::vector<TagCount>& reference_tag_counts();

/// A 400-pair dataset (in memory, no images) and text-setting results that
/// realise `counts`, with `extra_correct` of the untagged pairs correct.
struct TagFixture {
  Dataset dataset;
  std::vector<ProbeResult> results;
};
TagFixture make_tag_fixture(const std::vector<TagCount>& counts, std::size_t n_pairs = 400,
                            std::size_t extra_correct = 0);

}  // namespace pairwise_vl::testing
