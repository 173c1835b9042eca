// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pairwise_vl/hash.hpp"

namespace pairwise_vl {

/// A resolved image. Local files are re-read (and re-verified) at send
/// time; remote images are fetched once at load and held in memory.
struct ImageRef {
  std::string locator;
  std::string media_type;
  Digest digest{};
  std::filesystem::path resolved_path;
  std::shared_ptr<const std::string> fetched_bytes;

  bool is_remote() const noexcept { return fetched_bytes != nullptr; }
};

/// Returns the image bytes, throwing MissingImage if they are gone or no
/// longer hash to `image.digest`.
std::string read_image_bytes(const ImageRef& image);

using TagLabel = std::string;

struct ExamplePair {
  std::int64_t id = 0;
  std::string caption_0;
  std::string caption_1;
  ImageRef image_0;
  ImageRef image_1;
  std::vector<TagLabel> tags;  // deduplicated, file order

  const std::string& caption(int index) const { return index == 0 ? caption_0 : caption_1; }
  const ImageRef& image(int index) const { return index == 0 ? image_0 : image_1; }
  bool has_tag(std::string_view tag) const;
};

struct Dataset {
  std::filesystem::path source;
  std::filesystem::path image_root;
  Digest digest{};  // of the dataset file bytes
  std::vector<ExamplePair> pairs;

  const ExamplePair* find(std::int64_t id) const;
  std::size_t size() const noexcept { return pairs.size(); }
};

enum class ProbeKind { kText, kImage };

/// Binary answer. kA/kB belong to text probes (caption_0/caption_1),
/// kFirst/kSecond to image probes (image_0/image_1).
enum class Choice { kA, kB, kFirst, kSecond };

Choice choice_for(ProbeKind kind, int index);
int choice_index(Choice choice);
Choice flip(Choice choice);
ProbeKind kind_of(Choice choice);

std::string_view to_string(ProbeKind kind);
std::string_view to_string(Choice choice);
std::optional<ProbeKind> parse_probe_kind(std::string_view text);
std::optional<Choice> parse_choice(std::string_view text);

/// One atomic query. A text probe shows image `index` with both captions;
/// an image probe shows both images with caption `index`. Either way the
/// correct answer is the item with the same index.
struct Probe {
  std::int64_t pair_id = 0;
  ProbeKind kind = ProbeKind::kText;
  int index = 0;
  Choice correct_choice = Choice::kA;

  /// "text-0", "text-1", "image-0" or "image-1".
  std::string label() const;
  static std::optional<Probe> from_label(std::int64_t pair_id, std::string_view label);

  friend bool operator==(const Probe&, const Probe&) = default;
};

enum class Setting { kText, kImage, kBoth };

std::string_view to_string(Setting setting);
std::optional<Setting> parse_setting(std::string_view text);
bool includes(Setting setting, ProbeKind kind);

struct LoadOptions {
  /// When false, images keep only their locator: nothing is read or
  /// fetched. Enough for re-scoring and reports.
  bool resolve_images = true;
};

/// Reads the line-delimited dataset file, resolving image locators
/// relative to `image_root` (http/https locators are fetched).
Dataset load_dataset(const std::filesystem::path& path, const std::filesystem::path& image_root,
                     const LoadOptions& options = {});

enum class WarningKind { kWordMultisetMismatch };

struct Warning {
  WarningKind kind;
  std::int64_t pair_id;
  std::string message;
};

/// Lowercased, punctuation-stripped, whitespace-split words of `text`.
std::vector<std::string> normalized_words(std::string_view text);

std::vector<Warning> validate_pair(const ExamplePair& pair);

/// Text probes first (image 0, image 1), then image probes (caption 0, 1).
std::vector<Probe> probes_for(const ExamplePair& pair, Setting setting);

}  // namespace pairwise_vl
