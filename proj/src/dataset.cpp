// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/dataset.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "util.hpp"
#include "pairwise_vl/errors.hpp"

namespace pairwise_vl {
namespace {

using json = nlohmann::json;

using detail::read_file;

std::string sniff_media_type(std::string_view bytes, const std::string& locator) {
  auto starts = [&](std::string_view magic, std::size_t at = 0) {
    return bytes.size() >= at + magic.size() && bytes.substr(at, magic.size()) == magic;
  };
  if (starts("\x89PNG\r\n\x1a\n")) return "image/png";
  if (starts("\xff\xd8\xff")) return "image/jpeg";
  if (starts("GIF87a") || starts("GIF89a")) return "image/gif";
  if (starts("RIFF") && starts("WEBP", 8)) return "image/webp";
  if (starts("BM")) return "image/bmp";

  auto ext = std::filesystem::path(locator).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return {};
}

ImageRef resolve_image(const std::string& locator, const std::filesystem::path& image_root,
                       std::size_t line) {
  ImageRef ref;
  ref.locator = locator;
  std::string bytes;
  if (detail::is_http_url(locator)) {
    detail::HttpResult res;
    try {
      res = detail::http_get(locator, std::chrono::seconds(60));
    } catch (const TransportError& e) {
      throw MissingImage(locator, e.what());
    }
    if (res.status != 200) throw MissingImage(locator, "HTTP " + std::to_string(res.status));
    bytes = std::move(res.body);
  } else {
    std::filesystem::path p(locator);
    ref.resolved_path = p.is_absolute() ? p : image_root / p;
    auto contents = read_file(ref.resolved_path);
    if (!contents) throw MissingImage(locator);
    bytes = std::move(*contents);
  }
  ref.media_type = sniff_media_type(bytes, locator);
  if (ref.media_type.empty()) {
    throw MalformedRecord(line, "unrecognized image type for " + locator);
  }
  ref.digest = sha256(bytes);
  if (detail::is_http_url(locator)) {
    ref.fetched_bytes = std::make_shared<const std::string>(std::move(bytes));
  }
  return ref;
}

const std::string& require_string(const json& record, const char* field, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
    throw MalformedRecord(line, std::string("field '") + field + "' must be a non-empty string");
  }
  return it->get_ref<const std::string&>();
}

// UTF-8 decoding just good enough for word normalization; invalid bytes
// decode to U+FFFD and are kept as word characters.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  constexpr char32_t kReplacement = 0xfffd;
  auto c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = (c >> 5) == 0x6 ? 1 : (c >> 4) == 0xe ? 2 : (c >> 3) == 0x1e ? 3 : 0;
  if (extra == 0 || i + extra >= s.size()) {
    ++i;
    return kReplacement;
  }
  char32_t cp = c & (0x3f >> extra);
  for (int k = 1; k <= extra; ++k) {
    auto cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xc0) != 0x80) {
      ++i;
      return kReplacement;
    }
    cp = (cp << 6) | (cc & 0x3f);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

bool is_space(char32_t cp) {
  return cp == ' ' || (cp >= '\t' && cp <= '\r') || cp == 0x85 || cp == 0xa0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200a) || cp == 0x2028 || cp == 0x2029 || cp == 0x202f ||
         cp == 0x205f || cp == 0x3000;
}

// Unicode general category P*, restricted to the blocks captions plausibly use.
bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2f) || (cp >= 0x3a && cp <= 0x40) ||
           (cp >= 0x5b && cp <= 0x60) || (cp >= 0x7b && cp <= 0x7e);
  }
  switch (cp) {
    case 0xa1: case 0xa7: case 0xab: case 0xb6: case 0xb7: case 0xbb: case 0xbf:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205e) ||
         (cp >= 0x2e00 && cp <= 0x2e4f) || (cp >= 0x3001 && cp <= 0x3003) ||
         (cp >= 0x3008 && cp <= 0x3011) || (cp >= 0x3014 && cp <= 0x301f) ||
         (cp >= 0xff01 && cp <= 0xff0f) || (cp >= 0xff1a && cp <= 0xff20) ||
         (cp >= 0xff3b && cp <= 0xff3d) || cp == 0xff3f || cp == 0xff5b || cp == 0xff5d ||
         (cp >= 0xff5f && cp <= 0xff65);
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 0x20;
  return cp;
}

}  // namespace

std::string read_image_bytes(const ImageRef& image) {
  std::string bytes;
  if (image.fetched_bytes) {
    bytes = *image.fetched_bytes;
  } else {
    auto contents = read_file(image.resolved_path);
    if (!contents) throw MissingImage(image.locator);
    bytes = std::move(*contents);
  }
  if (sha256(bytes) != image.digest) {
    throw MissingImage(image.locator, "contents changed since load");
  }
  return bytes;
}

bool ExamplePair::has_tag(std::string_view tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

const ExamplePair* Dataset::find(std::int64_t id) const {
  auto it = std::find_if(pairs.begin(), pairs.end(), [id](const auto& p) { return p.id == id; });
  return it == pairs.end() ? nullptr : &*it;
}

Choice choice_for(ProbeKind kind, int index) {
  if (kind == ProbeKind::kText) return index == 0 ? Choice::kA : Choice::kB;
  return index == 0 ? Choice::kFirst : Choice::kSecond;
}

int choice_index(Choice choice) {
  return (choice == Choice::kA || choice == Choice::kFirst) ? 0 : 1;
}

Choice flip(Choice choice) { return choice_for(kind_of(choice), 1 - choice_index(choice)); }

ProbeKind kind_of(Choice choice) {
  return (choice == Choice::kA || choice == Choice::kB) ? ProbeKind::kText : ProbeKind::kImage;
}

std::string_view to_string(ProbeKind kind) { return kind == ProbeKind::kText ? "text" : "image"; }

std::string_view to_string(Choice choice) {
  switch (choice) {
    case Choice::kA: return "A";
    case Choice::kB: return "B";
    case Choice::kFirst: return "first";
    case Choice::kSecond: return "second";
  }
  return "?";
}

std::optional<ProbeKind> parse_probe_kind(std::string_view text) {
  if (text == "text") return ProbeKind::kText;
  if (text == "image") return ProbeKind::kImage;
  return std::nullopt;
}

std::optional<Choice> parse_choice(std::string_view text) {
  if (text == "A") return Choice::kA;
  if (text == "B") return Choice::kB;
  if (text == "first") return Choice::kFirst;
  if (text == "second") return Choice::kSecond;
  return std::nullopt;
}

std::string Probe::label() const {
  return std::string(to_string(kind)) + "-" + std::to_string(index);
}

std::optional<Probe> Probe::from_label(std::int64_t pair_id, std::string_view label) {
  auto dash = label.rfind('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto kind = parse_probe_kind(label.substr(0, dash));
  auto idx = label.substr(dash + 1);
  if (!kind || (idx != "0" && idx != "1")) return std::nullopt;
  int index = idx == "0" ? 0 : 1;
  return Probe{pair_id, *kind, index, choice_for(*kind, index)};
}

std::string_view to_string(Setting setting) {
  switch (setting) {
    case Setting::kText: return "text";
    case Setting::kImage: return "image";
    case Setting::kBoth: return "both";
  }
  return "?";
}

std::optional<Setting> parse_setting(std::string_view text) {
  if (text == "text") return Setting::kText;
  if (text == "image") return Setting::kImage;
  if (text == "both") return Setting::kBoth;
  return std::nullopt;
}

bool includes(Setting setting, ProbeKind kind) {
  if (setting == Setting::kBoth) return true;
  return (setting == Setting::kText) == (kind == ProbeKind::kText);
}

Dataset load_dataset(const std::filesystem::path& path, const std::filesystem::path& image_root,
                     const LoadOptions& options) {
  auto contents = read_file(path);
  if (!contents) throw Error("cannot read dataset file " + path.string());

  Dataset dataset;
  dataset.source = path;
  dataset.image_root = image_root;
  dataset.digest = sha256(*contents);

  std::unordered_set<std::int64_t> seen;
  std::istringstream lines(*contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord(line_no, e.what());
    }
    if (!record.is_object()) throw MalformedRecord(line_no, "expected a JSON object");

    auto id_it = record.find("id");
    if (id_it == record.end() || !id_it->is_number_integer() || id_it->get<std::int64_t>() < 0) {
      throw MalformedRecord(line_no, "field 'id' must be a non-negative integer");
    }
    ExamplePair pair;
    pair.id = id_it->get<std::int64_t>();
    if (!seen.insert(pair.id).second) throw DuplicateId(pair.id);

    pair.caption_0 = require_string(record, "caption_0", line_no);
    pair.caption_1 = require_string(record, "caption_1", line_no);
    if (pair.caption_0 == pair.caption_1) {
      throw MalformedRecord(line_no, "caption_0 and caption_1 are identical");
    }

    if (auto tags = record.find("tags"); tags != record.end() && !tags->is_null()) {
      if (!tags->is_array()) throw MalformedRecord(line_no, "field 'tags' must be an array");
      for (const auto& t : *tags) {
        if (!t.is_string() || t.get_ref<const std::string&>().empty()) {
          throw MalformedRecord(line_no, "tags must be non-empty strings");
        }
        const auto& name = t.get_ref<const std::string&>();
        if (!pair.has_tag(name)) pair.tags.push_back(name);
      }
    }

    const auto& loc_0 = require_string(record, "image_0", line_no);
    const auto& loc_1 = require_string(record, "image_1", line_no);
    if (options.resolve_images) {
      pair.image_0 = resolve_image(loc_0, image_root, line_no);
      pair.image_1 = resolve_image(loc_1, image_root, line_no);
    } else {
      pair.image_0.locator = loc_0;
      pair.image_1.locator = loc_1;
    }
    dataset.pairs.push_back(std::move(pair));
  }
  return dataset;
}

std::vector<std::string> normalized_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp = next_code_point(text, i);
    if (is_space(cp)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (!is_punct(cp)) {
      append_utf8(current, to_lower(cp));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<Warning> validate_pair(const ExamplePair& pair) {
  auto w0 = normalized_words(pair.caption_0);
  auto w1 = normalized_words(pair.caption_1);
  std::sort(w0.begin(), w0.end());
  std::sort(w1.begin(), w1.end());
  std::vector<Warning> warnings;
  if (w0 != w1) {
    warnings.push_back({WarningKind::kWordMultisetMismatch, pair.id,
                        "pair " + std::to_string(pair.id) +
                            ": captions do not use the same multiset of words"});
  }
  return warnings;
}

std::vector<Probe> probes_for(const ExamplePair& pair, Setting setting) {
  std::vector<Probe> probes;
  for (auto kind : {ProbeKind::kText, ProbeKind::kImage}) {
    if (!includes(setting, kind)) continue;
    for (int index : {0, 1}) probes.push_back({pair.id, kind, index, choice_for(kind, index)});
  }
  return probes;
}

}  // namespace pairwise_vl
