// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/prompts.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "pairwise_vl/errors.hpp"

namespace pairwise_vl {
namespace {

// Placeholders: {caption_0} {caption_1} {caption}. Option text is inserted
// verbatim, in dataset order unless options are swapped.
constexpr std::string_view kTextQuestion =
    "Does this image present (A) {caption_0}, or (B) {caption_1}?";
constexpr std::string_view kTextNote = "Note, you must choose one of the two options.";
constexpr std::string_view kDescribeThenAnswer =
    "First, describe the image information relevant to the question. Then, provide your answer.";
constexpr std::string_view kCotNote = "Note you must choose one of the two options.";

constexpr std::string_view kImageQuestion =
    "Which image better aligns with the description {caption}? The first image or the second "
    "image?";
constexpr std::string_view kImageNote = "Note you must choose one of two options.";

constexpr std::string_view kDescriptionRequest =
    "Describe the image information relevant to the following question. Does this image present "
    "(A) {caption_0}, or (B) {caption_1}? Do not answer the question; only describe the relevant "
    "image content.";

constexpr std::string_view kTextOnlyQuestion =
    "Based on this image description, does this image depict (A) {caption_0}, or (B) "
    "{caption_1}?";
constexpr std::string_view kVisionQuestion =
    "Does this image depict (A) {caption_0}, or (B) {caption_1}?";
constexpr std::string_view kAnalyzeThenAnswer =
    "First, analyze the two options, then provide your answer.";

std::string join(std::initializer_list<std::string_view> pieces) {
  std::string out;
  for (auto p : pieces) {
    if (!out.empty()) out.push_back(' ');
    out.append(p);
  }
  return out;
}

std::string one_turn_text_template(bool cot) {
  return cot ? join({kTextQuestion, kDescribeThenAnswer, kCotNote})
             : join({kTextQuestion, kTextNote});
}

std::string one_turn_image_template(bool cot) {
  return cot ? join({kImageQuestion, kDescribeThenAnswer, kImageNote})
             : join({kImageQuestion, kImageNote});
}

std::string second_turn_template(bool cot, bool vision) {
  auto question = vision ? kVisionQuestion : kTextOnlyQuestion;
  return cot ? join({question, kAnalyzeThenAnswer, kTextNote}) : join({question, kTextNote});
}

// Single pass so a caption containing "{caption_1}" is never re-expanded.
std::string fill_template(std::string_view tmpl, const std::string& option_a, const std::string& option_b,
                 const std::string& caption = {}) {
  std::string out;
  out.reserve(tmpl.size() + option_a.size() + option_b.size() + caption.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.compare(i, 11, "{caption_0}") == 0) {
      out += option_a;
      i += 11;
    } else if (tmpl.compare(i, 11, "{caption_1}") == 0) {
      out += option_b;
      i += 11;
    } else if (tmpl.compare(i, 9, "{caption}") == 0) {
      out += caption;
      i += 9;
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

void check_probe(const Probe& probe, const ExamplePair& pair) {
  if (probe.pair_id != pair.id) {
    throw UsageError("probe for pair " + std::to_string(probe.pair_id) +
                     " rendered against pair " + std::to_string(pair.id));
  }
}

void require_text_probe(const Probe& probe, std::string_view what) {
  if (probe.kind != ProbeKind::kText) {
    throw UnsupportedProbe(std::string(what) + " is defined for text probes only");
  }
}

const std::string& option_a(const ExamplePair& pair, const RenderOptions& o) {
  return pair.caption(o.swap_options ? 1 : 0);
}
const std::string& option_b(const ExamplePair& pair, const RenderOptions& o) {
  return pair.caption(o.swap_options ? 0 : 1);
}

MessageSequence single_user_message(std::vector<MessagePart> parts) {
  MessageSequence seq;
  seq.messages.push_back({Role::kUser, std::move(parts)});
  return seq;
}

struct NamedConfig {
  std::string_view name;
  std::string_view label;
  PromptConfig config;
};

constexpr std::array<NamedConfig, 6> kNamedConfigs{{
    {"one-turn", "GPT-4V (1-turn)", {Turns::kOne, false, false}},
    {"one-turn-cot", "GPT-4V CoT (1-turn)", {Turns::kOne, true, false}},
    {"two-turn-text-qa", "GPT-4V Desp + GPT-4 QA (2-turns)", {Turns::kTwo, false, false}},
    {"two-turn-text-cot", "GPT-4V Desp + GPT-4 CoT (2-turns)", {Turns::kTwo, true, false}},
    {"two-turn-vision-qa", "GPT-4V Desp + GPT-4V QA (2-turns)", {Turns::kTwo, false, true}},
    {"two-turn-vision-cot", "GPT-4V Desp + GPT-4V CoT (2-turns)", {Turns::kTwo, true, true}},
}};

const NamedConfig& lookup(const PromptConfig& c) {
  for (const auto& nc : kNamedConfigs) {
    if (nc.config == c) return nc;
  }
  return kNamedConfigs[0];  // unreachable: the six entries cover every value
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

std::string MessageSequence::canonical_json() const {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& part : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        parts.push_back({{"type", "text"}, {"text", t->text}});
      } else {
        const auto& img = std::get<ImagePart>(part).image;
        parts.push_back(
            {{"type", "image"}, {"digest", to_hex(img.digest)}, {"media_type", img.media_type}});
      }
    }
    msgs.push_back({{"role", to_string(m.role)}, {"parts", std::move(parts)}});
  }
  return nlohmann::json{{"messages", std::move(msgs)}}.dump();
}

std::size_t MessageSequence::image_count() const {
  std::size_t n = 0;
  for (const auto& m : messages) {
    for (const auto& p : m.parts) n += std::holds_alternative<ImagePart>(p) ? 1 : 0;
  }
  return n;
}

std::string MessageSequence::joined_text() const {
  std::string out;
  for (const auto& m : messages) {
    for (const auto& p : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&p)) {
        if (!out.empty()) out.push_back('\n');
        out += t->text;
      }
    }
  }
  return out;
}

std::string_view PromptConfig::name() const { return lookup(*this).name; }
std::string_view PromptConfig::label() const { return lookup(*this).label; }

std::optional<PromptConfig> PromptConfig::from_name(std::string_view name) {
  for (const auto& nc : kNamedConfigs) {
    if (nc.name == name) return nc.config;
  }
  return std::nullopt;
}

const std::array<PromptConfig, 6>& PromptConfig::all() {
  static const std::array<PromptConfig, 6> configs = [] {
    std::array<PromptConfig, 6> out{};
    for (std::size_t i = 0; i < kNamedConfigs.size(); ++i) out[i] = kNamedConfigs[i].config;
    return out;
  }();
  return configs;
}

MessageSequence render_one_turn(const Probe& probe, const ExamplePair& pair, bool cot,
                                const RenderOptions& options) {
  check_probe(probe, pair);
  if (probe.kind == ProbeKind::kText) {
    auto text = fill_template(one_turn_text_template(cot), option_a(pair, options), option_b(pair, options));
    return single_user_message({ImagePart{pair.image(probe.index)}, TextPart{std::move(text)}});
  }
  auto text = fill_template(one_turn_image_template(cot), {}, {}, pair.caption(probe.index));
  int first = options.swap_options ? 1 : 0;
  return single_user_message({ImagePart{pair.image(first)}, ImagePart{pair.image(1 - first)},
                              TextPart{std::move(text)}});
}

MessageSequence render_description_request(const Probe& probe, const ExamplePair& pair,
                                           const RenderOptions& options) {
  check_probe(probe, pair);
  require_text_probe(probe, "the description request");
  auto text = fill_template(kDescriptionRequest, option_a(pair, options), option_b(pair, options));
  return single_user_message({ImagePart{pair.image(probe.index)}, TextPart{std::move(text)}});
}

MessageSequence render_second_turn(const Probe& probe, const ExamplePair& pair,
                                   std::string_view description, bool cot, bool vision,
                                   const RenderOptions& options) {
  check_probe(probe, pair);
  require_text_probe(probe, "the second turn");
  if (description.empty()) throw EmptyDescription();
  auto question =
      fill_template(second_turn_template(cot, vision), option_a(pair, options), option_b(pair, options));
  std::vector<MessagePart> parts;
  if (vision) parts.emplace_back(ImagePart{pair.image(probe.index)});
  parts.emplace_back(TextPart{std::string(description)});
  parts.emplace_back(TextPart{std::move(question)});
  return single_user_message(std::move(parts));
}

std::string template_catalog() {
  std::ostringstream out;
  out << "# Prompt template catalog\n\n"
      << "Every prompt is a single user message. `[image_k]` is the probe's image part,\n"
      << "`[image_0]`, `[image_1]` are both images in dataset order, `[description]` is the\n"
      << "verbatim first-turn response sent as its own text part. Placeholders in braces are\n"
      << "replaced by the caption text with no added quoting. Strings between the fences are\n"
      << "exact bytes.\n\n"
      << "The two-turn configs share one turn-1 request. Its wording is our own: the\n"
      << "source describes the step but never prints the prompt.\n";
  auto block = [&](std::string_view heading, std::string_view parts, const std::string& text) {
    out << "\n### " << heading << "\n\nParts: " << parts << "\n\n```\n" << text << "\n```\n";
  };
  for (const auto& nc : kNamedConfigs) {
    out << "\n## " << nc.name << " (" << nc.label << ")\n";
    const auto& c = nc.config;
    if (c.turns == Turns::kOne) {
      block("text probe", "[image_k] [text]", one_turn_text_template(c.cot));
      block("image probe", "[image_0] [image_1] [text]", one_turn_image_template(c.cot));
    } else {
      block("turn 1 (text probe)", "[image_k] [text]", std::string(kDescriptionRequest));
      block("turn 2 (text probe)",
            c.second_turn_vision ? "[image_k] [description] [text]" : "[description] [text]",
            second_turn_template(c.cot, c.second_turn_vision));
    }
  }
  return out.str();
}

}  // namespace pairwise_vl
