// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pairwise_vl/dataset.hpp"

namespace pairwise_vl {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role role);

struct TextPart {
  std::string text;
};

struct ImagePart {
  ImageRef image;
};

using MessagePart = std::variant<TextPart, ImagePart>;

struct ChatMessage {
  Role role = Role::kUser;
  std::vector<MessagePart> parts;
};

struct MessageSequence {
  std::vector<ChatMessage> messages;

  /// Stable serialization in which images appear only as digest and media
  /// type, so the result does not depend on where the files live.
  std::string canonical_json() const;
  Digest digest() const { return sha256(canonical_json()); }

  std::size_t image_count() const;
  /// Concatenation of every text part, separated by "\n".
  std::string joined_text() const;
};

enum class Turns { kOne, kTwo };

/// Which pipeline to run. For one turn, `cot` adds the describe-then-answer
/// instruction and `second_turn_vision` is ignored. For two turns, `cot`
/// selects the analyze-then-answer second turn and `second_turn_vision`
/// re-attaches the image to it.
struct PromptConfig {
  Turns turns = Turns::kOne;
  bool cot = false;
  bool second_turn_vision = false;

  /// CLI name, e.g. "two-turn-vision-cot".
  std::string_view name() const;
  /// Experiment label, e.g. "GPT-4V Desp + GPT-4V CoT (2-turns)".
  std::string_view label() const;
  int turn_count() const { return turns == Turns::kOne ? 1 : 2; }

  static std::optional<PromptConfig> from_name(std::string_view name);
  static const std::array<PromptConfig, 6>& all();

  friend bool operator==(const PromptConfig& a, const PromptConfig& b) {
    return a.turns == b.turns && a.cot == b.cot &&
           (a.turns == Turns::kOne || a.second_turn_vision == b.second_turn_vision);
  }
};

struct RenderOptions {
  /// Present caption_1 as (A) / image_1 first. Off by default.
  bool swap_options = false;
};

/// Maps between dataset-order choices and the order shown to the model.
inline Choice presented(Choice choice, const RenderOptions& options) {
  return options.swap_options ? flip(choice) : choice;
}

MessageSequence render_one_turn(const Probe& probe, const ExamplePair& pair, bool cot,
                                const RenderOptions& options = {});

/// First turn of the two-turn pipeline. Text probes only.
MessageSequence render_description_request(const Probe& probe, const ExamplePair& pair,
                                           const RenderOptions& options = {});

/// Second turn: the turn-1 description verbatim as its own text part,
/// followed by the question. With `vision` the probe's image leads.
MessageSequence render_second_turn(const Probe& probe, const ExamplePair& pair,
                                   std::string_view description, bool cot, bool vision,
                                   const RenderOptions& options = {});

/// Markdown listing of every template with its placeholders, for byte
/// comparison by third parties.
std::string template_catalog();

}  // namespace pairwise_vl
