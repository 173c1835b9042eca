// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/answer_parser.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pairwise_vl/errors.hpp"
#include "util.hpp"

namespace pairwise_vl {
namespace {

constexpr std::size_t npos = std::string::npos;

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word(char c) {
  auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= '0' && u <= '9') || u >= 0x80;
}

bool is_delim(char c) { return c == '.' || c == '!' || c == '?'; }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

// Lowercased copy with whitespace runs collapsed to one space and trimmed;
// origin[i] is the source offset of normalized byte i.
struct Normalized {
  std::string text;
  std::vector<std::size_t> origin;
};

Normalized normalize(std::string_view s) {
  Normalized n;
  n.text.reserve(s.size());
  n.origin.reserve(s.size());
  std::size_t ws_start = npos;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_ws(s[i])) {
      if (ws_start == npos) ws_start = i;
      continue;
    }
    if (ws_start != npos && !n.text.empty()) {
      n.text.push_back(' ');
      n.origin.push_back(ws_start);
    }
    ws_start = npos;
    n.text.push_back(lower(s[i]));
    n.origin.push_back(i);
  }
  return n;
}

struct Occurrence {
  std::size_t begin;
  std::size_t end;
  Choice choice;
  int sentence;
};

class Scanner {
 public:
  Scanner(const std::string& text, ProbeKind kind) : t_(text), kind_(kind) {
    sentence_.resize(t_.size() + 1);
    int s = 0;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      sentence_[i] = s;
      if (is_delim(t_[i])) ++s;
    }
    sentence_[t_.size()] = s;
  }

  int sentence_of(std::size_t pos) const { return sentence_[pos]; }

  bool left_boundary(std::size_t pos) const { return pos == 0 || !is_word(t_[pos - 1]); }
  bool right_boundary(std::size_t pos) const { return pos >= t_.size() || !is_word(t_[pos]); }

  std::size_t sentence_end(std::size_t pos) const {
    while (pos < t_.size() && !is_delim(t_[pos])) ++pos;
    return pos;
  }

  /// All whole-word occurrences of `needle`.
  std::vector<std::size_t> find_words(std::string_view needle) const {
    std::vector<std::size_t> hits;
    for (auto p = t_.find(needle); p != npos; p = t_.find(needle, p + 1)) {
      if (left_boundary(p) && right_boundary(p + needle.size())) hits.push_back(p);
    }
    return hits;
  }

  /// R1: marker end positions, split into explicit answer statements and
  /// option/choice mentions.
  void markers(std::vector<std::size_t>& answer, std::vector<std::size_t>& option) const {
    for (auto p = t_.find("answer"); p != npos; p = t_.find("answer", p + 1)) {
      if (!left_boundary(p)) continue;
      auto q = p + 6;
      if (t_.compare(q, 3, " is") == 0 && right_boundary(q + 3)) {
        answer.push_back(q + 3);
      } else if (q < t_.size() && t_[q] == ':') {
        answer.push_back(q + 1);
      } else if (t_.compare(q, 2, " :") == 0) {
        answer.push_back(q + 2);
      }
    }
    for (auto word : {"option", "choice"}) {
      for (auto p : find_words(word)) option.push_back(p + std::string_view(word).size());
    }
    std::sort(option.begin(), option.end());
  }

  /// The option token right after a marker ending at `pos`, skipping filler
  /// words. Standalone "a"/"b" after an answer marker must look like a
  /// letter rather than an article.
  std::optional<Occurrence> token_after(std::size_t pos, bool strict_letters) const {
    static constexpr std::array<std::string_view, 15> kFillers = {
        "the", "is", "be", "would", "will", "should", "clearly", "likely", "probably",
        "definitely", "most", "option", "choice", "final", "correct"};
    const auto limit = sentence_end(pos);
    while (true) {
      while (pos < limit && !is_word(t_[pos])) ++pos;
      if (pos >= limit) return std::nullopt;
      auto w_end = pos;
      while (w_end < limit && is_word(t_[w_end])) ++w_end;
      std::string_view word(t_.data() + pos, w_end - pos);

      if (kind_ == ProbeKind::kText && (word == "a" || word == "b")) {
        Choice c = word == "a" ? Choice::kA : Choice::kB;
        if (pos > 0 && t_[pos - 1] == '(' && w_end < t_.size() && t_[w_end] == ')') {
          return Occurrence{pos - 1, w_end + 1, c, sentence_of(pos)};
        }
        if (!strict_letters || letter_like(w_end, limit)) {
          return Occurrence{pos, w_end, c, sentence_of(pos)};
        }
        return std::nullopt;
      }
      if (kind_ == ProbeKind::kImage && (word == "first" || word == "second")) {
        return Occurrence{pos, w_end, word == "first" ? Choice::kFirst : Choice::kSecond,
                          sentence_of(pos)};
      }
      if (std::find(kFillers.begin(), kFillers.end(), word) == kFillers.end()) {
        return std::nullopt;
      }
      pos = w_end;
    }
  }

  std::vector<Occurrence> parenthesized() const {
    std::vector<Occurrence> out;
    for (auto p = t_.find('('); p != npos; p = t_.find('(', p + 1)) {
      if (p + 2 < t_.size() && t_[p + 2] == ')' && (t_[p + 1] == 'a' || t_[p + 1] == 'b')) {
        out.push_back({p, p + 3, t_[p + 1] == 'a' ? Choice::kA : Choice::kB, sentence_of(p)});
      }
    }
    return out;
  }

  std::vector<Occurrence> ordinal_phrases() const {
    static constexpr std::array<std::pair<std::string_view, Choice>, 6> kPhrases = {{
        {"first image", Choice::kFirst},
        {"second image", Choice::kSecond},
        {"image-0", Choice::kFirst},
        {"image-1", Choice::kSecond},
        {"image 1", Choice::kFirst},
        {"image 2", Choice::kSecond},
    }};
    std::vector<Occurrence> out;
    for (const auto& [phrase, choice] : kPhrases) {
      for (auto p : find_words(phrase)) {
        out.push_back({p, p + phrase.size(), choice, sentence_of(p)});
      }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
    return out;
  }

  std::vector<Occurrence> caption_echoes(const std::string& c0, const std::string& c1) const {
    std::vector<Occurrence> all;
    auto collect = [&](const std::string& cap, Choice choice) {
      if (cap.empty()) return;
      for (auto p = t_.find(cap); p != npos; p = t_.find(cap, p + 1)) {
        all.push_back({p, p + cap.size(), choice, sentence_of(p)});
      }
    };
    collect(c0, Choice::kA);
    collect(c1, Choice::kB);
    // When one caption contains the other, the longer echo wins.
    std::vector<Occurrence> out;
    for (const auto& o : all) {
      bool inside = std::any_of(all.begin(), all.end(), [&](const auto& other) {
        return other.choice != o.choice && other.begin <= o.begin && o.end <= other.end &&
               (other.end - other.begin) > (o.end - o.begin);
      });
      if (!inside) out.push_back(o);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
    return out;
  }

 private:
  bool letter_like(std::size_t after, std::size_t limit) const {
    static constexpr std::array<std::string_view, 4> kFollowers = {"is", "because", "since", "as"};
    if (after >= limit) return true;
    if (t_[after] != ' ') return true;  // punctuation such as "B," or "B*"
    auto w = after + 1;
    if (w >= limit || !is_word(t_[w])) return true;
    auto w_end = w;
    while (w_end < limit && is_word(t_[w_end])) ++w_end;
    std::string_view next(t_.data() + w, w_end - w);
    return std::find(kFollowers.begin(), kFollowers.end(), next) != kFollowers.end();
  }

  const std::string& t_;
  ProbeKind kind_;
  std::vector<int> sentence_;
};

}  // namespace

std::string_view rule_id(ParseRule rule) {
  switch (rule) {
    case ParseRule::kAnswerMarker: return "R1";
    case ParseRule::kParenthesizedLetter: return "R2";
    case ParseRule::kOrdinalPhrase: return "R3";
    case ParseRule::kCaptionEcho: return "R4";
  }
  return "?";
}

ParseResult extract_choice(std::string_view text, ProbeKind kind, std::string_view caption_0,
                           std::string_view caption_1) {
  const auto norm = normalize(text);
  const Scanner scan(norm.text, kind);

  auto to_parsed = [&](const Occurrence& o, ParseRule rule) {
    return ParsedChoice{o.choice, rule, norm.origin[o.begin], norm.origin[o.end - 1] + 1};
  };

  std::vector<std::size_t> answer_markers;
  std::vector<std::size_t> option_markers;
  scan.markers(answer_markers, option_markers);

  for (auto it = answer_markers.rbegin(); it != answer_markers.rend(); ++it) {
    if (auto tok = scan.token_after(*it, /*strict_letters=*/true)) {
      return to_parsed(*tok, ParseRule::kAnswerMarker);
    }
  }

  struct Level {
    ParseRule rule;
    std::vector<Occurrence> occurrences;
  };
  std::vector<Level> levels;
  {
    Level r1{ParseRule::kAnswerMarker, {}};
    for (auto m : option_markers) {
      if (auto tok = scan.token_after(m, /*strict_letters=*/false)) r1.occurrences.push_back(*tok);
    }
    levels.push_back(std::move(r1));
  }
  if (kind == ProbeKind::kText) {
    levels.push_back({ParseRule::kParenthesizedLetter, scan.parenthesized()});
    levels.push_back({ParseRule::kCaptionEcho,
                      scan.caption_echoes(normalize(caption_0).text, normalize(caption_1).text)});
  } else {
    levels.push_back({ParseRule::kOrdinalPhrase, scan.ordinal_phrases()});
  }

  int last_sentence = -1;
  for (const auto& level : levels) {
    for (const auto& o : level.occurrences) last_sentence = std::max(last_sentence, o.sentence);
  }
  if (last_sentence < 0) return Unparseable{false};

  for (const auto& level : levels) {
    const Occurrence* last = nullptr;
    bool mixed = false;
    for (const auto& o : level.occurrences) {
      if (o.sentence != last_sentence) continue;
      if (last != nullptr && last->choice != o.choice) mixed = true;
      last = &o;
    }
    if (last == nullptr) continue;
    if (mixed) return Unparseable{true};
    return to_parsed(*last, level.rule);
  }
  return Unparseable{false};
}

std::string result_label(const ParseResult& r) {
  if (const auto* p = parsed(r)) return std::string(to_string(p->choice));
  return "unparseable";
}

std::vector<CorpusEntry> parse_corpus(std::string_view contents) {
  std::vector<CorpusEntry> entries;
  std::istringstream lines{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& what) {
      throw MalformedCorpus("corpus line " + std::to_string(line_no) + ": " + what);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(e.what());
    }
    CorpusEntry e;
    e.line = line_no;
    try {
      e.text = j.at("text").get<std::string>();
      auto kind = parse_probe_kind(j.at("kind").get<std::string>());
      if (!kind) fail("kind must be \"text\" or \"image\"");
      e.kind = *kind;
      e.caption_0 = j.at("caption_0").get<std::string>();
      e.caption_1 = j.at("caption_1").get<std::string>();
      auto expected = j.at("expected").get<std::string>();
      if (expected != "unparseable") {
        e.expected = parse_choice(expected);
        if (!e.expected || kind_of(*e.expected) != e.kind) {
          fail("expected '" + expected + "' does not fit kind " + std::string(to_string(e.kind)));
        }
      }
    } catch (const nlohmann::json::exception& ex) {
      fail(ex.what());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path) {
  auto contents = detail::read_file(path);
  if (!contents) throw MalformedCorpus("cannot read corpus " + path.string());
  return parse_corpus(*contents);
}

CorpusReport check_corpus(const std::vector<CorpusEntry>& corpus) {
  CorpusReport report;
  report.total = corpus.size();
  if (corpus.empty()) report.warnings.push_back("corpus is empty; nothing was checked");
  for (const auto& e : corpus) {
    auto got = extract_choice(e.text, e.kind, e.caption_0, e.caption_1);
    auto expected = e.expected ? std::string(to_string(*e.expected)) : "unparseable";
    auto actual = result_label(got);
    if (expected != actual) report.mismatches.push_back({e.line, expected, actual});
  }
  return report;
}

std::string CorpusReport::to_string() const {
  std::ostringstream out;
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  for (const auto& m : mismatches) {
    out << "line " << m.line << ": expected " << m.expected << ", got " << m.actual << "\n";
  }
  out << total << " fixtures, " << mismatches.size() << " mismatches\n";
  return out.str();
}

}  // namespace pairwise_vl
