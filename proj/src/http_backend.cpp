// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include "http_client.hpp"
#include "pairwise_vl/gateway.hpp"

namespace pairwise_vl {
namespace {

using json = nlohmann::json;

std::optional<std::chrono::milliseconds> retry_after(
    const std::map<std::string, std::string>& headers) {
  for (const auto& [name, value] : headers) {
    std::string lower(name);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower != "retry-after") continue;
    char* end = nullptr;
    double secs = std::strtod(value.c_str(), &end);
    if (end != value.c_str() && secs >= 0) {
      return std::chrono::milliseconds(static_cast<std::int64_t>(secs * 1000));
    }
  }
  return std::nullopt;
}

json content_parts(const ChatMessage& message) {
  json parts = json::array();
  for (const auto& part : message.parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      parts.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImagePart>(part).image;
      auto url = "data:" + img.media_type + ";base64," + base64_encode(read_image_bytes(img));
      parts.push_back({{"type", "image_url"}, {"image_url", {{"url", std::move(url)}}}});
    }
  }
  return parts;
}

std::string extract_content(const json& message) {
  const auto& content = message.at("content");
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text") {
        out += part.at("text").get<std::string>();
      }
    }
    return out;
  }
  throw BadResponse("message.content is neither a string nor a part list");
}

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(const BackendSpec& spec) : spec_(spec) {
    spec_.validate();
    if (!spec_.api_key_env.empty()) {
      const char* key = std::getenv(spec_.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw AuthError("environment variable " + spec_.api_key_env + " is not set");
      }
      api_key_ = key;
    }
    url_ = spec_.base_url;
    while (!url_.empty() && url_.back() == '/') url_.pop_back();
    url_ += "/chat/completions";
  }

  ModelResponse send(const MessageSequence& messages, const RequestContext&) override {
    json body = {{"model", spec_.model_name},
                 {"messages", json::array()},
                 {"temperature", spec_.temperature},
                 {"max_tokens", spec_.max_tokens}};
    for (const auto& m : messages.messages) {
      body["messages"].push_back({{"role", to_string(m.role)}, {"content", content_parts(m)}});
    }
    std::map<std::string, std::string> headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;

    auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(spec_.request_timeout * 1000));
    auto res = detail::http_post(url_, body.dump(), headers, timeout);
    if (res.status == 401 || res.status == 403) {
      throw AuthError("HTTP " + std::to_string(res.status) + " from " + url_);
    }
    if (res.status != 200) {
      HttpStatusError err(res.status, res.body, retry_after(res.headers));
      if (!err.retryable()) throw BadResponse(err.what());
      throw err;
    }
    return parse(res.body);
  }

  std::string cache_identity() const override { return spec_.model_name; }
  bool is_remote() const override { return true; }

 private:
  static ModelResponse parse(const std::string& body) {
    try {
      auto j = json::parse(body);
      const auto& choice = j.at("choices").at(0);
      ModelResponse r;
      r.text = extract_content(choice.at("message"));
      if (auto fr = choice.find("finish_reason"); fr != choice.end() && fr->is_string()) {
        r.finish_reason = fr->get<std::string>();
      }
      if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        if (auto p = u->find("prompt_tokens"); p != u->end() && p->is_number_integer()) {
          r.prompt_tokens = p->get<std::int64_t>();
        }
        if (auto c = u->find("completion_tokens"); c != u->end() && c->is_number_integer()) {
          r.completion_tokens = c->get<std::int64_t>();
        }
      }
      return r;
    } catch (const json::exception& e) {
      throw BadResponse(std::string("unexpected chat completion payload: ") + e.what());
    }
  }

  BackendSpec spec_;
  std::string api_key_;
  std::string url_;
};

}  // namespace

std::unique_ptr<Backend> make_http_backend(const BackendSpec& spec) {
  return std::make_unique<HttpBackend>(spec);
}

}  // namespace pairwise_vl
