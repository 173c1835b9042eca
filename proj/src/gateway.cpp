// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairwise_vl/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "util.hpp"

namespace pairwise_vl {

using json = nlohmann::json;

// --- BackendSpec -----------------------------------------------------------

void BackendSpec::validate() const {
  auto bad = [](const std::string& what) { throw UsageError("backend spec: " + what); };
  if (mock.empty()) {
    if (base_url.empty()) bad("base_url is required");
    if (model_name.empty()) bad("model_name is required");
  } else if (!parse_mock_kind(mock)) {
    bad("unknown mock '" + mock + "'");
  } else if (*parse_mock_kind(mock) == MockKind::kScripted && script.empty()) {
    bad("the scripted mock needs 'script'");
  }
  if (!std::isfinite(temperature) || temperature < 0) bad("temperature must be finite and >= 0");
  if (max_tokens <= 0) bad("max_tokens must be positive");
  if (!std::isfinite(request_timeout) || request_timeout <= 0) {
    bad("request_timeout must be finite and positive");
  }
  if (max_retries < 0) bad("max_retries must be non-negative");
  if (requests_per_minute <= 0) bad("requests_per_minute must be positive");
}

BackendSpec BackendSpec::from_json(const json& j) {
  if (!j.is_object()) throw UsageError("backend spec must be a JSON object");
  static const std::array<std::string_view, 10> kKnown = {
      "base_url",    "model_name",         "api_key_env", "temperature",         "max_tokens",
      "request_timeout", "max_retries", "requests_per_minute", "mock", "script"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), k) == kKnown.end()) {
      throw UsageError("backend spec: unknown field '" + k + "'");
    }
  }
  BackendSpec s;
  try {
    s.base_url = j.value("base_url", s.base_url);
    s.model_name = j.value("model_name", s.model_name);
    s.api_key_env = j.value("api_key_env", s.api_key_env);
    s.temperature = j.value("temperature", s.temperature);
    s.max_tokens = j.value("max_tokens", s.max_tokens);
    s.request_timeout = j.value("request_timeout", s.request_timeout);
    s.max_retries = j.value("max_retries", s.max_retries);
    s.requests_per_minute = j.value("requests_per_minute", s.requests_per_minute);
    s.mock = j.value("mock", s.mock);
    s.script = j.value("script", std::string());
  } catch (const json::type_error& e) {
    throw UsageError(std::string("backend spec: ") + e.what());
  }
  s.validate();
  return s;
}

BackendSpec BackendSpec::load(const std::filesystem::path& path) {
  auto contents = detail::read_file(path);
  if (!contents) throw UsageError("cannot read backend spec " + path.string());
  json j;
  try {
    j = json::parse(*contents);
  } catch (const json::parse_error& e) {
    throw UsageError("backend spec " + path.string() + ": " + e.what());
  }
  auto spec = from_json(j);
  if (!spec.script.empty() && spec.script.is_relative()) {
    spec.script = std::filesystem::absolute(path.parent_path() / spec.script);
  }
  return spec;
}

json BackendSpec::to_json() const {
  json j = {{"base_url", base_url},
            {"model_name", model_name},
            {"api_key_env", api_key_env},
            {"temperature", temperature},
            {"max_tokens", max_tokens},
            {"request_timeout", request_timeout},
            {"max_retries", max_retries},
            {"requests_per_minute", requests_per_minute}};
  if (!mock.empty()) j["mock"] = mock;
  if (!script.empty()) j["script"] = script.string();
  return j;
}

// --- HttpStatusError ---------------------------------------------------------

HttpStatusError::HttpStatusError(int status, std::string body,
                                 std::optional<std::chrono::milliseconds> retry_after)
    : TransportError("HTTP " + std::to_string(status) +
                     (body.empty() ? "" : ": " + body.substr(0, 300))),
      status_(status),
      retry_after_(retry_after) {}

bool HttpStatusError::retryable() const noexcept {
  return status_ == 408 || status_ == 429 || status_ >= 500;
}

// --- cache -------------------------------------------------------------------

CacheKey make_cache_key(std::string_view model_identity, double temperature, int max_tokens,
                        const MessageSequence& messages) {
  json j = {{"model", model_identity},
            {"temperature", temperature},
            {"max_tokens", max_tokens},
            {"messages", json::parse(messages.canonical_json())["messages"]}};
  return sha256(j.dump());
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("PAIRWISE_VL_CACHE_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "cache";
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path ResponseCache::path_for(const CacheKey& key) const {
  auto hex = to_hex(key);
  return root_ / hex.substr(0, 2) / (hex + ".json");
}

std::mutex& ResponseCache::stripe(const CacheKey& key) const {
  return stripes_[key[0] % stripes_.size()];
}

std::optional<ModelResponse> ResponseCache::load(const CacheKey& key) const {
  auto contents = detail::read_file(path_for(key));
  if (!contents) return std::nullopt;
  try {
    auto j = json::parse(*contents);
    if (j.at("key").get<std::string>() != to_hex(key)) return std::nullopt;
    ModelResponse r;
    r.text = j.at("text").get<std::string>();
    r.finish_reason = j.value("finish_reason", "");
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      if (u->contains("prompt_tokens") && (*u)["prompt_tokens"].is_number_integer()) {
        r.prompt_tokens = (*u)["prompt_tokens"].get<std::int64_t>();
      }
      if (u->contains("completion_tokens") && (*u)["completion_tokens"].is_number_integer()) {
        r.completion_tokens = (*u)["completion_tokens"].get<std::int64_t>();
      }
    }
    r.latency = j.value("latency", 0.0);
    r.attempt_count = j.value("attempt_count", 1);
    r.cached = true;
    return r;
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable record behaves as a miss
  }
}

void ResponseCache::store(const CacheKey& key, const MessageSequence& messages,
                          const ModelResponse& response, std::string_view model_identity) {
  std::lock_guard lock(stripe(key));
  auto path = path_for(key);
  if (load(key)) return;
  std::filesystem::create_directories(path.parent_path());
  json usage = json::object();
  if (response.prompt_tokens) usage["prompt_tokens"] = *response.prompt_tokens;
  if (response.completion_tokens) usage["completion_tokens"] = *response.completion_tokens;
  json j = {{"key", to_hex(key)},
            {"request_digest", to_hex(messages.digest())},
            {"model", model_identity},
            {"text", response.text},
            {"finish_reason", response.finish_reason},
            {"usage", usage},
            {"latency", response.latency},
            {"attempt_count", response.attempt_count},
            {"created_at", detail::utc_now_iso8601()}};
  detail::write_file_atomic(path, j.dump(2) + "\n");
}

// --- rate limiting and retry ---------------------------------------------------

TokenBucket::TokenBucket(double tokens_per_second, double capacity)
    : rate_(tokens_per_second), capacity_(capacity), tokens_(capacity), last_(Clock::now()) {}

void TokenBucket::acquire() {
  std::chrono::duration<double> wait{0.0};
  {
    std::lock_guard lock(mu_);
    auto now = Clock::now();
    tokens_ = std::min(capacity_,
                       tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    tokens_ -= 1.0;  // reserve; a negative balance is paid for by sleeping
    if (tokens_ < 0) wait = std::chrono::duration<double>(-tokens_ / rate_);
  }
  if (wait.count() > 0) std::this_thread::sleep_for(wait);
}

std::chrono::milliseconds RetryPolicy::delay_for(int failed_attempt) const {
  double ms = static_cast<double>(initial_backoff.count()) *
              std::pow(multiplier, std::max(0, failed_attempt - 1));
  return std::chrono::milliseconds(
      static_cast<std::int64_t>(std::min(ms, static_cast<double>(max_backoff.count()))));
}

// --- Gateway -------------------------------------------------------------------

Gateway::Gateway(BackendSpec spec, std::unique_ptr<Backend> backend,
                 std::shared_ptr<ResponseCache> cache, RetryPolicy retry)
    : spec_(std::move(spec)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      retry_(retry),
      limiter_(spec_.requests_per_minute / 60.0,
               std::max(1.0, spec_.requests_per_minute / 60.0)) {}

CacheKey Gateway::key_for(const MessageSequence& messages) const {
  return make_cache_key(backend_->cache_identity(), spec_.temperature, spec_.max_tokens,
                        messages);
}

ModelResponse Gateway::complete(const MessageSequence& messages, const RequestContext& context,
                                const CompleteOptions& options) {
  auto key = key_for(messages);
  if (cache_ && !options.bypass_cache_read) {
    if (auto hit = cache_->load(key)) {
      cache_hits_.fetch_add(1);
      return *hit;
    }
  }

  const int max_attempts = spec_.max_retries + 1;
  for (int attempt = 1;; ++attempt) {
    if (backend_->is_remote()) limiter_.acquire();
    backend_calls_.fetch_add(1);
    auto started = std::chrono::steady_clock::now();
    std::chrono::milliseconds delay{0};
    try {
      auto response = backend_->send(messages, context);
      response.latency =
          backend_->is_remote()
              ? std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
              : 0.0;
      response.attempt_count = attempt;
      response.cached = false;
      if (cache_) cache_->store(key, messages, response, backend_->cache_identity());
      return response;
    } catch (const HttpStatusError& e) {
      if (!e.retryable()) throw;
      if (attempt >= max_attempts) {
        if (e.status() == 429) {
          throw RateLimitExhausted("rate limited after " + std::to_string(attempt) +
                                   " attempts: " + e.what());
        }
        throw TransportError("giving up after " + std::to_string(attempt) +
                             " attempts: " + e.what());
      }
      delay = e.retry_after() ? std::min(*e.retry_after(), retry_.max_backoff)
                              : retry_.delay_for(attempt);
    } catch (const RateLimitExhausted&) {
      throw;
    } catch (const TransportError& e) {
      if (attempt >= max_attempts) {
        throw TransportError("giving up after " + std::to_string(attempt) +
                             " attempts: " + e.what());
      }
      delay = retry_.delay_for(attempt);
    }
    retries_.fetch_add(1);
    std::this_thread::sleep_for(delay);
  }
}

GatewayStats Gateway::stats() const {
  return {backend_calls_.load(), cache_hits_.load(), retries_.load()};
}

}  // namespace pairwise_vl
