// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pairwise_vl/dataset.hpp"
#include "pairwise_vl/errors.hpp"
#include "pairwise_vl/prompts.hpp"

namespace pairwise_vl {

/// Endpoint description, read from the backend spec file. The API key is
/// never stored; only the name of the environment variable holding it.
///
/// `mock` selects an in-process backend instead of HTTP: "oracle",
/// "anti-oracle", "uniform-random" or "scripted" (with `script`).
struct BackendSpec {
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  double temperature = 0.0;
  int max_tokens = 1024;
  double request_timeout = 60.0;  // seconds
  int max_retries = 3;
  int requests_per_minute = 60;

  std::string mock;
  std::filesystem::path script;

  /// Throws UsageError on a bad field.
  void validate() const;
  bool is_mock() const { return !mock.empty(); }

  static BackendSpec from_json(const nlohmann::json& j);
  static BackendSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct ModelResponse {
  std::string text;
  std::string finish_reason;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  double latency = 0.0;  // seconds, of the original fetch
  bool cached = false;
  int attempt_count = 1;
};

/// Identifies the probe a request belongs to. Mocks answer from it; the
/// HTTP backend ignores it.
struct RequestContext {
  Probe probe;
  std::string config_name;
  int turn = 1;
  bool description_request = false;
  bool swapped = false;
};

/// HTTP failure with a status code. 429, 408 and 5xx are retried.
class HttpStatusError : public TransportError {
 public:
  HttpStatusError(int status, std::string body,
                  std::optional<std::chrono::milliseconds> retry_after = std::nullopt);
  int status() const noexcept { return status_; }
  const std::optional<std::chrono::milliseconds>& retry_after() const noexcept {
    return retry_after_;
  }
  bool retryable() const noexcept;

 private:
  int status_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

class Backend {
 public:
  virtual ~Backend() = default;

  /// One attempt. Retrying is the gateway's job.
  virtual ModelResponse send(const MessageSequence& messages, const RequestContext& context) = 0;

  /// Stands in for the model name in cache keys.
  virtual std::string cache_identity() const = 0;

  /// Remote backends are rate limited and have their latency measured.
  virtual bool is_remote() const { return false; }
};

/// Chat-completions client for `{base_url}/chat/completions`.
std::unique_ptr<Backend> make_http_backend(const BackendSpec& spec);

/// Canned responses for the scripted mock. Entries are looked up by the
/// request digest (MessageSequence::digest) first, then by
/// (pair id, probe label, config name, turn), then with config "*".
class ScriptTable {
 public:
  void add_for_request(const Digest& request_digest, std::string text);
  void add(std::int64_t pair_id, const std::string& probe_label, const std::string& config,
           int turn, std::string text);

  std::optional<std::string> find(const Digest& request_digest,
                                  const RequestContext& context) const;
  std::size_t size() const noexcept { return by_request_.size() + by_probe_.size(); }

  /// Line-delimited JSON; each line has `text` plus either
  /// `request_digest` or `pair_id` + `probe` (+ optional `config`, `turn`).
  static ScriptTable load(const std::filesystem::path& path);
  std::string to_jsonl() const;

 private:
  std::map<std::string, std::string> by_request_;
  std::map<std::tuple<std::int64_t, std::string, std::string, int>, std::string> by_probe_;
};

enum class MockKind { kOracle, kAntiOracle, kUniformRandom, kScripted };

std::optional<MockKind> parse_mock_kind(std::string_view name);

struct MockSpec {
  MockKind kind = MockKind::kOracle;
  std::uint64_t seed = 0;
  ScriptTable table;
};

std::unique_ptr<Backend> make_mock(MockSpec spec);

/// Builds whatever `spec` describes; `seed` feeds the uniform-random mock.
std::unique_ptr<Backend> make_backend(const BackendSpec& spec, std::uint64_t seed);

using CacheKey = Digest;

CacheKey make_cache_key(std::string_view model_identity, double temperature, int max_tokens,
                        const MessageSequence& messages);

/// `$PAIRWISE_VL_CACHE_DIR`, else "./cache".
std::filesystem::path default_cache_dir();

/// Content-addressed on-disk store: `<root>/<first-2-hex>/<key>.json`.
/// Records are written once and never replaced.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  std::optional<ModelResponse> load(const CacheKey& key) const;
  void store(const CacheKey& key, const MessageSequence& messages, const ModelResponse& response,
             std::string_view model_identity);

  std::filesystem::path path_for(const CacheKey& key) const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::mutex& stripe(const CacheKey& key) const;

  std::filesystem::path root_;
  mutable std::array<std::mutex, 64> stripes_;
};

/// Shared token bucket; `acquire` blocks until a token is available.
class TokenBucket {
 public:
  TokenBucket(double tokens_per_second, double capacity);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  std::mutex mu_;
  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

struct RetryPolicy {
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};

  std::chrono::milliseconds delay_for(int failed_attempt) const;
};

struct GatewayStats {
  std::uint64_t backend_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
};

struct CompleteOptions {
  /// Skip the cache lookup (the response is still written if absent).
  bool bypass_cache_read = false;
};

/// Caching, rate-limited, retrying front end over a Backend. Thread-safe.
class Gateway {
 public:
  Gateway(BackendSpec spec, std::unique_ptr<Backend> backend,
          std::shared_ptr<ResponseCache> cache, RetryPolicy retry = {});

  ModelResponse complete(const MessageSequence& messages, const RequestContext& context = {},
                         const CompleteOptions& options = {});

  GatewayStats stats() const;
  const BackendSpec& spec() const noexcept { return spec_; }
  CacheKey key_for(const MessageSequence& messages) const;

 private:
  BackendSpec spec_;
  std::unique_ptr<Backend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  RetryPolicy retry_;
  TokenBucket limiter_;
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> retries_{0};
};

}  // namespace pairwise_vl
