// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "critique_rm/prefdata.hpp"

namespace crm {

struct Decoding {
  double temperature = 0.0;
  int max_tokens = 512;
};

struct BackendError : std::runtime_error {
  int status;
  bool retriable;
  BackendError(int http_status, bool can_retry, const std::string& why)
      : std::runtime_error("backend error (status " + std::to_string(http_status) + "): " + why),
        status(http_status),
        retriable(can_retry) {}
};

struct EmptyCompletionError : std::runtime_error {
  EmptyCompletionError() : std::runtime_error("completion under critique is empty") {}
};

// Interchangeable critique/judge model backend.
class CriticBackend {
 public:
  virtual ~CriticBackend() = default;
  virtual std::string name() const = 0;
  virtual std::string complete(const std::vector<Message>& conversation,
                               const Decoding& decoding) = 0;
};

inline constexpr const char* kCritiqueTemplateV1 = "critique-v1";

struct CritiqueRequest {
  std::vector<Message> conversation;  // ends with the completion under critique
  std::string template_version = kCritiqueTemplateV1;
  Decoding decoding;

  void validate() const;
};

// Point-wise critique prompt: the conversation as User:/Chatbot: blocks
// followed by the fixed instruction paragraph. Byte-stable per
// template_version (golden-file tested).
std::string render_critique_prompt(const std::vector<Message>& prompt,
                                   const std::string& completion);

// Digest over (backend name, template_version, conversation, decoding).
std::string cache_key(const std::string& backend_name, const CritiqueRequest& request);

// Content-addressed response cache: one JSON file per key, written
// atomically (temp + rename). Guarantees at most one compute per key per
// process, including under concurrency.
class CritiqueCache {
 public:
  explicit CritiqueCache(std::string dir);

  std::optional<std::string> get(const std::string& key);
  std::string get_or_compute(const std::string& key, const nlohmann::json& meta,
                             const std::function<std::string()>& compute);

 private:
  std::string entry_path(const std::string& key) const;

  std::string dir_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, std::string> memo_;
  std::set<std::string> in_flight_;
};

struct RetryPolicy {
  int max_attempts = 3;
  double base_delay_s = 1.0;
  double jitter_fraction = 0.25;
  // Injectable for tests; default sleeps for the given seconds.
  std::function<void(double)> sleeper;
};

// Calls fn with retry/backoff per policy. Retriable BackendErrors are
// retried at most max_attempts times total; everything else propagates.
std::string with_retries(const RetryPolicy& policy, const std::string& jitter_key,
                         const std::function<std::string()>& fn);

Critique generate_critique(const PreferenceExample& example, Side side, CriticBackend& backend,
                           const Decoding& decoding, CritiqueCache* cache,
                           const std::string& template_version = kCritiqueTemplateV1,
                           const RetryPolicy& retry = {});

struct GenerateReport {
  std::size_t items = 0;
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (example_id/side, error)

  bool ok() const { return failures.empty(); }
};

struct GenerateResult {
  CritiqueStore store;
  GenerateReport report;
};

// Critiques for both sides of every example, up to max_in_flight
// backend requests at a time. Reruns resume from the cache; output order
// is deterministic (sorted by example id, side).
GenerateResult generate_all(const std::vector<PreferenceExample>& dataset,
                            CriticBackend& backend, const Decoding& decoding,
                            CritiqueCache* cache, int max_in_flight,
                            const std::string& template_version = kCritiqueTemplateV1,
                            const RetryPolicy& retry = {});

// Fixture-driven mock: replies are matched by substring against the last
// conversation message, falling back to a default canned critique.
class MockCriticBackend : public CriticBackend {
 public:
  MockCriticBackend();
  MockCriticBackend(MockCriticBackend&& other) noexcept
      : rules_(std::move(other.rules_)),
        default_reply_(std::move(other.default_reply_)),
        calls_(other.calls_.load()) {}
  static MockCriticBackend from_fixture_file(const std::string& path);

  std::string name() const override { return "mock"; }
  std::string complete(const std::vector<Message>& conversation,
                       const Decoding& decoding) override;

  std::size_t calls() const { return calls_.load(); }
  void set_default_reply(std::string reply) { default_reply_ = std::move(reply); }
  void add_rule(std::string contains, std::string reply);

 private:
  std::vector<std::pair<std::string, std::string>> rules_;
  std::optional<std::string> default_reply_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. http://localhost:8080
  std::string path = "/v1/chat/completions";
  std::string model = "default";
  std::string api_key;  // from CRITIQUE_RM_API_KEY when empty
  int timeout_s = 60;
};

inline constexpr const char* kApiKeyEnvVar = "CRITIQUE_RM_API_KEY";

// Generic chat-completions client. POST {model, messages, temperature,
// max_tokens} -> {choices:[{message:{content}}]}. 429/5xx and transport
// failures are retriable; other 4xx are not.
class HttpCriticBackend : public CriticBackend {
 public:
  explicit HttpCriticBackend(HttpBackendConfig config);

  std::string name() const override;
  std::string complete(const std::vector<Message>& conversation,
                       const Decoding& decoding) override;

 private:
  HttpBackendConfig config_;
};

}  // namespace crm
