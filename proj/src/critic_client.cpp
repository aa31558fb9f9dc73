// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/critic_client.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "critique_rm/augment.hpp"
#include "critique_rm/digest.hpp"
#include "critique_rm/jsonl.hpp"
#include "critique_rm/rng.hpp"

namespace crm {

namespace {

// Instruction paragraph of the point-wise critique template, v1.
constexpr const char* kCritiqueInstructionV1 =
    "Please provide a critique of the last response in one short paragraph. Your critique "
    "should be concise, specific, insightful and to the point. Aspects you should consider "
    "are: (1) Helpfulness. A good response should precisely/closely answer the user’s "
    "request. (2) Correctness. A good response should be honest and factually correct.";

}  // namespace

void CritiqueRequest::validate() const {
  if (conversation.empty() || conversation.back().role != Role::kChatbot) {
    throw SchemaViolationError("conversation", "must end with the chatbot completion");
  }
  if (template_version != kCritiqueTemplateV1) {
    throw SchemaViolationError("template_version", "unregistered template " + template_version);
  }
  if (decoding.temperature < 0.0) throw SchemaViolationError("temperature", "must be >= 0");
  if (decoding.max_tokens <= 0) throw SchemaViolationError("max_tokens", "must be > 0");
}

std::string render_critique_prompt(const std::vector<Message>& prompt,
                                   const std::string& completion) {
  if (completion.empty()) throw EmptyCompletionError();
  std::vector<Message> conversation = prompt;
  conversation.push_back({Role::kChatbot, completion});
  return serialize_conversation(conversation) + "\n\n" + kCritiqueInstructionV1;
}

std::string cache_key(const std::string& backend_name, const CritiqueRequest& request) {
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& m : request.conversation) conv.push_back(to_json(m));
  nlohmann::json j{{"backend", backend_name},
                   {"template_version", request.template_version},
                   {"conversation", std::move(conv)},
                   {"temperature", request.decoding.temperature},
                   {"max_tokens", request.decoding.max_tokens}};
  return digest_hex(j.dump());
}

CritiqueCache::CritiqueCache(std::string dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string CritiqueCache::entry_path(const std::string& key) const {
  return (std::filesystem::path(dir_) / (key + ".json")).string();
}

std::optional<std::string> CritiqueCache::get(const std::string& key) {
  std::unique_lock lock(mu_);
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  lock.unlock();
  const std::string path = entry_path(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  nlohmann::json entry = nlohmann::json::parse(read_file(path));
  std::string response = entry.at("response").get<std::string>();
  lock.lock();
  memo_[key] = response;
  return response;
}

std::string CritiqueCache::get_or_compute(const std::string& key, const nlohmann::json& meta,
                                          const std::function<std::string()>& compute) {
  for (;;) {
    if (auto hit = get(key)) return *hit;
    {
      std::unique_lock lock(mu_);
      if (memo_.count(key)) return memo_[key];
      if (in_flight_.count(key)) {
        // Another thread is computing this key; wait and re-check.
        cv_.wait(lock, [&] { return in_flight_.count(key) == 0; });
        continue;
      }
      in_flight_.insert(key);
    }
    try {
      std::string response = compute();
      nlohmann::json entry = meta;
      entry["key"] = key;
      entry["response"] = response;
      write_file_atomic(entry_path(key), entry.dump() + "\n");
      {
        std::lock_guard lock(mu_);
        memo_[key] = response;
        in_flight_.erase(key);
      }
      cv_.notify_all();
      return response;
    } catch (...) {
      {
        std::lock_guard lock(mu_);
        in_flight_.erase(key);
      }
      cv_.notify_all();
      throw;
    }
  }
}

std::string with_retries(const RetryPolicy& policy, const std::string& jitter_key,
                         const std::function<std::string()>& fn) {
  const int attempts = std::max(1, policy.max_attempts);
  DetRng jitter_rng(derive_seed(0x9e3779b97f4a7c15ull, jitter_key));
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const BackendError& e) {
      if (!e.retriable || attempt >= attempts) throw;
      double delay = policy.base_delay_s * std::pow(2.0, attempt - 1);
      delay *= 1.0 + policy.jitter_fraction * jitter_rng.next_unit();
      if (policy.sleeper) {
        policy.sleeper(delay);
      } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
    }
  }
}

Critique generate_critique(const PreferenceExample& example, Side side, CriticBackend& backend,
                           const Decoding& decoding, CritiqueCache* cache,
                           const std::string& template_version, const RetryPolicy& retry) {
  const std::string& completion = side == Side::kChosen ? example.chosen : example.rejected;
  if (completion.empty()) throw EmptyCompletionError();

  CritiqueRequest request;
  request.conversation = example.prompt;
  request.conversation.push_back({Role::kChatbot, completion});
  request.template_version = template_version;
  request.decoding = decoding;
  request.validate();

  const std::string key = cache_key(backend.name(), request);
  auto call_backend = [&]() -> std::string {
    const std::string rendered = render_critique_prompt(example.prompt, completion);
    std::string reply = with_retries(retry, key, [&] {
      return backend.complete({{Role::kUser, rendered}}, decoding);
    });
    if (reply.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw BackendError(0, false, "backend returned empty critique text");
    }
    return reply;
  };

  std::string text;
  if (cache != nullptr) {
    nlohmann::json meta{{"backend", backend.name()},
                        {"template_version", template_version},
                        {"example_id", example.id},
                        {"side", to_string(side)},
                        {"temperature", decoding.temperature},
                        {"max_tokens", decoding.max_tokens}};
    text = cache->get_or_compute(key, meta, call_backend);
  } else {
    text = call_backend();
  }

  Critique critique;
  critique.example_id = example.id;
  critique.side = side;
  critique.text = text;
  critique.generator = backend.name();
  critique.template_version = template_version;
  return critique;
}

GenerateResult generate_all(const std::vector<PreferenceExample>& dataset,
                            CriticBackend& backend, const Decoding& decoding,
                            CritiqueCache* cache, int max_in_flight,
                            const std::string& template_version, const RetryPolicy& retry) {
  if (max_in_flight < 1) {
    throw SchemaViolationError("max_in_flight", "must be >= 1");
  }
  struct WorkItem {
    const PreferenceExample* example;
    Side side;
  };
  std::vector<WorkItem> work;
  work.reserve(dataset.size() * 2);
  for (const auto& ex : dataset) {
    work.push_back({&ex, Side::kChosen});
    work.push_back({&ex, Side::kRejected});
  }

  GenerateResult result;
  result.report.items = work.size();
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> hits{0};

  auto run_worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      const WorkItem& item = work[i];
      const std::string label = item.example->id + "/" + to_string(item.side);
      try {
        bool was_cached = false;
        if (cache != nullptr) {
          CritiqueRequest probe;
          probe.conversation = item.example->prompt;
          probe.conversation.push_back(
              {Role::kChatbot,
               item.side == Side::kChosen ? item.example->chosen : item.example->rejected});
          probe.template_version = template_version;
          probe.decoding = decoding;
          was_cached = cache->get(cache_key(backend.name(), probe)).has_value();
        }
        Critique c = generate_critique(*item.example, item.side, backend, decoding, cache,
                                       template_version, retry);
        if (was_cached) hits.fetch_add(1);
        std::lock_guard lock(mu);
        result.store.insert(std::move(c));
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        result.report.failures.emplace_back(label, e.what());
      }
    }
  };

  const int workers = std::min<int>(max_in_flight, static_cast<int>(work.size()));
  if (workers <= 1) {
    run_worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_worker);
    for (auto& t : pool) t.join();
  }

  result.report.cache_hits = hits.load();
  result.report.backend_calls = result.store.size() - result.report.cache_hits;
  std::sort(result.report.failures.begin(), result.report.failures.end());
  // Store items in (example_id, side) order, not thread completion order.
  CritiqueStore ordered;
  for (auto& c : result.store.sorted_items()) ordered.insert(std::move(c));
  result.store = std::move(ordered);
  return result;
}

MockCriticBackend::MockCriticBackend() {
  default_reply_ =
      "The response addresses the request directly and appears factually sound, though it "
      "could be more specific in places.";
}

MockCriticBackend MockCriticBackend::from_fixture_file(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  MockCriticBackend mock;
  mock.default_reply_.reset();
  if (j.contains("default")) mock.default_reply_ = j.at("default").get<std::string>();
  if (j.contains("responses")) {
    for (const auto& rule : j.at("responses")) {
      mock.rules_.emplace_back(rule.at("contains").get<std::string>(),
                               rule.at("reply").get<std::string>());
    }
  }
  return mock;
}

void MockCriticBackend::add_rule(std::string contains, std::string reply) {
  rules_.emplace_back(std::move(contains), std::move(reply));
}

std::string MockCriticBackend::complete(const std::vector<Message>& conversation,
                                        const Decoding&) {
  calls_.fetch_add(1);
  if (conversation.empty()) throw BackendError(0, false, "empty conversation");
  std::string transcript;
  for (const auto& m : conversation) {
    transcript += m.content;
    transcript += '\n';
  }
  for (const auto& [needle, reply] : rules_) {
    if (transcript.find(needle) != std::string::npos) return reply;
  }
  if (default_reply_) return *default_reply_;
  throw BackendError(404, false, "no fixture rule matches the request");
}

HttpCriticBackend::HttpCriticBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw SchemaViolationError("base_url", "HTTP backend requires a base URL");
  }
  if (config_.api_key.empty()) {
    const char* env = std::getenv(kApiKeyEnvVar);
    if (env != nullptr) config_.api_key = env;
  }
}

std::string HttpCriticBackend::name() const { return "http:" + config_.model; }

std::string HttpCriticBackend::complete(const std::vector<Message>& conversation,
                                        const Decoding& decoding) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : conversation) {
    messages.push_back({{"role", m.role == Role::kUser ? "user" : "assistant"},
                        {"content", m.content}});
  }
  nlohmann::json body{{"model", config_.model},
                      {"messages", std::move(messages)},
                      {"temperature", decoding.temperature},
                      {"max_tokens", decoding.max_tokens}};

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_s);
  client.set_read_timeout(config_.timeout_s);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError(0, true, "transport failure: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw BackendError(res->status, true, "server busy or failing");
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(res->status, false, res->body.substr(0, 200));
  }
  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
    throw BackendError(res->status, false, "malformed completion response");
  }
  try {
    return reply["choices"][0].at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw BackendError(res->status, false, "missing message content in response");
  }
}

}  // namespace crm
