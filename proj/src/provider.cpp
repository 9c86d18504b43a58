#include "lpesql/provider.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lpesql/error.hpp"
#include "lpesql/text_util.hpp"

namespace lpesql {

namespace {
std::atomic<std::int64_t> g_remote_requests{0};
}  // namespace

void CompletionParams::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_output_tokens <= 0) {
    throw ConfigError("max_output_tokens must be positive");
  }
}

Completion complete(CompletionProvider& provider, PromptKind kind,
                    std::string_view prompt, const CompletionParams& params) {
  params.validate();
  auto out = provider.complete(kind, prompt, params);
  if (trim(out.text).empty()) {
    throw ProviderError(std::string("empty completion for ") +
                        std::string(to_string(kind)) + " prompt");
  }
  return out;
}

// ---- scripted --------------------------------------------------------------

ScriptedProvider::ScriptedProvider(std::vector<ScriptRule> rules) {
  rules_.reserve(rules.size());
  for (auto& r : rules) rules_.push_back({std::move(r), 0});
}

ScriptedProvider ScriptedProvider::sequence(PromptKind kind,
                                            std::vector<std::string> responses) {
  ScriptRule rule;
  rule.kind = kind;
  rule.responses = std::move(responses);
  return ScriptedProvider({std::move(rule)});
}

ScriptedProvider ScriptedProvider::from_json_text(std::string_view text) {
  std::vector<ScriptRule> rules;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& r : j.at("rules")) {
      ScriptRule rule;
      if (r.contains("kind")) {
        rule.kind = prompt_kind_from_string(r["kind"].get<std::string>());
      }
      if (r.contains("ordinal")) rule.ordinal = r["ordinal"].get<std::size_t>();
      if (r.contains("digest")) rule.digest = r["digest"].get<std::string>();
      if (r.contains("contains")) {
        rule.contains = r["contains"].get<std::string>();
      }
      rule.responses = r.at("responses").get<std::vector<std::string>>();
      rule.repeat = r.value("repeat", false);
      if (rule.responses.empty()) {
        throw ConfigError("script rule with no responses");
      }
      rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed script: ") + e.what());
  }
  return ScriptedProvider(std::move(rules));
}

ScriptedProvider ScriptedProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

Completion ScriptedProvider::complete(PromptKind kind, std::string_view prompt,
                                      const CompletionParams&) {
  std::lock_guard lock(mu_);
  std::size_t ordinal = 1;
  for (const auto& e : ledger_) {
    if (e.kind == kind) ++ordinal;
  }
  const auto digest = prompt_digest(prompt);
  ledger_.push_back({kind, ordinal, digest});

  for (auto& state : rules_) {
    const auto& r = state.rule;
    if (r.kind && *r.kind != kind) continue;
    if (r.ordinal && *r.ordinal != ordinal) continue;
    if (r.digest && *r.digest != digest) continue;
    if (r.contains && prompt.find(*r.contains) == std::string_view::npos) {
      continue;
    }
    if (state.next < r.responses.size()) {
      return {r.responses[state.next++], 0, 0};
    }
    if (r.repeat) return {r.responses.back(), 0, 0};
  }
  throw ProviderError("scripted provider exhausted: no completion for " +
                      std::string(to_string(kind)) + "#" +
                      std::to_string(ordinal) + " (digest " + digest + ")");
}

std::vector<LedgerEntry> ScriptedProvider::ledger() const {
  std::lock_guard lock(mu_);
  return ledger_;
}

std::size_t ScriptedProvider::calls(PromptKind kind) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : ledger_) n += (e.kind == kind);
  return n;
}

std::size_t ScriptedProvider::total_calls() const {
  std::lock_guard lock(mu_);
  return ledger_.size();
}

// ---- remote ----------------------------------------------------------------

bool RetryPolicy::retryable_status(int status) {
  return status == 429 || (status >= 500 && status <= 599);
}

std::chrono::milliseconds RetryPolicy::backoff_before(int attempt) const {
  // attempt is 1-based; no wait before the first one.
  if (attempt <= 1) return std::chrono::milliseconds{0};
  const double scale = std::pow(multiplier, attempt - 2);
  return std::chrono::milliseconds(
      static_cast<std::int64_t>(initial_backoff.count() * scale));
}

void RemoteProviderConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("remote provider needs an endpoint");
  if (model.empty()) throw ConfigError("remote provider needs a model");
  if (retry.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

RemoteChatProvider::RemoteChatProvider(RemoteProviderConfig cfg)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::int64_t RemoteChatProvider::process_requests() {
  return g_remote_requests.load();
}

Completion RemoteChatProvider::complete(PromptKind, std::string_view prompt,
                                        const CompletionParams& params) {
  const auto url = split_url(cfg_.endpoint);
  nlohmann::json body = {
      {"model", cfg_.model},
      {"messages", {{{"role", "user"}, {"content", std::string(prompt)}}}},
      {"temperature", params.temperature},
      {"max_tokens", params.max_output_tokens}};
  const auto payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    std::this_thread::sleep_for(cfg_.retry.backoff_before(attempt));
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
    ++requests_;
    ++g_remote_requests;
    auto res = client.Post(url.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "status " + std::to_string(res->status);
      if (RetryPolicy::retryable_status(res->status)) continue;
      throw ProviderError("completion endpoint returned " + last_error + ": " +
                          res->body.substr(0, 200));
    }
    try {
      auto reply = nlohmann::json::parse(res->body);
      Completion out;
      const auto& content = reply.at("choices").at(0).at("message").at("content");
      out.text = content.is_null() ? std::string() : content.get<std::string>();
      if (reply.contains("usage")) {
        out.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
        out.completion_tokens = reply["usage"].value("completion_tokens", 0);
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("malformed completion reply: ") +
                          e.what());
    }
  }
  throw ProviderError("completion failed after " +
                      std::to_string(cfg_.retry.max_attempts) +
                      " attempts: " + last_error);
}

}  // namespace lpesql
