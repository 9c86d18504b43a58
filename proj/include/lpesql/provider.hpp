#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lpesql/prompts.hpp"

namespace lpesql {

struct CompletionParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;

  void validate() const;
};

struct Completion {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

/// Anything that turns a rendered prompt into text. The kind is passed
/// alongside the prompt so that scripted providers can key on it; remote
/// providers ignore it.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual Completion complete(PromptKind kind, std::string_view prompt,
                              const CompletionParams& params) = 0;
};

/// One provider call per invocation. Rejects empty completions.
Completion complete(CompletionProvider& provider, PromptKind kind,
                    std::string_view prompt, const CompletionParams& params);

// ---- scripted provider -----------------------------------------------------

/// A scripted response rule. A call matches when every set constraint holds:
/// the kind equals, the per-kind ordinal (1-based) equals, the prompt digest
/// equals, and the prompt contains the substring. Matching rules hand out
/// their responses in order; with `repeat` the last response is reused.
struct ScriptRule {
  std::optional<PromptKind> kind;
  std::optional<std::size_t> ordinal;
  std::optional<std::string> digest;
  std::optional<std::string> contains;
  std::vector<std::string> responses;
  bool repeat = false;
};

struct LedgerEntry {
  PromptKind kind;
  std::size_t ordinal;  // per-kind, 1-based
  std::string digest;
};

/// Deterministic, network-free provider replaying a script. The first rule
/// (in script order) that matches and still has a response wins.
///
/// Script file format (JSON):
///   {"rules": [{"kind": "GenerateSql", "contains": "-- How many ...",
///               "responses": ["SELECT ..."], "repeat": false}, ...]}
/// `kind`, `ordinal`, `digest`, `contains` and `repeat` are optional.
class ScriptedProvider : public CompletionProvider {
 public:
  explicit ScriptedProvider(std::vector<ScriptRule> rules);

  /// Every call of `kind` returns the next string of `responses`.
  static ScriptedProvider sequence(PromptKind kind,
                                   std::vector<std::string> responses);
  static ScriptedProvider from_file(const std::filesystem::path& path);
  static ScriptedProvider from_json_text(std::string_view text);

  Completion complete(PromptKind kind, std::string_view prompt,
                      const CompletionParams& params) override;

  std::vector<LedgerEntry> ledger() const;
  std::size_t calls(PromptKind kind) const;
  std::size_t total_calls() const;

 private:
  struct RuleState {
    ScriptRule rule;
    std::size_t next = 0;
  };
  mutable std::mutex mu_;
  std::vector<RuleState> rules_;
  std::vector<LedgerEntry> ledger_;
};

// ---- remote chat-completions provider ---------------------------------------

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;

  /// Transport failures, 429 and 5xx are retryable; other statuses are not.
  static bool retryable_status(int status);
  std::chrono::milliseconds backoff_before(int attempt) const;
};

struct RemoteProviderConfig {
  std::string endpoint;  // e.g. https://api.openai.com/v1/chat/completions
  std::string model;
  std::string api_key_env = "LPESQL_API_KEY";
  int timeout_ms = 120000;
  RetryPolicy retry;

  void validate() const;
};

/// Chat-completions client: one user message carrying the rendered prompt.
class RemoteChatProvider : public CompletionProvider {
 public:
  explicit RemoteChatProvider(RemoteProviderConfig cfg);

  Completion complete(PromptKind kind, std::string_view prompt,
                      const CompletionParams& params) override;

  /// HTTP requests sent by this instance, retries included.
  std::int64_t requests_sent() const { return requests_.load(); }

  /// HTTP requests sent by all remote providers in this process.
  static std::int64_t process_requests();

 private:
  RemoteProviderConfig cfg_;
  std::atomic<std::int64_t> requests_{0};
};

}  // namespace lpesql
