#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lpesql/notebook.hpp"
#include "lpesql/prompts.hpp"
#include "lpesql/provider.hpp"
#include "lpesql/sql_runtime.hpp"

namespace lpesql {

enum class Difficulty { kSimple, kModerate, kChallenging };

inline constexpr Difficulty kAllDifficulties[] = {
    Difficulty::kSimple, Difficulty::kModerate, Difficulty::kChallenging};

std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view s);

struct TaskItem {
  std::string question_id;
  std::string db_id;
  std::string question;
  std::string hint;
  std::string gold_sql;
  Difficulty difficulty = Difficulty::kSimple;
};

enum class InfoMode { kHigh, kLow };

std::string_view to_string(InfoMode m);
InfoMode info_mode_from_string(std::string_view s);

struct PipelineConfig {
  std::filesystem::path db_root;
  int timeout_ms = kDefaultTimeoutMs;
  InfoMode info_mode = InfoMode::kHigh;
  bool continuous_accumulation = true;
  CompletionParams params;
  /// Origin stamped on entries this pipeline adds.
  Origin origin = Origin::kAccumulated;
  /// Used only while both notebooks of a branch are empty.
  const Notebook<CorrectEntry>* fixed_examples = nullptr;
};

inline constexpr const char* kNoSqlExtracted = "no SQL extracted";

struct PromptRecord {
  PromptKind kind;
  std::string digest;
};

/// Everything one branch produced for one item.
struct BranchOutcome {
  double correct_rate = 0.0;
  DemonstrationSet demonstrations;
  std::string first_sql;
  ExecOutcome first_exec = ExecOutcome::failure("not executed");
  std::string thought;
  std::optional<std::string> exec_error;     // set iff a reflection ran
  std::optional<std::string> reflected_sql;  // set iff a reflection ran
  std::string final_sql;
  ExecOutcome final_exec = ExecOutcome::failure("not executed");
  int provider_calls = 0;
  std::int64_t tokens = 0;
  std::vector<PromptRecord> prompts;
  /// Set when the provider gave up; the branch then counts as a failure.
  std::optional<std::string> aborted;
};

/// A branch whose provider failed: votes as a synthetic Failure.
BranchOutcome aborted_outcome(double correct_rate, std::string reason);

struct NotebookDelta {
  enum class Kind { kAddedCorrect, kAddedMistake, kNoUpdate };
  Kind kind = Kind::kNoUpdate;
  std::int64_t seq = 0;
  /// Why no update happened ("accumulation off", "invalid gold: ...").
  std::string note;
  std::optional<CorrectRecord> correct;
  std::optional<MistakeRecord> mistake;
  int provider_calls = 0;
  std::int64_t tokens = 0;
  std::vector<PromptRecord> prompts;
};

std::string_view to_string(NotebookDelta::Kind k);

/// Retrieve, generate, explain, execute, and reflect once on an execution
/// error. Throws ProviderError when the provider gives up.
BranchOutcome answer(const TaskItem& item, const KnowledgeBase& kb,
                     const DemonstrationPlan& plan, CompletionProvider& provider,
                     const std::string& schema_text, const PipelineConfig& cfg);

/// Compares against the gold execution and files the item into the correct
/// or mistake notebook. Executes the gold SQL itself.
NotebookDelta rethink_update(const BranchOutcome& outcome, const TaskItem& item,
                             KnowledgeBase& kb, CompletionProvider& provider,
                             const std::string& schema_text,
                             const PipelineConfig& cfg);

/// As above with a precomputed gold execution.
NotebookDelta rethink_update(const BranchOutcome& outcome, const TaskItem& item,
                             KnowledgeBase& kb, CompletionProvider& provider,
                             const std::string& schema_text,
                             const PipelineConfig& cfg,
                             const ExecOutcome& gold_exec);

/// Reviewer-supplied verdict instead of gold execution. `item.gold_sql`
/// carries the reviewer's reference SQL for the mistake path.
NotebookDelta rethink_update_with_verdict(const BranchOutcome& outcome,
                                          const TaskItem& item,
                                          KnowledgeBase& kb,
                                          CompletionProvider& provider,
                                          const std::string& schema_text,
                                          const PipelineConfig& cfg,
                                          bool verdict_correct);

/// Re-applies a logged delta (used when resuming a run).
void replay_delta(const NotebookDelta& delta, KnowledgeBase& kb);

}  // namespace lpesql
