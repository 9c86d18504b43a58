#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lpesql/cross_consistency.hpp"
#include "lpesql/dataset.hpp"

namespace lpesql {

struct InitStrategy {
  enum class Kind { kEmpty, kSeed, kPreloaded };
  Kind kind = Kind::kEmpty;
  std::size_t seed_n = 1000;           // kSeed
  std::filesystem::path preloaded_dir;  // kPreloaded

  /// "empty", "seed:<n>", "preloaded:<dir>".
  static InitStrategy parse(const std::string& spec);
};

struct RunConfig {
  std::size_t k = 4;
  std::vector<double> rates{1.0, 0.5, 0.0};
  CompletionParams params;
  int timeout_ms = kDefaultTimeoutMs;
  InfoMode info_mode = InfoMode::kHigh;
  bool continuous_accumulation = true;
  InitStrategy init;
  std::uint64_t seed_sample_seed = 42;
  std::filesystem::path db_root;
  bool shared_kb = false;
  EncoderConfig encoder;
  /// Stand-in demonstrations while a branch's notebooks are both empty.
  std::shared_ptr<const Notebook<CorrectEntry>> fixed_examples;

  void validate() const;
  PipelineConfig pipeline(Origin origin) const;
  BranchSet fresh_branches() const;
};

/// Where each branch of a set lives under a knowledge-base root:
/// `cr_<rate with two decimals>/`, or `shared/` for a shared store.
std::filesystem::path branch_dir(const std::filesystem::path& root,
                                 double rate, bool shared);
void persist_branches(const BranchSet& branches,
                      const std::filesystem::path& root);
BranchSet load_branches(const std::filesystem::path& root, const RunConfig& cfg);

/// Caches schema dumps per database.
class SchemaCache {
 public:
  explicit SchemaCache(std::filesystem::path db_root)
      : db_root_(std::move(db_root)) {}
  const std::string& get(const std::string& db_id);

 private:
  std::filesystem::path db_root_;
  std::map<std::string, std::string> cache_;
};

struct SeedSummary {
  std::vector<std::string> sampled_ids;
  std::size_t entries_added = 0;
  std::size_t invalid_gold = 0;
  std::size_t aborted = 0;
};

/// Samples `n` training items (seed_sample_seed) and runs them through the
/// branches with accumulation forced on and origin "seed". No scoring.
SeedSummary seed(const std::vector<TaskItem>& train_items, std::size_t n,
                 BranchSet& branches, CompletionProvider& provider,
                 const RunConfig& cfg);

struct BucketStats {
  std::size_t count = 0;
  std::size_t correct = 0;
  double ex() const;
};

struct ItemVerdict {
  std::string question_id;
  Difficulty difficulty;
  bool correct = false;
};

struct EvalReport {
  std::array<BucketStats, 3> buckets{};  // indexed by Difficulty
  BucketStats total;
  std::vector<ItemVerdict> verdicts;
  std::int64_t provider_calls = 0;
  std::int64_t tokens = 0;

  void add(const ItemVerdict& v);
  const BucketStats& bucket(Difficulty d) const {
    return buckets[static_cast<std::size_t>(d)];
  }
};

/// The EX table as plain text (two decimals).
std::string render_report(const EvalReport& report);
/// The report, verdicts included, as pretty-printed JSON.
std::string report_json(const EvalReport& report);

/// Rebuilds the report from a run log (completed items only).
EvalReport report_from_log(const std::filesystem::path& run_log);

/// Processes the items in order and appends one line per branch plus one
/// final line per item to `run_log`. If the log already holds completed
/// items, they are replayed into the branches and skipped; a partially
/// written trailing item is discarded first.
EvalReport evaluate(const std::vector<TaskItem>& items, BranchSet& branches,
                    CompletionProvider& provider, const RunConfig& cfg,
                    const std::filesystem::path& run_log);

/// Stops evaluate() after this many newly processed items (crash drills).
struct EvalLimits {
  std::optional<std::size_t> stop_after;
};
EvalReport evaluate(const std::vector<TaskItem>& items, BranchSet& branches,
                    CompletionProvider& provider, const RunConfig& cfg,
                    const std::filesystem::path& run_log,
                    const EvalLimits& limits);

}  // namespace lpesql
