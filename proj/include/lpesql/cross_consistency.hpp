#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lpesql/pipeline.hpp"

namespace lpesql {

/// One correct-rate branch and the knowledge base it reads and grows.
struct Branch {
  DemonstrationPlan plan;
  std::shared_ptr<KnowledgeBase> kb;
};

struct BranchSet {
  std::vector<Branch> branches;
  /// Ablation: every branch points at the same store.
  bool shared_kb = false;

  /// Rates [1, 0.5, 0] over three fresh, disjoint stores (or one shared).
  static BranchSet canonical(std::size_t k, const EncoderConfig& encoder,
                             bool shared = false);
  static BranchSet with_rates(const std::vector<double>& rates, std::size_t k,
                              const EncoderConfig& encoder, bool shared = false);

  /// Distinct rates; distinct stores unless shared_kb.
  void validate() const;
};

/// Tie-break rank of a correct rate: 0.5, then 1, then 0, then any other
/// rate in descending order. Lower is preferred.
double rate_priority(double rate);

struct FinalAnswer {
  std::string chosen_sql;
  double chosen_rate = 0.0;
  std::size_t chosen_index = 0;
  std::vector<BranchOutcome> branch_outcomes;
  std::vector<NotebookDelta> deltas;
  /// Sizes of the agreement groups among Rows outcomes, largest first.
  std::vector<std::size_t> vote_group_sizes;
};

struct VoteResult {
  std::size_t chosen = 0;
  std::vector<std::size_t> group_sizes;
};

/// Largest agreement group among Rows outcomes wins; ties between groups and
/// the representative within a group go by rate_priority. With no Rows
/// outcome at all, the highest-priority branch is chosen.
VoteResult vote_detailed(const std::vector<BranchOutcome>& outcomes);

/// Index of the chosen branch.
std::size_t vote(const std::vector<BranchOutcome>& outcomes);

/// Runs each branch in order (answer, then update of that branch's own store
/// with its own prediction) and votes. With a shared store all branches
/// answer before the updates. A branch whose provider gives up votes as a
/// Failure and leaves its store unchanged.
FinalAnswer run(const TaskItem& item, BranchSet& branches,
                CompletionProvider& provider, const std::string& schema_text,
                const PipelineConfig& cfg);

/// As above with a precomputed gold execution (the harness already has it).
FinalAnswer run(const TaskItem& item, BranchSet& branches,
                CompletionProvider& provider, const std::string& schema_text,
                const PipelineConfig& cfg, const ExecOutcome& gold_exec);

/// No gold available: answers and votes, never touches the stores.
FinalAnswer run_without_update(const TaskItem& item, const BranchSet& branches,
                               CompletionProvider& provider,
                               const std::string& schema_text,
                               const PipelineConfig& cfg);

}  // namespace lpesql
