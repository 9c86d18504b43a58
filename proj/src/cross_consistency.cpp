#include "lpesql/cross_consistency.hpp"

#include <algorithm>
#include <set>

#include "lpesql/error.hpp"

namespace lpesql {

BranchSet BranchSet::with_rates(const std::vector<double>& rates, std::size_t k,
                                const EncoderConfig& encoder, bool shared) {
  BranchSet set;
  set.shared_kb = shared;
  auto common = shared ? std::make_shared<KnowledgeBase>(encoder) : nullptr;
  for (double r : rates) {
    set.branches.push_back(
        {DemonstrationPlan{k, r},
         shared ? common : std::make_shared<KnowledgeBase>(encoder)});
  }
  set.validate();
  return set;
}

BranchSet BranchSet::canonical(std::size_t k, const EncoderConfig& encoder,
                               bool shared) {
  return with_rates({1.0, 0.5, 0.0}, k, encoder, shared);
}

void BranchSet::validate() const {
  if (branches.empty()) throw ConfigError("branch set is empty");
  std::set<double> rates;
  std::set<const KnowledgeBase*> stores;
  for (const auto& b : branches) {
    b.plan.validate();
    if (!b.kb) throw ConfigError("branch without a knowledge base");
    if (!rates.insert(b.plan.correct_rate).second) {
      throw ConfigError("branch correct rates must be distinct");
    }
    stores.insert(b.kb.get());
  }
  if (!shared_kb && stores.size() != branches.size()) {
    throw ConfigError("branches must use distinct knowledge bases");
  }
  if (shared_kb && stores.size() != 1) {
    throw ConfigError("shared mode requires a single knowledge base");
  }
}

double rate_priority(double rate) {
  if (rate == 0.5) return 0.0;
  if (rate == 1.0) return 1.0;
  if (rate == 0.0) return 2.0;
  return 3.0 + (1.0 - rate);
}

VoteResult vote_detailed(const std::vector<BranchOutcome>& outcomes) {
  if (outcomes.empty()) throw ConfigError("vote over no outcomes");

  // Candidate indices in priority order, so the first member of any group
  // is that group's representative.
  std::vector<std::size_t> order(outcomes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rate_priority(outcomes[a].correct_rate) <
           rate_priority(outcomes[b].correct_rate);
  });

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i : order) {
    if (!outcomes[i].final_exec.is_rows()) continue;
    bool placed = false;
    for (auto& g : groups) {
      if (outcomes_equal(outcomes[g.front()].final_exec, outcomes[i].final_exec)) {
        g.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({i});
  }

  VoteResult result;
  if (groups.empty()) {
    result.chosen = order.front();
    return result;
  }
  // Groups were opened in priority order of their representatives, so a
  // stable sort by size keeps the tie order.
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  result.chosen = groups.front().front();
  for (const auto& g : groups) result.group_sizes.push_back(g.size());
  return result;
}

std::size_t vote(const std::vector<BranchOutcome>& outcomes) {
  return vote_detailed(outcomes).chosen;
}

namespace {

FinalAnswer assemble(std::vector<BranchOutcome> outcomes,
                     std::vector<NotebookDelta> deltas) {
  auto v = vote_detailed(outcomes);
  FinalAnswer fa;
  fa.chosen_index = v.chosen;
  fa.chosen_sql = outcomes[v.chosen].final_sql;
  fa.chosen_rate = outcomes[v.chosen].correct_rate;
  fa.vote_group_sizes = std::move(v.group_sizes);
  fa.branch_outcomes = std::move(outcomes);
  fa.deltas = std::move(deltas);
  return fa;
}

BranchOutcome answer_or_abort(const TaskItem& item, const Branch& b,
                              CompletionProvider& provider,
                              const std::string& schema_text,
                              const PipelineConfig& cfg) {
  try {
    return answer(item, *b.kb, b.plan, provider, schema_text, cfg);
  } catch (const ProviderError& e) {
    return aborted_outcome(b.plan.correct_rate, e.what());
  }
}

}  // namespace

FinalAnswer run(const TaskItem& item, BranchSet& branches,
                CompletionProvider& provider, const std::string& schema_text,
                const PipelineConfig& cfg, const ExecOutcome& gold_exec) {
  branches.validate();
  std::vector<BranchOutcome> outcomes;
  std::vector<NotebookDelta> deltas;
  if (!branches.shared_kb) {
    for (auto& b : branches.branches) {
      outcomes.push_back(answer_or_abort(item, b, provider, schema_text, cfg));
      deltas.push_back(rethink_update(outcomes.back(), item, *b.kb, provider,
                                      schema_text, cfg, gold_exec));
    }
    return assemble(std::move(outcomes), std::move(deltas));
  }
  // Shared store: every branch answers before any update, so no branch sees
  // another branch's entry for the same item.
  for (const auto& b : branches.branches) {
    outcomes.push_back(answer_or_abort(item, b, provider, schema_text, cfg));
  }
  for (const auto& o : outcomes) {
    deltas.push_back(rethink_update(o, item, *branches.branches.front().kb,
                                    provider, schema_text, cfg, gold_exec));
  }
  return assemble(std::move(outcomes), std::move(deltas));
}

FinalAnswer run(const TaskItem& item, BranchSet& branches,
                CompletionProvider& provider, const std::string& schema_text,
                const PipelineConfig& cfg) {
  const auto gold = execute(database_path(cfg.db_root, item.db_id),
                            item.gold_sql, cfg.timeout_ms);
  return run(item, branches, provider, schema_text, cfg, gold);
}

FinalAnswer run_without_update(const TaskItem& item, const BranchSet& branches,
                               CompletionProvider& provider,
                               const std::string& schema_text,
                               const PipelineConfig& cfg) {
  branches.validate();
  std::vector<BranchOutcome> outcomes;
  std::vector<NotebookDelta> deltas;
  for (const auto& b : branches.branches) {
    outcomes.push_back(answer_or_abort(item, b, provider, schema_text, cfg));
    NotebookDelta d;
    d.note = "no gold available";
    deltas.push_back(std::move(d));
  }
  return assemble(std::move(outcomes), std::move(deltas));
}

}  // namespace lpesql
