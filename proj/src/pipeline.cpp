#include "lpesql/pipeline.hpp"

#include "lpesql/error.hpp"
#include "lpesql/text_util.hpp"

namespace lpesql {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kSimple: return "simple";
    case Difficulty::kModerate: return "moderate";
    case Difficulty::kChallenging: return "challenging";
  }
  return "?";
}

Difficulty difficulty_from_string(std::string_view s) {
  for (auto d : kAllDifficulties) {
    if (to_string(d) == s) return d;
  }
  throw DatasetError("unknown difficulty: " + std::string(s));
}

std::string_view to_string(InfoMode m) {
  return m == InfoMode::kHigh ? "high" : "low";
}

InfoMode info_mode_from_string(std::string_view s) {
  if (s == "high") return InfoMode::kHigh;
  if (s == "low") return InfoMode::kLow;
  throw ConfigError("unknown info mode: " + std::string(s));
}

std::string_view to_string(NotebookDelta::Kind k) {
  switch (k) {
    case NotebookDelta::Kind::kAddedCorrect: return "added_correct";
    case NotebookDelta::Kind::kAddedMistake: return "added_mistake";
    case NotebookDelta::Kind::kNoUpdate: return "no_update";
  }
  return "?";
}

BranchOutcome aborted_outcome(double correct_rate, std::string reason) {
  BranchOutcome out;
  out.correct_rate = correct_rate;
  out.final_exec = ExecOutcome::failure("aborted: " + reason);
  out.aborted = std::move(reason);
  return out;
}

namespace {

// Sends one prompt and books it against the call counters.
template <typename Sink>
std::string call(CompletionProvider& provider, PromptKind kind,
                 const std::string& prompt, const PipelineConfig& cfg,
                 Sink& sink) {
  sink.prompts.push_back({kind, prompt_digest(prompt)});
  ++sink.provider_calls;
  auto c = complete(provider, kind, prompt, cfg.params);
  sink.tokens += c.prompt_tokens + c.completion_tokens;
  return c.text;
}

std::string try_extract(const std::string& text) {
  try {
    return extract_sql(text);
  } catch (const NoSqlFound&) {
    return {};
  }
}

ExecOutcome run_sql(const std::string& sql, const TaskItem& item,
                    const PipelineConfig& cfg) {
  if (sql.empty()) return ExecOutcome::failure(kNoSqlExtracted);
  return execute(database_path(cfg.db_root, item.db_id), sql, cfg.timeout_ms);
}

std::string feedback_message(const ExecOutcome& e, const PipelineConfig& cfg) {
  if (e.is_timeout()) {
    return "interrupted: query exceeded the " + std::to_string(cfg.timeout_ms) +
           " ms time limit";
  }
  return e.error_message();
}

NotebookDelta no_update(std::string note) {
  NotebookDelta d;
  d.note = std::move(note);
  return d;
}

NotebookDelta apply_verdict(const BranchOutcome& outcome, const TaskItem& item,
                            KnowledgeBase& kb, CompletionProvider& provider,
                            const std::string& schema_text,
                            const PipelineConfig& cfg, bool correct) {
  NotebookDelta delta;
  if (correct) {
    CorrectRecord rec{item.question, item.hint, outcome.final_sql,
                      cfg.info_mode == InfoMode::kHigh ? outcome.thought : "",
                      cfg.origin, item.db_id};
    delta.kind = NotebookDelta::Kind::kAddedCorrect;
    delta.seq = kb.add_correct(rec);
    delta.correct = std::move(rec);
    return delta;
  }

  std::string tip;
  if (cfg.info_mode == InfoMode::kHigh) {
    PromptContext ctx;
    ctx.schema_text = schema_text;
    ctx.question = item.question;
    ctx.hint = item.hint;
    ctx.sql = outcome.first_sql;
    ctx.exec_error = outcome.exec_error;
    ctx.reflected_sql = outcome.reflected_sql;
    ctx.gold_sql = item.gold_sql;
    try {
      tip = clean_tip(call(provider, PromptKind::kMistakeTip,
                           render(PromptKind::kMistakeTip, ctx), cfg, delta));
    } catch (const ProviderError& e) {
      delta.note = std::string("tip aborted: ") + e.what();
      return delta;
    }
  }
  MistakeRecord rec{item.question,    item.hint,     outcome.first_sql,
                    outcome.exec_error, outcome.reflected_sql, item.gold_sql,
                    tip,              cfg.origin,    item.db_id};
  delta.kind = NotebookDelta::Kind::kAddedMistake;
  delta.seq = kb.add_mistake(rec);
  delta.mistake = std::move(rec);
  return delta;
}

}  // namespace

BranchOutcome answer(const TaskItem& item, const KnowledgeBase& kb,
                     const DemonstrationPlan& plan, CompletionProvider& provider,
                     const std::string& schema_text, const PipelineConfig& cfg) {
  BranchOutcome out;
  out.correct_rate = plan.correct_rate;

  const auto query = embed(item.question, kb.encoder());
  out.demonstrations =
      select_demonstrations(kb, query, plan, cfg.fixed_examples);

  PromptContext ctx;
  ctx.schema_text = schema_text;
  ctx.question = item.question;
  ctx.hint = item.hint;
  ctx.demonstrations = out.demonstrations;

  out.first_sql = try_extract(
      call(provider, PromptKind::kGenerateSql,
           render(PromptKind::kGenerateSql, ctx), cfg, out));

  if (cfg.info_mode == InfoMode::kHigh && !out.first_sql.empty()) {
    PromptContext tctx = ctx;
    tctx.demonstrations = {};
    tctx.sql = out.first_sql;
    out.thought = std::string(trim(call(provider, PromptKind::kThoughtProcess,
                                        render(PromptKind::kThoughtProcess, tctx),
                                        cfg, out)));
  }

  out.first_exec = run_sql(out.first_sql, item, cfg);
  out.final_sql = out.first_sql;
  out.final_exec = out.first_exec;

  if (out.first_exec.is_error()) {
    out.exec_error = feedback_message(out.first_exec, cfg);
    PromptContext rctx = ctx;
    rctx.sql = out.first_sql;
    rctx.exec_error = out.exec_error;
    out.reflected_sql = try_extract(call(provider, PromptKind::kReflectSql,
                                         render(PromptKind::kReflectSql, rctx),
                                         cfg, out));
    out.final_sql = *out.reflected_sql;
    out.final_exec = run_sql(out.final_sql, item, cfg);
  }
  return out;
}

NotebookDelta rethink_update(const BranchOutcome& outcome, const TaskItem& item,
                             KnowledgeBase& kb, CompletionProvider& provider,
                             const std::string& schema_text,
                             const PipelineConfig& cfg,
                             const ExecOutcome& gold_exec) {
  if (!cfg.continuous_accumulation) return no_update("accumulation off");
  if (outcome.aborted) return no_update("aborted: " + *outcome.aborted);
  if (gold_exec.is_error()) {
    return no_update("invalid gold: " + gold_exec.error_message());
  }
  return apply_verdict(outcome, item, kb, provider, schema_text, cfg,
                       outcomes_equal(outcome.final_exec, gold_exec));
}

NotebookDelta rethink_update(const BranchOutcome& outcome, const TaskItem& item,
                             KnowledgeBase& kb, CompletionProvider& provider,
                             const std::string& schema_text,
                             const PipelineConfig& cfg) {
  const auto gold = execute(database_path(cfg.db_root, item.db_id),
                            item.gold_sql, cfg.timeout_ms);
  return rethink_update(outcome, item, kb, provider, schema_text, cfg, gold);
}

NotebookDelta rethink_update_with_verdict(const BranchOutcome& outcome,
                                          const TaskItem& item,
                                          KnowledgeBase& kb,
                                          CompletionProvider& provider,
                                          const std::string& schema_text,
                                          const PipelineConfig& cfg,
                                          bool verdict_correct) {
  if (!cfg.continuous_accumulation) return no_update("accumulation off");
  if (outcome.aborted) return no_update("aborted: " + *outcome.aborted);
  if (verdict_correct && outcome.final_sql.empty()) {
    return no_update("verdict correct but no SQL to store");
  }
  if (!verdict_correct && item.gold_sql.empty()) {
    return no_update("verdict incorrect but no reference SQL supplied");
  }
  return apply_verdict(outcome, item, kb, provider, schema_text, cfg,
                       verdict_correct);
}

void replay_delta(const NotebookDelta& delta, KnowledgeBase& kb) {
  std::int64_t seq = 0;
  switch (delta.kind) {
    case NotebookDelta::Kind::kAddedCorrect:
      seq = kb.add_correct(delta.correct.value());
      break;
    case NotebookDelta::Kind::kAddedMistake:
      seq = kb.add_mistake(delta.mistake.value());
      break;
    case NotebookDelta::Kind::kNoUpdate:
      return;
  }
  if (seq != delta.seq) {
    throw StoreError("replayed delta landed at seq " + std::to_string(seq) +
                     ", log says " + std::to_string(delta.seq));
  }
}

}  // namespace lpesql
