#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lpesql/pipeline.hpp"
#include "lpesql/text_util.hpp"
#include "support.hpp"

using namespace lpesql;
using lpesql::testing::TempDir;

namespace {

struct Env {
  TempDir dir;
  PipelineConfig cfg;
  std::string schema;
  TaskItem item;
  DemonstrationPlan plan{4, 0.5};

  Env() {
    lpesql::testing::build_fixture_databases(dir / "db");
    cfg.db_root = dir / "db";
    cfg.timeout_ms = 200;
    schema = schema_text(database_path(cfg.db_root, "concert_singer"));
    item = lpesql::testing::make_item(
        "p1", "concert_singer", "How many singers are from France?",
        "SELECT count(*) FROM singer WHERE country = 'France'", Difficulty::kSimple,
        "France refers to country = 'France'");
  }
};

ScriptRule rule(PromptKind kind, std::vector<std::string> responses) {
  ScriptRule r;
  r.kind = kind;
  r.responses = std::move(responses);
  return r;
}

const char* kRight = "SELECT count(*) FROM singer WHERE country = 'France'";
const char* kWrong = "SELECT count(*) FROM singer";
const char* kBroken = "SELECT count(*) FROM singers WHERE country = 'France'";

}  // namespace

TEST_CASE("happy path costs two calls and files a correct entry") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {std::string("```sql\n") + kRight + "\n```"}),
                      rule(PromptKind::kThoughtProcess, {"  Filter on country.  "})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.provider_calls == 2);
  CHECK(out.first_sql == kRight);
  CHECK(out.thought == "Filter on country.");
  CHECK(out.first_exec.is_rows());
  CHECK_FALSE(out.exec_error.has_value());
  CHECK(out.final_sql == kRight);

  auto delta = rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kAddedCorrect);
  CHECK(delta.seq == 1);
  CHECK(delta.provider_calls == 0);
  REQUIRE(kb.correct().size() == 1);
  const auto& e = kb.correct().entries()[0];
  CHECK(e.question == env.item.question);
  CHECK(e.hint == env.item.hint);
  CHECK(e.sql == kRight);
  CHECK(e.thought == "Filter on country.");
  CHECK(e.db_id == "concert_singer");
  CHECK(kb.mistakes().empty());
  CHECK(p.total_calls() == 2);
}

TEST_CASE("execution error triggers exactly one reflection") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kBroken}),
                      rule(PromptKind::kThoughtProcess, {"t"}),
                      rule(PromptKind::kReflectSql, {kRight})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.provider_calls == 3);
  CHECK(out.first_exec.is_failure());
  REQUIRE(out.exec_error.has_value());
  CHECK(out.exec_error->find("no such table: singers") != std::string::npos);
  CHECK(out.reflected_sql == std::optional<std::string>(kRight));
  CHECK(out.final_exec.is_rows());

  // The reflection prompt carries the engine's message.
  const auto ledger = p.ledger();
  REQUIRE(ledger.size() == 3);
  CHECK(ledger[2].kind == PromptKind::kReflectSql);
  PromptContext ctx;
  ctx.schema_text = env.schema;
  ctx.question = env.item.question;
  ctx.hint = env.item.hint;
  ctx.sql = kBroken;
  ctx.exec_error = out.exec_error;
  CHECK(ledger[2].digest == prompt_digest(render(PromptKind::kReflectSql, ctx)));

  auto delta = rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kAddedCorrect);
  CHECK(kb.correct().entries()[0].sql == kRight);
}

TEST_CASE("failed reflection is not retried") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kBroken}),
                      rule(PromptKind::kThoughtProcess, {"t"}),
                      rule(PromptKind::kReflectSql, {kBroken}),
                      rule(PromptKind::kMistakeTip, {"Tip: the table is singer."})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.provider_calls == 3);
  CHECK(out.final_exec.is_failure());
  auto delta = rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kAddedMistake);
  CHECK(delta.provider_calls == 1);
  REQUIRE(kb.mistakes().size() == 1);
  const auto& m = kb.mistakes().entries()[0];
  CHECK(m.first_sql == kBroken);
  CHECK(m.exec_error == out.exec_error);
  CHECK(m.reflected_sql == std::optional<std::string>(kBroken));
  CHECK(m.gold_sql == env.item.gold_sql);
  CHECK(m.tip == "the table is singer.");
  CHECK(p.total_calls() == 4);
}

TEST_CASE("timeout feedback names the limit") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p(
      {rule(PromptKind::kGenerateSql,
            {"WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
             "SELECT count(*) FROM c"}),
       rule(PromptKind::kThoughtProcess, {"t"}), rule(PromptKind::kReflectSql, {kRight})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.first_exec.is_timeout());
  CHECK(out.exec_error == std::optional<std::string>(
                              "interrupted: query exceeded the 200 ms time limit"));
  CHECK(out.final_exec.is_rows());
}

TEST_CASE("prose without SQL executes as a failure and goes to reflection") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {"I am not sure how to answer."}),
                      rule(PromptKind::kReflectSql, {"Still no idea."}),
                      rule(PromptKind::kMistakeTip, {"Count rows of singer."})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.first_sql.empty());
  CHECK(out.thought.empty());
  CHECK(out.first_exec.is_failure());
  CHECK(out.first_exec.error_message() == kNoSqlExtracted);
  CHECK(out.exec_error == std::optional<std::string>(kNoSqlExtracted));
  CHECK(out.provider_calls == 2);
  CHECK(p.calls(PromptKind::kThoughtProcess) == 0);

  auto delta = rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kAddedMistake);
  CHECK(kb.mistakes().entries()[0].first_sql.empty());
  CHECK(kb.mistakes().entries()[0].reflected_sql == std::optional<std::string>(""));
}

TEST_CASE("wrong but executable answer goes to the mistake notebook without reflection") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kWrong}),
                      rule(PromptKind::kThoughtProcess, {"t"}),
                      rule(PromptKind::kMistakeTip, {"filter by country"})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.provider_calls == 2);
  CHECK_FALSE(out.exec_error.has_value());
  auto delta = rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kAddedMistake);
  const auto& m = kb.mistakes().entries()[0];
  CHECK_FALSE(m.exec_error.has_value());
  CHECK_FALSE(m.reflected_sql.has_value());
  CHECK(m.tip == "filter by country");
}

TEST_CASE("accumulation off leaves the knowledge base untouched") {
  Env env;
  env.cfg.continuous_accumulation = false;
  KnowledgeBase kb;
  kb.add_correct({"q", "", "SELECT 1", "", Origin::kSeed, "shop"});
  const KnowledgeBase before = kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kWrong}),
                      rule(PromptKind::kThoughtProcess, {"t"})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  auto delta = rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kNoUpdate);
  CHECK(delta.note == "accumulation off");
  CHECK(p.calls(PromptKind::kMistakeTip) == 0);
  CHECK(kb == before);

  TempDir a, b;
  persist(before, a.path());
  persist(kb, b.path());
  CHECK(lpesql::testing::tree_bytes(a.path()) == lpesql::testing::tree_bytes(b.path()));
}

TEST_CASE("low-information mode skips thought and tip") {
  Env env;
  env.cfg.info_mode = InfoMode::kLow;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kRight, kWrong})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.provider_calls == 1);
  (void)rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(kb.correct().entries()[0].thought.empty());

  auto out2 = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  auto delta = rethink_update(out2, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kAddedMistake);
  CHECK(delta.provider_calls == 0);
  CHECK(kb.mistakes().entries()[0].tip.empty());
  CHECK(p.total_calls() == 2);
}

TEST_CASE("invalid gold makes no update") {
  Env env;
  env.item.gold_sql = "SELECT * FROM no_such_table";
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kRight}),
                      rule(PromptKind::kThoughtProcess, {"t"})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  auto delta = rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kNoUpdate);
  CHECK(delta.note.rfind("invalid gold: ", 0) == 0);
  CHECK(kb.total() == 0);
}

TEST_CASE("accumulated entries feed later prompts") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kRight, kRight}),
                      rule(PromptKind::kThoughtProcess, {"because", "because"})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  CHECK(out.demonstrations.empty());
  (void)rethink_update(out, env.item, kb, p, env.schema, env.cfg);
  auto again = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  REQUIRE(again.demonstrations.correct_picks.size() == 1);
  CHECK(again.demonstrations.correct_picks[0].sql == kRight);
  CHECK(again.prompts[0].digest != out.prompts[0].digest);
}

TEST_CASE("same inputs give the same outcome") {
  Env env;
  auto run = [&] {
    KnowledgeBase kb;
    kb.add_mistake({"Count French singers", "", kWrong, std::nullopt, std::nullopt, kRight,
                    "filter", Origin::kSeed, "concert_singer"});
    ScriptedProvider p({rule(PromptKind::kGenerateSql, {kBroken}),
                        rule(PromptKind::kThoughtProcess, {"t"}),
                        rule(PromptKind::kReflectSql, {kWrong}),
                        rule(PromptKind::kMistakeTip, {"tip"})});
    auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
    (void)rethink_update(out, env.item, kb, p, env.schema, env.cfg);
    TempDir d;
    persist(kb, d.path());
    std::string digests;
    for (const auto& e : p.ledger()) digests += e.digest;
    return lpesql::testing::tree_bytes(d.path()) + digests;
  };
  CHECK(run() == run());
}

TEST_CASE("reviewer verdict replaces gold execution") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kWrong, kWrong}),
                      rule(PromptKind::kThoughtProcess, {"t", "t"}),
                      rule(PromptKind::kMistakeTip, {"tip"})});
  auto out = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  auto d1 = rethink_update_with_verdict(out, env.item, kb, p, env.schema, env.cfg, true);
  CHECK(d1.kind == NotebookDelta::Kind::kAddedCorrect);
  CHECK(kb.correct().entries()[0].sql == kWrong);

  auto out2 = answer(env.item, kb, env.plan, p, env.schema, env.cfg);
  auto d2 = rethink_update_with_verdict(out2, env.item, kb, p, env.schema, env.cfg, false);
  CHECK(d2.kind == NotebookDelta::Kind::kAddedMistake);

  TaskItem no_ref = env.item;
  no_ref.gold_sql.clear();
  auto d3 = rethink_update_with_verdict(out2, no_ref, kb, p, env.schema, env.cfg, false);
  CHECK(d3.kind == NotebookDelta::Kind::kNoUpdate);
}

TEST_CASE("provider failure propagates from answer") {
  Env env;
  KnowledgeBase kb;
  ScriptedProvider p({});
  CHECK_THROWS_AS(answer(env.item, kb, env.plan, p, env.schema, env.cfg), ProviderError);
  auto aborted = aborted_outcome(0.5, "exhausted");
  CHECK(aborted.final_exec.is_failure());
  auto delta = rethink_update(aborted, env.item, kb, p, env.schema, env.cfg);
  CHECK(delta.kind == NotebookDelta::Kind::kNoUpdate);
}

TEST_CASE("replaying a delta reproduces the entry") {
  Env env;
  KnowledgeBase live;
  ScriptedProvider p({rule(PromptKind::kGenerateSql, {kRight}),
                      rule(PromptKind::kThoughtProcess, {"why"})});
  auto out = answer(env.item, live, env.plan, p, env.schema, env.cfg);
  auto delta = rethink_update(out, env.item, live, p, env.schema, env.cfg);
  KnowledgeBase replayed;
  replay_delta(delta, replayed);
  CHECK(replayed == live);
  CHECK_THROWS_AS(replay_delta(delta, replayed), StoreError);
}
