#include "lpesql/harness.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "lpesql/error.hpp"
#include "lpesql/text_util.hpp"

namespace lpesql {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- configuration ---------------------------------------------------------

InitStrategy InitStrategy::parse(const std::string& spec) {
  InitStrategy s;
  if (spec == "empty") return s;
  if (spec.starts_with("seed:")) {
    s.kind = Kind::kSeed;
    try {
      s.seed_n = std::stoul(spec.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("bad init spec: " + spec);
    }
    return s;
  }
  if (spec.starts_with("preloaded:") && spec.size() > 10) {
    s.kind = Kind::kPreloaded;
    s.preloaded_dir = spec.substr(10);
    return s;
  }
  throw ConfigError("init must be empty, seed:<n> or preloaded:<dir>, got " +
                    spec);
}

void RunConfig::validate() const {
  if (rates.empty()) throw ConfigError("at least one correct rate is required");
  for (double r : rates) DemonstrationPlan{k, r}.validate();
  params.validate();
  if (timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
  encoder.validate();
  if (fixed_examples && fixed_examples->dimension() != encoder.dimension) {
    throw DimensionMismatch(encoder.dimension, fixed_examples->dimension());
  }
}

PipelineConfig RunConfig::pipeline(Origin origin) const {
  PipelineConfig p;
  p.db_root = db_root;
  p.timeout_ms = timeout_ms;
  p.info_mode = info_mode;
  p.continuous_accumulation = continuous_accumulation;
  p.params = params;
  p.origin = origin;
  p.fixed_examples = fixed_examples.get();
  return p;
}

BranchSet RunConfig::fresh_branches() const {
  return BranchSet::with_rates(rates, k, encoder, shared_kb);
}

fs::path branch_dir(const fs::path& root, double rate, bool shared) {
  if (shared) return root / "shared";
  return root / ("cr_" + format_fixed2(rate));
}

void persist_branches(const BranchSet& branches, const fs::path& root) {
  if (branches.shared_kb) {
    persist(*branches.branches.front().kb, branch_dir(root, 0, true));
    return;
  }
  for (const auto& b : branches.branches) {
    persist(*b.kb, branch_dir(root, b.plan.correct_rate, false));
  }
}

BranchSet load_branches(const fs::path& root, const RunConfig& cfg) {
  BranchSet set;
  set.shared_kb = cfg.shared_kb;
  std::shared_ptr<KnowledgeBase> common;
  if (cfg.shared_kb) {
    common = std::make_shared<KnowledgeBase>(
        load(branch_dir(root, 0, true), cfg.encoder));
  }
  for (double r : cfg.rates) {
    auto kb = cfg.shared_kb ? common
                            : std::make_shared<KnowledgeBase>(load(
                                  branch_dir(root, r, false), cfg.encoder));
    set.branches.push_back({DemonstrationPlan{cfg.k, r}, std::move(kb)});
  }
  set.validate();
  return set;
}

const std::string& SchemaCache::get(const std::string& db_id) {
  auto it = cache_.find(db_id);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(db_id, schema_text(database_path(db_root_, db_id)))
      .first->second;
}

// ---- seeding ---------------------------------------------------------------

SeedSummary seed(const std::vector<TaskItem>& train_items, std::size_t n,
                 BranchSet& branches, CompletionProvider& provider,
                 const RunConfig& cfg) {
  SeedSummary summary;
  auto pcfg = cfg.pipeline(Origin::kSeed);
  pcfg.continuous_accumulation = true;
  SchemaCache schemas(cfg.db_root);
  for (std::size_t idx :
       sample_indices(train_items.size(), n, cfg.seed_sample_seed)) {
    const auto& item = train_items[idx];
    summary.sampled_ids.push_back(item.question_id);
    try {
      auto fa = run(item, branches, provider, schemas.get(item.db_id), pcfg);
      for (const auto& d : fa.deltas) {
        if (d.kind != NotebookDelta::Kind::kNoUpdate) {
          ++summary.entries_added;
        } else if (d.note.starts_with("invalid gold")) {
          ++summary.invalid_gold;
        } else if (d.note.starts_with("aborted") ||
                   d.note.starts_with("tip aborted")) {
          ++summary.aborted;
        }
      }
    } catch (const std::exception& e) {
      ++summary.aborted;
      std::cerr << "seed: item " << item.question_id << " failed: " << e.what()
                << '\n';
    }
  }
  return summary;
}

// ---- reports ---------------------------------------------------------------

double BucketStats::ex() const {
  return count == 0 ? 0.0
                    : 100.0 * static_cast<double>(correct) /
                          static_cast<double>(count);
}

void EvalReport::add(const ItemVerdict& v) {
  auto& b = buckets[static_cast<std::size_t>(v.difficulty)];
  ++b.count;
  ++total.count;
  if (v.correct) {
    ++b.correct;
    ++total.correct;
  }
  verdicts.push_back(v);
}

std::string render_report(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-12s %7s %8s %7s\n", "difficulty",
                "count", "correct", "EX");
  out << line;
  auto row = [&](std::string_view name, const BucketStats& b) {
    std::snprintf(line, sizeof line, "%-12.*s %7zu %8zu %7s\n",
                  static_cast<int>(name.size()), name.data(), b.count,
                  b.correct, format_fixed2(b.ex()).c_str());
    out << line;
  };
  for (auto d : kAllDifficulties) row(to_string(d), report.bucket(d));
  row("total", report.total);
  out << "provider calls: " << report.provider_calls << '\n';
  out << "tokens: " << report.tokens << '\n';
  return out.str();
}

std::string report_json(const EvalReport& report) {
  ojson j;
  auto bucket = [](const BucketStats& b) {
    ojson o;
    o["count"] = b.count;
    o["correct"] = b.correct;
    o["ex"] = format_fixed2(b.ex());
    return o;
  };
  for (auto d : kAllDifficulties) j[std::string(to_string(d))] = bucket(report.bucket(d));
  j["total"] = bucket(report.total);
  j["provider_calls"] = report.provider_calls;
  j["tokens"] = report.tokens;
  ojson verdicts = ojson::array();
  for (const auto& v : report.verdicts) {
    verdicts.push_back({{"question_id", v.question_id},
                        {"difficulty", std::string(to_string(v.difficulty))},
                        {"correct", v.correct}});
  }
  j["verdicts"] = std::move(verdicts);
  return j.dump(2) + "\n";
}

// ---- run log ---------------------------------------------------------------

namespace {

ojson exec_json(const ExecOutcome& e) {
  ojson j;
  if (e.is_rows()) {
    j["status"] = "rows";
    j["rows"] = e.row_set().rows.size();
    j["row_count"] = e.row_set().row_count;
  } else if (e.is_timeout()) {
    j["status"] = "timeout";
  } else {
    j["status"] = "failure";
    j["message"] = e.error_message();
  }
  return j;
}

ojson opt_json(const std::optional<std::string>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

std::optional<std::string> opt_from(const ojson& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

ojson prompts_json(const std::vector<PromptRecord>& prompts) {
  ojson arr = ojson::array();
  for (const auto& p : prompts) {
    arr.push_back({{"kind", std::string(to_string(p.kind))}, {"digest", p.digest}});
  }
  return arr;
}

ojson delta_json(const NotebookDelta& d) {
  ojson j;
  j["kind"] = std::string(to_string(d.kind));
  j["seq"] = d.seq;
  j["note"] = d.note;
  if (d.correct) {
    const auto& r = *d.correct;
    j["record"] = {{"question", r.question}, {"hint", r.hint},
                   {"sql", r.sql},           {"thought", r.thought},
                   {"origin", to_string(r.origin)}, {"db_id", r.db_id}};
  } else if (d.mistake) {
    const auto& r = *d.mistake;
    j["record"] = {{"question", r.question},
                   {"hint", r.hint},
                   {"first_sql", r.first_sql},
                   {"exec_error", opt_json(r.exec_error)},
                   {"reflected_sql", opt_json(r.reflected_sql)},
                   {"gold_sql", r.gold_sql},
                   {"tip", r.tip},
                   {"origin", to_string(r.origin)},
                   {"db_id", r.db_id}};
  }
  j["provider_calls"] = d.provider_calls;
  j["tokens"] = d.tokens;
  j["prompts"] = prompts_json(d.prompts);
  return j;
}

NotebookDelta delta_from_json(const ojson& j) {
  NotebookDelta d;
  const auto kind = j.at("kind").get<std::string>();
  d.seq = j.at("seq").get<std::int64_t>();
  d.note = j.at("note").get<std::string>();
  if (kind == "added_correct") {
    const auto& r = j.at("record");
    d.kind = NotebookDelta::Kind::kAddedCorrect;
    d.correct = CorrectRecord{r.at("question"), r.at("hint"), r.at("sql"),
                              r.at("thought"),
                              origin_from_string(r.at("origin").get<std::string>()),
                              r.at("db_id")};
  } else if (kind == "added_mistake") {
    const auto& r = j.at("record");
    d.kind = NotebookDelta::Kind::kAddedMistake;
    d.mistake = MistakeRecord{r.at("question"),
                              r.at("hint"),
                              r.at("first_sql"),
                              opt_from(r, "exec_error"),
                              opt_from(r, "reflected_sql"),
                              r.at("gold_sql"),
                              r.at("tip"),
                              origin_from_string(r.at("origin").get<std::string>()),
                              r.at("db_id")};
  }
  return d;
}

ojson branch_record(const TaskItem& item, const BranchOutcome& o,
                    const NotebookDelta& d) {
  ojson j;
  j["record"] = "branch";
  j["item"] = item.question_id;
  j["rate"] = o.correct_rate;
  ojson demos;
  ojson cs = ojson::array();
  for (const auto& e : o.demonstrations.correct_picks) cs.push_back(e.seq);
  ojson ms = ojson::array();
  for (const auto& e : o.demonstrations.mistake_picks) ms.push_back(e.seq);
  demos["correct"] = std::move(cs);
  demos["mistake"] = std::move(ms);
  j["demonstrations"] = std::move(demos);
  j["prompts"] = prompts_json(o.prompts);
  j["first_sql"] = o.first_sql;
  j["first_exec"] = exec_json(o.first_exec);
  j["thought"] = o.thought;
  j["exec_error"] = opt_json(o.exec_error);
  j["reflected_sql"] = opt_json(o.reflected_sql);
  j["final_sql"] = o.final_sql;
  j["final_exec"] = exec_json(o.final_exec);
  j["provider_calls"] = o.provider_calls;
  j["tokens"] = o.tokens;
  j["aborted"] = opt_json(o.aborted);
  j["delta"] = delta_json(d);
  return j;
}

ojson final_record(const TaskItem& item, const FinalAnswer* fa,
                   const ExecOutcome* gold, bool verdict,
                   const std::string& error) {
  ojson j;
  j["record"] = "final";
  j["item"] = item.question_id;
  j["db_id"] = item.db_id;
  j["difficulty"] = std::string(to_string(item.difficulty));
  if (fa) {
    j["chosen_sql"] = fa->chosen_sql;
    j["chosen_rate"] = fa->chosen_rate;
    j["vote_group_sizes"] = fa->vote_group_sizes;
  } else {
    j["chosen_sql"] = nullptr;
    j["chosen_rate"] = nullptr;
    j["vote_group_sizes"] = ojson::array();
  }
  j["gold_exec"] = gold ? exec_json(*gold) : ojson(nullptr);
  j["invalid_gold"] = gold != nullptr && gold->is_error();
  j["verdict"] = verdict;
  j["error"] = error.empty() ? ojson(nullptr) : ojson(error);
  return j;
}

struct LoggedItem {
  std::string question_id;
  std::vector<ojson> branches;
  ojson final;
};

struct LogScan {
  std::vector<LoggedItem> completed;
  std::uintmax_t complete_bytes = 0;
};

// Reads completed items; stops at the first unparsable (truncated) line.
LogScan scan_log(const fs::path& path) {
  LogScan scan;
  std::ifstream in(path, std::ios::binary);
  if (!in) return scan;
  std::string line;
  std::uintmax_t offset = 0;
  LoggedItem pending;
  while (std::getline(in, line)) {
    const bool had_newline = !in.eof();
    offset += line.size() + (had_newline ? 1 : 0);
    if (!had_newline) break;  // partial write
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::exception&) {
      break;
    }
    const auto kind = j.value("record", std::string{});
    if (kind == "branch") {
      pending.branches.push_back(std::move(j));
    } else if (kind == "final") {
      pending.question_id = j.at("item").get<std::string>();
      pending.final = std::move(j);
      scan.completed.push_back(std::move(pending));
      pending = {};
      scan.complete_bytes = offset;
    } else {
      break;
    }
  }
  return scan;
}

void add_counters(EvalReport& report, const ojson& branch) {
  report.provider_calls += branch.at("provider_calls").get<std::int64_t>() +
                           branch.at("delta").at("provider_calls").get<std::int64_t>();
  report.tokens += branch.at("tokens").get<std::int64_t>() +
                   branch.at("delta").at("tokens").get<std::int64_t>();
}

Branch& branch_for_rate(BranchSet& set, double rate) {
  for (auto& b : set.branches) {
    if (b.plan.correct_rate == rate) return b;
  }
  throw ConfigError("run log mentions correct rate " + format_fixed2(rate) +
                    " which is not configured");
}

}  // namespace

EvalReport report_from_log(const fs::path& run_log) {
  if (!fs::exists(run_log)) throw ConfigError("no run log at " + run_log.string());
  EvalReport report;
  for (const auto& item : scan_log(run_log).completed) {
    for (const auto& b : item.branches) add_counters(report, b);
    report.add({item.question_id,
                difficulty_from_string(item.final.at("difficulty").get<std::string>()),
                item.final.at("verdict").get<bool>()});
  }
  return report;
}

EvalReport evaluate(const std::vector<TaskItem>& items, BranchSet& branches,
                    CompletionProvider& provider, const RunConfig& cfg,
                    const fs::path& run_log) {
  return evaluate(items, branches, provider, cfg, run_log, EvalLimits{});
}

EvalReport evaluate(const std::vector<TaskItem>& items, BranchSet& branches,
                    CompletionProvider& provider, const RunConfig& cfg,
                    const fs::path& run_log, const EvalLimits& limits) {
  cfg.validate();
  branches.validate();

  // Resume: replay what the log already holds, drop any partial tail.
  std::size_t start = 0;
  if (fs::exists(run_log)) {
    auto scan = scan_log(run_log);
    if (scan.completed.size() > items.size()) {
      throw ConfigError("run log holds more items than the dataset");
    }
    for (const auto& logged : scan.completed) {
      if (logged.question_id != items[start].question_id) {
        throw ConfigError("run log item " + logged.question_id +
                          " does not match dataset item " +
                          items[start].question_id);
      }
      for (const auto& b : logged.branches) {
        auto& branch = branch_for_rate(branches, b.at("rate").get<double>());
        replay_delta(delta_from_json(b.at("delta")), *branch.kb);
      }
      ++start;
    }
    fs::resize_file(run_log, scan.complete_bytes);
  } else if (run_log.has_parent_path()) {
    fs::create_directories(run_log.parent_path());
  }

  std::ofstream log(run_log, std::ios::binary | std::ios::app);
  if (!log) throw ConfigError("cannot write run log " + run_log.string());

  const auto pcfg = cfg.pipeline(Origin::kAccumulated);
  SchemaCache schemas(cfg.db_root);
  std::size_t processed = 0;
  for (std::size_t i = start; i < items.size(); ++i) {
    if (limits.stop_after && processed >= *limits.stop_after) break;
    const auto& item = items[i];
    std::string lines;
    try {
      const auto& schema = schemas.get(item.db_id);
      const auto gold = execute(database_path(cfg.db_root, item.db_id),
                                item.gold_sql, cfg.timeout_ms);
      if (gold.is_error()) {
        std::cerr << "eval: item " << item.question_id
                  << " has invalid gold SQL: " << gold.error_message() << '\n';
      }
      auto fa = run(item, branches, provider, schema, pcfg, gold);
      const bool verdict = outcomes_equal(
          fa.branch_outcomes[fa.chosen_index].final_exec, gold);
      for (std::size_t b = 0; b < fa.branch_outcomes.size(); ++b) {
        lines += branch_record(item, fa.branch_outcomes[b], fa.deltas[b]).dump();
        lines += '\n';
      }
      lines += final_record(item, &fa, &gold, verdict, "").dump();
      lines += '\n';
    } catch (const std::exception& e) {
      std::cerr << "eval: item " << item.question_id << " aborted: " << e.what()
                << '\n';
      lines = final_record(item, nullptr, nullptr, false, e.what()).dump();
      lines += '\n';
    }
    log << lines;
    log.flush();
    ++processed;
  }
  log.close();
  return report_from_log(run_log);
}

}  // namespace lpesql
