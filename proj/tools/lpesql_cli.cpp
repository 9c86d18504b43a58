// lpesql: seed notebooks, run evaluations, answer ad-hoc questions and
// inspect stores. Run `lpesql --help` for the option list.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpesql/error.hpp"
#include "lpesql/harness.hpp"
#include "lpesql/text_util.hpp"

namespace fs = std::filesystem;
using namespace lpesql;

namespace {

struct GlobalOptions {
  std::string db_root;
  std::string provider = "remote";
  std::string endpoint;
  std::string model;
  std::string api_key_env = "LPESQL_API_KEY";
  double temperature = 0.0;
  int max_tokens = 1024;
  int timeout_ms = kDefaultTimeoutMs;
  std::size_t k = 4;
  std::vector<double> rates{1.0, 0.5, 0.0};
  std::string info_mode = "high";
  bool no_accumulation = false;
  bool shared_kb = false;
  std::string encoder = "hash";
  std::size_t dimension = 384;
  std::string embed_endpoint;
  std::string embed_model;
  std::string fixed_examples;
  std::uint64_t sample_seed = 42;
};

RunConfig run_config(const GlobalOptions& g) {
  RunConfig cfg;
  cfg.k = g.k;
  cfg.rates = g.rates;
  cfg.params.temperature = g.temperature;
  cfg.params.max_output_tokens = g.max_tokens;
  cfg.timeout_ms = g.timeout_ms;
  cfg.info_mode = info_mode_from_string(g.info_mode);
  cfg.continuous_accumulation = !g.no_accumulation;
  cfg.seed_sample_seed = g.sample_seed;
  cfg.db_root = g.db_root;
  cfg.shared_kb = g.shared_kb;
  cfg.encoder.mode = encoder_mode_from_string(g.encoder);
  cfg.encoder.dimension = g.dimension;
  cfg.encoder.endpoint = g.embed_endpoint;
  cfg.encoder.model = g.embed_model;
  if (!g.fixed_examples.empty()) {
    cfg.fixed_examples = std::make_shared<const Notebook<CorrectEntry>>(
        load_fixed_examples(g.fixed_examples, cfg.encoder));
  }
  cfg.validate();
  return cfg;
}

std::unique_ptr<CompletionProvider> make_provider(const GlobalOptions& g) {
  if (g.provider.starts_with("scripted:")) {
    // Not movable (it owns a mutex); new-expression elides the copy.
    return std::unique_ptr<CompletionProvider>(
        new ScriptedProvider(ScriptedProvider::from_file(g.provider.substr(9))));
  }
  if (g.provider != "remote") {
    throw ConfigError("provider must be remote or scripted:<file>, got " +
                      g.provider);
  }
  RemoteProviderConfig rc;
  rc.endpoint = g.endpoint;
  rc.model = g.model;
  rc.api_key_env = g.api_key_env;
  return std::make_unique<RemoteChatProvider>(rc);
}

void require_db_root(const GlobalOptions& g) {
  if (g.db_root.empty()) throw ConfigError("--db-root is required");
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

// A store directory, or every store directly below a branch root.
std::vector<fs::path> find_stores(const fs::path& dir) {
  if (store_exists(dir)) return {dir};
  std::vector<fs::path> out;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory() && store_exists(e.path())) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw StoreError("no notebook store under " + dir.string());
  return out;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- seed ------------------------------------------------------------------

struct SeedOptions {
  std::string train;
  std::size_t n = 1000;
  std::string kb_dir;
};

int cmd_seed(const GlobalOptions& g, const SeedOptions& o) {
  require_db_root(g);
  auto cfg = run_config(g);
  auto train = load_items(o.train, cfg.db_root);
  for (const auto& w : train.warnings) std::cerr << "warning: " << w << '\n';
  auto branches = store_exists(branch_dir(o.kb_dir, cfg.rates.front(), cfg.shared_kb))
                      ? load_branches(o.kb_dir, cfg)
                      : cfg.fresh_branches();
  auto provider = make_provider(g);
  auto summary = seed(train.items, std::min(o.n, train.items.size()), branches,
                      *provider, cfg);
  persist_branches(branches, o.kb_dir);
  std::cout << "sampled " << summary.sampled_ids.size() << " items, added "
            << summary.entries_added << " entries";
  if (summary.invalid_gold) std::cout << ", " << summary.invalid_gold << " invalid gold";
  if (summary.aborted) std::cout << ", " << summary.aborted << " aborted";
  std::cout << "\nstores written to " << o.kb_dir << '\n';
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalOptions {
  std::string dev;
  std::string out;
  std::string item_ids;
  std::string init = "empty";
  std::string train;
};

BranchSet initial_branches(const RunConfig& cfg, const EvalOptions& o,
                           CompletionProvider& provider) {
  const auto init = InitStrategy::parse(o.init);
  switch (init.kind) {
    case InitStrategy::Kind::kEmpty:
      return cfg.fresh_branches();
    case InitStrategy::Kind::kPreloaded:
      return load_branches(init.preloaded_dir, cfg);
    case InitStrategy::Kind::kSeed: {
      if (o.train.empty()) throw ConfigError("init seed:<n> needs --train");
      auto train = load_items(o.train, cfg.db_root);
      auto branches = cfg.fresh_branches();
      auto summary = seed(train.items, init.seed_n, branches, provider, cfg);
      std::cerr << "seeded " << summary.entries_added << " entries from "
                << summary.sampled_ids.size() << " training items\n";
      return branches;
    }
  }
  throw ConfigError("unknown init strategy");
}

int cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
  require_db_root(g);
  auto cfg = run_config(g);
  cfg.init = InitStrategy::parse(o.init);
  auto dev = load_items(o.dev, cfg.db_root);
  for (const auto& w : dev.warnings) std::cerr << "warning: " << w << '\n';
  auto items = o.item_ids.empty() ? dev.items : filter_items(dev.items, o.item_ids);

  const fs::path out = o.out;
  const auto init_dir = out / "kb_init";
  const auto log_path = out / "run_log.jsonl";
  auto provider = make_provider(g);

  // The starting stores are kept next to the log so an interrupted run can
  // be resumed without rebuilding them.
  BranchSet branches;
  if (fs::exists(log_path) && fs::exists(init_dir)) {
    std::cerr << "resuming from " << log_path << '\n';
    branches = load_branches(init_dir, cfg);
  } else {
    fs::remove(log_path);
    branches = initial_branches(cfg, o, *provider);
    persist_branches(branches, init_dir);
  }

  auto report = evaluate(items, branches, *provider, cfg, log_path);
  persist_branches(branches, out / "kb");
  const auto text = render_report(report);
  write_text(out / "report.txt", text);
  write_text(out / "report.json", report_json(report));
  std::cout << text;
  return 0;
}

// ---- ask -------------------------------------------------------------------

struct AskOptions {
  std::string kb_dir;
  std::string db_id;
  std::string question;
  std::string hint;
  std::string gold;
  bool verbose = false;
};

int cmd_ask(const GlobalOptions& g, const AskOptions& o) {
  require_db_root(g);
  auto cfg = run_config(g);
  auto branches = !o.kb_dir.empty() &&
                          store_exists(branch_dir(o.kb_dir, cfg.rates.front(),
                                                  cfg.shared_kb))
                      ? load_branches(o.kb_dir, cfg)
                      : cfg.fresh_branches();
  auto provider = make_provider(g);
  TaskItem item;
  item.question_id = "ask";
  item.db_id = o.db_id;
  item.question = o.question;
  item.hint = o.hint;
  item.gold_sql = o.gold;

  const auto db = database_path(cfg.db_root, o.db_id);
  if (!fs::exists(db)) throw MissingDatabase(db.string());
  const auto schema = schema_text(db);
  const auto pcfg = cfg.pipeline(Origin::kAccumulated);
  const auto fa = o.gold.empty()
                      ? run_without_update(item, branches, *provider, schema, pcfg)
                      : run(item, branches, *provider, schema, pcfg);
  if (o.verbose) {
    for (std::size_t i = 0; i < fa.branch_outcomes.size(); ++i) {
      const auto& b = fa.branch_outcomes[i];
      std::cerr << "cr " << format_fixed2(b.correct_rate) << ": "
                << b.final_exec.summary() << "  " << b.final_sql << '\n';
      if (!o.gold.empty()) {
        std::cerr << "  update: " << to_string(fa.deltas[i].kind) << '\n';
      }
    }
  }
  std::cout << fa.chosen_sql << '\n';
  if (!o.gold.empty() && !o.kb_dir.empty()) persist_branches(branches, o.kb_dir);
  return 0;
}

// ---- kb --------------------------------------------------------------------

int cmd_kb_stats(const std::string& dir) {
  for (const auto& store : find_stores(dir)) {
    const auto kb = load(store);
    std::size_t seeded = 0;
    for (const auto& e : kb.correct().entries()) seeded += e.origin == Origin::kSeed;
    for (const auto& e : kb.mistakes().entries()) seeded += e.origin == Origin::kSeed;
    std::cout << store.string() << ": " << kb.correct().size() << " correct, "
              << kb.mistakes().size() << " mistakes (" << seeded << " seeded), encoder "
              << to_string(kb.encoder().mode) << "/" << kb.encoder().dimension << '\n';
  }
  return 0;
}

int cmd_kb_dump(const std::string& dir, const std::string& which) {
  if (which != "all" && which != "correct" && which != "mistakes") {
    throw ConfigError("--notebook must be all, correct or mistakes");
  }
  auto opt = [](const std::optional<std::string>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  for (const auto& store : find_stores(dir)) {
    const auto kb = load(store);
    const auto name = store.filename().string();
    if (which != "mistakes") {
      for (const auto& e : kb.correct().entries()) {
        nlohmann::ordered_json j = {
            {"store", name},       {"notebook", "correct"}, {"seq", e.seq},
            {"question", e.question}, {"hint", e.hint},     {"sql", e.sql},
            {"thought", e.thought}, {"origin", to_string(e.origin)},
            {"db_id", e.db_id}};
        std::cout << j.dump() << '\n';
      }
    }
    if (which != "correct") {
      for (const auto& e : kb.mistakes().entries()) {
        nlohmann::ordered_json j = {
            {"store", name},
            {"notebook", "mistakes"},
            {"seq", e.seq},
            {"question", e.question},
            {"hint", e.hint},
            {"first_sql", e.first_sql},
            {"exec_error", opt(e.exec_error)},
            {"reflected_sql", opt(e.reflected_sql)},
            {"gold_sql", e.gold_sql},
            {"tip", e.tip},
            {"origin", to_string(e.origin)},
            {"db_id", e.db_id}};
        std::cout << j.dump() << '\n';
      }
    }
  }
  return 0;
}

// Loads every store strictly and checks it re-serializes to the same bytes.
int cmd_kb_verify(const std::string& dir) {
  int bad = 0;
  for (const auto& store : find_stores(dir)) {
    try {
      const auto kb = load(store);
      const auto scratch =
          fs::temp_directory_path() /
          ("lpesql-verify-" + hex64(fnv1a64(fs::absolute(store).string())));
      fs::remove_all(scratch);
      persist(kb, scratch);
      bool canonical = true;
      for (const char* f : {kManifestFile, kCorrectFile, kMistakeFile}) {
        canonical = canonical && file_bytes(store / f) == file_bytes(scratch / f);
      }
      fs::remove_all(scratch);
      if (canonical) {
        std::cout << "ok " << store.string() << " (" << kb.correct().size()
                  << " correct, " << kb.mistakes().size() << " mistakes)\n";
      } else {
        ++bad;
        std::cout << "FAIL " << store.string()
                  << ": loads, but does not re-serialize to the same bytes\n";
      }
    } catch (const Error& e) {
      ++bad;
      std::cout << "FAIL " << store.string() << ": " << e.what() << '\n';
    }
  }
  return bad == 0 ? 0 : 1;
}

// ---- report ----------------------------------------------------------------

int cmd_report(const std::string& log, bool json, const std::string& out) {
  const auto report = report_from_log(log);
  const auto text = json ? report_json(report) : render_report(report);
  if (!out.empty()) write_text(out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-to-SQL with correct/mistake notebooks and cross-consistency voting"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "lpesql.toml", "TOML file with option defaults");

  GlobalOptions g;
  app.add_option("--db-root", g.db_root, "Directory holding <db_id>/<db_id>.sqlite");
  app.add_option("--provider", g.provider, "remote | scripted:<script.json>")
      ->capture_default_str();
  app.add_option("--endpoint", g.endpoint, "Chat-completions URL (remote provider)");
  app.add_option("--model", g.model, "Model identifier (remote provider)");
  app.add_option("--api-key-env", g.api_key_env,
                 "Environment variable holding the provider key")
      ->capture_default_str();
  app.add_option("--temperature", g.temperature)->capture_default_str();
  app.add_option("--max-tokens", g.max_tokens)->capture_default_str();
  app.add_option("--timeout-ms", g.timeout_ms, "SQL execution time limit")
      ->capture_default_str();
  app.add_option("--k", g.k, "Demonstrations per prompt")->capture_default_str();
  app.add_option("--rates", g.rates, "Correct rates, one branch each")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--info-mode", g.info_mode, "high | low")
      ->check(CLI::IsMember({"high", "low"}))
      ->capture_default_str();
  app.add_flag("--no-accumulation", g.no_accumulation,
               "Never add entries during eval or ask");
  app.add_flag("--shared-kb", g.shared_kb, "All branches share one store");
  app.add_option("--encoder", g.encoder, "hash | remote")
      ->check(CLI::IsMember({"hash", "remote"}))
      ->capture_default_str();
  app.add_option("--dimension", g.dimension, "Embedding dimension")
      ->capture_default_str();
  app.add_option("--embed-endpoint", g.embed_endpoint, "Embeddings URL (remote encoder)");
  app.add_option("--embed-model", g.embed_model, "Embedding model (remote encoder)");
  app.add_option("--fixed-examples", g.fixed_examples,
                 "JSONL demonstrations used while a store is empty");
  app.add_option("--sample-seed", g.sample_seed, "Seed for training-item sampling")
      ->capture_default_str();

  SeedOptions so;
  auto* seed_cmd = app.add_subcommand("seed", "Build notebooks from training pairs");
  seed_cmd->add_option("--train", so.train, "BIRD-style training file")->required();
  seed_cmd->add_option("--n", so.n, "Training items to sample")->capture_default_str();
  seed_cmd->add_option("--kb-dir", so.kb_dir, "Where to write the stores")->required();

  EvalOptions eo;
  auto* eval_cmd = app.add_subcommand("eval", "Run a dataset and report EX");
  eval_cmd->add_option("--dev", eo.dev, "BIRD-style question file")->required();
  eval_cmd->add_option("--out", eo.out, "Run directory")->required();
  eval_cmd->add_option("--item-ids", eo.item_ids, "File of question_ids to keep");
  eval_cmd->add_option("--init", eo.init, "empty | seed:<n> | preloaded:<dir>")
      ->capture_default_str();
  eval_cmd->add_option("--train", eo.train, "Training file for --init seed:<n>");

  AskOptions ao;
  auto* ask_cmd = app.add_subcommand("ask", "Answer one question");
  ask_cmd->add_option("--kb-dir", ao.kb_dir, "Stores to read (and update with --gold)");
  ask_cmd->add_option("--db-id", ao.db_id)->required();
  ask_cmd->add_option("--question", ao.question)->required();
  ask_cmd->add_option("--hint", ao.hint, "External knowledge");
  ask_cmd->add_option("--gold", ao.gold, "Reference SQL; files the answer into the stores");
  ask_cmd->add_flag("-v,--verbose", ao.verbose, "Print every branch");

  std::string kb_target;
  std::string kb_notebook = "all";
  auto* kb_cmd = app.add_subcommand("kb", "Inspect notebook stores");
  kb_cmd->require_subcommand(1);
  auto* kb_stats = kb_cmd->add_subcommand("stats", "Entry counts per store");
  kb_stats->add_option("dir", kb_target)->required();
  auto* kb_dump = kb_cmd->add_subcommand("dump", "Entries as JSON lines");
  kb_dump->add_option("dir", kb_target)->required();
  kb_dump->add_option("--notebook", kb_notebook, "all | correct | mistakes")
      ->capture_default_str();
  auto* kb_verify = kb_cmd->add_subcommand("verify", "Strict load and round-trip check");
  kb_verify->add_option("dir", kb_target)->required();

  std::string report_log;
  std::string report_out;
  bool report_as_json = false;
  auto* report_cmd = app.add_subcommand("report", "Re-render a run log");
  report_cmd->add_option("run_log", report_log)->required();
  report_cmd->add_flag("--json", report_as_json);
  report_cmd->add_option("--out", report_out, "Also write the report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*seed_cmd) return cmd_seed(g, so);
    if (*eval_cmd) return cmd_eval(g, eo);
    if (*ask_cmd) return cmd_ask(g, ao);
    if (*kb_stats) return cmd_kb_stats(kb_target);
    if (*kb_dump) return cmd_kb_dump(kb_target, kb_notebook);
    if (*kb_verify) return cmd_kb_verify(kb_target);
    if (*report_cmd) return cmd_report(report_log, report_as_json, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
