#include "support.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <sqlite3.h>

namespace lpesql::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "lpesql-test-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path fixture_dir() { return LPESQL_FIXTURE_DIR; }

void make_db(const fs::path& db_file, const std::string& script) {
  fs::create_directories(db_file.parent_path());
  fs::remove(db_file);
  sqlite3* db = nullptr;
  if (sqlite3_open(db_file.c_str(), &db) != SQLITE_OK) {
    throw std::runtime_error("cannot create " + db_file.string());
  }
  char* err = nullptr;
  int rc = sqlite3_exec(db, script.c_str(), nullptr, nullptr, &err);
  std::string msg = err ? err : "";
  sqlite3_free(err);
  sqlite3_close(db);
  if (rc != SQLITE_OK) throw std::runtime_error("fixture script failed: " + msg);
}

void build_fixture_databases(const fs::path& db_root) {
  for (const char* name : {"concert_singer", "school", "shop"}) {
    make_db(database_path(db_root, name),
            read_file(fixture_dir() / "db" / (std::string(name) + ".sql")));
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

std::string tree_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) {
    out += fs::relative(f, dir).string();
    out += '\0';
    out += read_file(f);
    out += '\0';
  }
  return out;
}

TaskItem make_item(std::string id, std::string db_id, std::string question,
                   std::string gold_sql, Difficulty difficulty, std::string hint) {
  TaskItem t;
  t.question_id = std::move(id);
  t.db_id = std::move(db_id);
  t.question = std::move(question);
  t.gold_sql = std::move(gold_sql);
  t.difficulty = difficulty;
  t.hint = std::move(hint);
  return t;
}

const std::vector<BranchVerdicts>& e2e_expected() {
  // rate 1 | rate 0.5 | rate 0 | voted
  static const std::vector<BranchVerdicts> v = {
      {"q01", true, true, true, true},
      {"q02", true, true, true, true},
      {"q03", true, false, true, true},     // 2-vs-1 vote
      {"q04", true, true, true, true},      // 0.5 reflects after an error
      {"q05", false, false, false, false},  // no SQL anywhere
      {"q06", false, false, false, false},  // wrong rows, no error
      {"q07", true, true, true, true},
      {"q08", true, true, true, true},      // total() real vs sum() integer
      {"q09", false, true, false, true},    // three singletons, 0.5 wins
      {"q10", true, false, false, false},   // wrong pair outvotes
      {"q11", true, true, true, true},      // duplicates collapse
      {"q12", false, false, false, false},  // rate 1 times out, reflects
  };
  return v;
}

}  // namespace lpesql::testing

namespace lpesql::testing {

PromptContext golden_context() {
  KnowledgeBase kb;
  kb.add_correct({"How many singers are there?", "", "SELECT count(*) FROM singer",
                  "Count every row of the singer table.", Origin::kSeed, "concert_singer"});
  kb.add_correct({"List the names of singers from France.",
                  "France refers to country = 'France'",
                  "SELECT name FROM singer WHERE country = 'France'",
                  "Filter singer by country and project the name column.",
                  Origin::kSeed, "concert_singer"});
  kb.add_mistake({"What is the average age of singers from France?",
                  "France refers to country = 'France'", "SELECT avg(age) FROM singer",
                  std::nullopt, std::nullopt,
                  "SELECT avg(age) FROM singer WHERE country = 'France'",
                  "Apply the filter named in the hint before aggregating.",
                  Origin::kSeed, "concert_singer"});
  kb.add_mistake({"Which concerts were held in 2014?", "",
                  "SELECT name FROM concert WHERE year = 2014",
                  std::string("no such column: name"),
                  std::string("SELECT concert_name FROM concert WHERE year = '2014'"),
                  "SELECT concert_name FROM concert WHERE year = 2014",
                  "Check column names against the schema.", Origin::kSeed,
                  "concert_singer"});

  PromptContext ctx;
  ctx.schema_text =
      "CREATE TABLE singer (\n  singer_id INTEGER PRIMARY KEY,\n  name TEXT NOT "
      "NULL,\n  country TEXT,\n  age INTEGER\n)";
  ctx.question = "How many singers from France are older than 40?";
  ctx.hint = "older than 40 refers to age > 40";
  auto q = embed(ctx.question, kb.encoder());
  ctx.demonstrations = select_demonstrations(kb, q, {4, 0.5});
  ctx.sql = "SELECT count(*) FROM singer WHERE country = 'France' AND age > 40";
  ctx.exec_error = "no such column: agee";
  ctx.reflected_sql = "SELECT count(*) FROM singer WHERE age > 40";
  ctx.gold_sql = "SELECT count(*) FROM singer WHERE country = 'France' AND age > 40";
  return ctx;
}

std::filesystem::path golden_path(PromptKind kind) {
  return fixture_dir() / "golden" / (std::string(to_string(kind)) + ".txt");
}

}  // namespace lpesql::testing
