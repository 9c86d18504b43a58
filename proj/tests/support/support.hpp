#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lpesql/harness.hpp"
#include "lpesql/prompts.hpp"

namespace lpesql::testing {

/// Directory removed (recursively) on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path fixture_dir();

/// Creates a database at `db_file` by running `script`.
void make_db(const std::filesystem::path& db_file, const std::string& script);

/// Builds concert_singer, school and shop under `db_root` in BIRD layout.
void build_fixture_databases(const std::filesystem::path& db_root);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

/// Concatenated bytes of every file under `dir`, keyed by relative path.
std::string tree_bytes(const std::filesystem::path& dir);

/// An item whose scripted responses are given per rate branch.
TaskItem make_item(std::string id, std::string db_id, std::string question,
                   std::string gold_sql,
                   Difficulty difficulty = Difficulty::kSimple,
                   std::string hint = "");

/// The e2e fixture's expected per-branch verdicts, hand-computed by running
/// every scripted SQL against the fixture databases. Index = item order,
/// columns = rates 1, 0.5, 0.
struct BranchVerdicts {
  std::string question_id;
  bool rate1;
  bool rate05;
  bool rate0;
  bool voted;
};
const std::vector<BranchVerdicts>& e2e_expected();

}  // namespace lpesql::testing

namespace lpesql::testing {

/// Fixed context used for the prompt snapshot goldens: two correct and two
/// mistake demonstrations over the concert_singer fixture.
PromptContext golden_context();

/// tests/fixtures/golden/<Kind>.txt
std::filesystem::path golden_path(PromptKind kind);

}  // namespace lpesql::testing
