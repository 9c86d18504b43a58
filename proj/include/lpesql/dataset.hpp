#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lpesql/pipeline.hpp"

namespace lpesql {

/// Items of a BIRD-style question file, in file order.
struct DatasetFile {
  std::vector<TaskItem> items;
  /// Non-fatal issues, e.g. records without a difficulty label.
  std::vector<std::string> warnings;
};

/// Reads a JSON array of BIRD records: question, evidence, SQL, db_id,
/// difficulty, question_id. A missing difficulty defaults to simple (with a
/// warning); a missing question_id defaults to the record index. When
/// `db_root` is non-empty every db_id must resolve to a database file.
DatasetFile load_items(const std::filesystem::path& path,
                       const std::filesystem::path& db_root = {});

/// Keeps the items whose question_id is listed (one id per line), in
/// dataset order. Unknown ids are an error.
std::vector<TaskItem> filter_items(const std::vector<TaskItem>& items,
                                   const std::filesystem::path& id_list);

/// Deterministic sample of `n` indices (no repeats) driven by `seed`.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n,
                                        std::uint64_t seed);

}  // namespace lpesql
