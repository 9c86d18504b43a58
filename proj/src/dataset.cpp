#include "lpesql/dataset.hpp"

#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "lpesql/error.hpp"
#include "lpesql/text_util.hpp"

namespace lpesql {

namespace fs = std::filesystem;

namespace {

std::string id_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw DatasetError("question_id must be a string or integer");
}

}  // namespace

DatasetFile load_items(const fs::path& path, const fs::path& db_root) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read dataset " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw DatasetError(path.string() + ": expected a JSON array of records");
  }

  DatasetFile out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& r = doc[i];
    const std::string where = path.string() + ": record " + std::to_string(i);
    TaskItem item;
    try {
      item.question_id =
          r.contains("question_id") ? id_string(r["question_id"]) : std::to_string(i);
      item.db_id = r.at("db_id").get<std::string>();
      item.question = r.at("question").get<std::string>();
      item.hint = r.value("evidence", std::string{});
      item.gold_sql = r.at("SQL").get<std::string>();
      if (r.contains("difficulty")) {
        item.difficulty = difficulty_from_string(r["difficulty"].get<std::string>());
      } else {
        out.warnings.push_back(where + ": no difficulty, using simple");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(where + ": " + e.what());
    } catch (const DatasetError& e) {
      throw DatasetError(where + ": " + e.what());
    }
    if (trim(item.gold_sql).empty()) throw DatasetError(where + ": empty SQL");
    if (!seen.insert(item.question_id).second) {
      throw DatasetError(where + ": duplicate question_id " + item.question_id);
    }
    if (!db_root.empty() && !fs::exists(database_path(db_root, item.db_id))) {
      throw DatasetError(where + ": database " + item.db_id + " not found under " +
                         db_root.string());
    }
    out.items.push_back(std::move(item));
  }
  return out;
}

std::vector<TaskItem> filter_items(const std::vector<TaskItem>& items,
                                   const fs::path& id_list) {
  std::ifstream in(id_list);
  if (!in) throw DatasetError("cannot read id list " + id_list.string());
  std::set<std::string> wanted;
  std::string line;
  while (std::getline(in, line)) {
    auto id = trim(line);
    if (!id.empty()) wanted.emplace(id);
  }
  std::vector<TaskItem> out;
  for (const auto& item : items) {
    if (wanted.erase(item.question_id) > 0) out.push_back(item);
  }
  if (!wanted.empty()) {
    throw DatasetError("id list names unknown question_id " + *wanted.begin());
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n,
                                        std::uint64_t seed) {
  if (n > population) {
    throw ConfigError("cannot sample " + std::to_string(n) + " of " +
                      std::to_string(population) + " items");
  }
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; the first n slots are the sample.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

}  // namespace lpesql
