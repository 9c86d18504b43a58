#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpesql/embedding.hpp"
#include "lpesql/error.hpp"
#include "lpesql/similarity.hpp"

namespace lpesql {

enum class Origin { kSeed, kAccumulated };

std::string to_string(Origin origin);
Origin origin_from_string(std::string_view s);

/// A solved task: the SQL that matched gold plus the reasoning behind it.
struct CorrectEntry {
  std::int64_t seq = 0;
  std::string question;
  std::string hint;
  std::string sql;
  std::string thought;  // empty in low-information mode
  UnitVector embedding;
  Origin origin = Origin::kAccumulated;
  std::string db_id;

  friend bool operator==(const CorrectEntry&, const CorrectEntry&) = default;
};

/// A failed task: what was tried, what went wrong, the gold SQL and a tip.
struct MistakeEntry {
  std::int64_t seq = 0;
  std::string question;
  std::string hint;
  std::string first_sql;
  std::optional<std::string> exec_error;     // set iff a reflection ran
  std::optional<std::string> reflected_sql;  // set iff a reflection ran
  std::string gold_sql;
  std::string tip;  // empty in low-information mode
  UnitVector embedding;
  Origin origin = Origin::kAccumulated;
  std::string db_id;

  friend bool operator==(const MistakeEntry&, const MistakeEntry&) = default;
};

/// Append-only, similarity-searchable list of entries sharing one dimension.
/// Embeddings are mirrored into a contiguous row-major matrix for the scan.
template <typename Entry>
class Notebook {
 public:
  explicit Notebook(std::size_t dimension) : dimension_(dimension) {}

  /// Assigns the next seq and appends. Returns the stored entry.
  const Entry& append(Entry entry) {
    entry.seq = next_seq_;
    return push(std::move(entry));
  }

  /// Appends an entry that already carries its seq (used when loading).
  const Entry& restore(Entry entry) {
    if (entry.seq < next_seq_) {
      throw StoreError("seq " + std::to_string(entry.seq) +
                       " is not strictly increasing");
    }
    return push(std::move(entry));
  }

  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t dimension() const { return dimension_; }
  std::int64_t next_seq() const { return next_seq_; }

  /// Raises the next seq without adding entries; never lowers it.
  void reserve_seq(std::int64_t next) { next_seq_ = std::max(next_seq_, next); }

  const Entry* find(std::int64_t seq) const {
    for (const auto& e : entries_) {
      if (e.seq == seq) return &e;
    }
    return nullptr;
  }

  /// Up to `n` entries, cosine-descending, ties to the smaller seq.
  std::vector<Entry> top_k(const UnitVector& query, std::size_t n) const {
    if (query.dimension() != dimension_) {
      throw DimensionMismatch(dimension_, query.dimension());
    }
    std::vector<Entry> out;
    if (n == 0 || entries_.empty()) return out;
    std::vector<double> scores(entries_.size());
    kernels::score_rows_parallel(matrix_, dimension_, query.values(), scores);
    for (std::size_t i : kernels::rank_top_n(scores, seqs_, n)) {
      out.push_back(entries_[i]);
    }
    return out;
  }

  std::span<const double> matrix() const { return matrix_; }
  std::span<const std::int64_t> seqs() const { return seqs_; }

 private:
  const Entry& push(Entry entry) {
    if (entry.embedding.dimension() != dimension_) {
      throw DimensionMismatch(dimension_, entry.embedding.dimension());
    }
    auto v = entry.embedding.values();
    matrix_.insert(matrix_.end(), v.begin(), v.end());
    seqs_.push_back(entry.seq);
    next_seq_ = entry.seq + 1;
    entries_.push_back(std::move(entry));
    return entries_.back();
  }

  std::size_t dimension_;
  std::int64_t next_seq_ = 1;
  std::vector<Entry> entries_;
  std::vector<double> matrix_;
  std::vector<std::int64_t> seqs_;
};

/// Fields of a correct-notebook record supplied by the caller.
struct CorrectRecord {
  std::string question;
  std::string hint;
  std::string sql;
  std::string thought;
  Origin origin = Origin::kAccumulated;
  std::string db_id;
};

struct MistakeRecord {
  std::string question;
  std::string hint;
  std::string first_sql;
  std::optional<std::string> exec_error;
  std::optional<std::string> reflected_sql;
  std::string gold_sql;
  std::string tip;
  Origin origin = Origin::kAccumulated;
  std::string db_id;
};

/// The correct and mistake notebooks under one encoder configuration.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(EncoderConfig encoder = {});

  const EncoderConfig& encoder() const { return encoder_; }
  const Notebook<CorrectEntry>& correct() const { return correct_; }
  const Notebook<MistakeEntry>& mistakes() const { return mistakes_; }

  /// Embeds the question and appends; returns the new seq.
  std::int64_t add_correct(const CorrectRecord& record);
  std::int64_t add_mistake(const MistakeRecord& record);

  /// Appends fully formed entries (seq and embedding included).
  void restore_correct(CorrectEntry entry);
  void restore_mistake(MistakeEntry entry);
  void reserve_seqs(std::int64_t next_correct, std::int64_t next_mistake);

  std::size_t total() const { return correct_.size() + mistakes_.size(); }

  friend bool operator==(const KnowledgeBase& a, const KnowledgeBase& b);

 private:
  EncoderConfig encoder_;
  Notebook<CorrectEntry> correct_;
  Notebook<MistakeEntry> mistakes_;
};

struct DemonstrationPlan {
  std::size_t k = 4;
  double correct_rate = 0.5;

  void validate() const;
  /// round_half_up(k * correct_rate)
  std::size_t target_correct() const;
};

struct DemonstrationSet {
  std::vector<CorrectEntry> correct_picks;
  std::vector<MistakeEntry> mistake_picks;

  std::size_t size() const { return correct_picks.size() + mistake_picks.size(); }
  bool empty() const { return size() == 0; }
};

/// Splits k between the notebooks by correct rate, backfilling from the
/// other notebook when one side is short. When both notebooks are empty and
/// `fixed_examples` is non-null, its top entries stand in as correct picks.
DemonstrationSet select_demonstrations(
    const KnowledgeBase& kb, const UnitVector& query,
    const DemonstrationPlan& plan,
    const Notebook<CorrectEntry>* fixed_examples = nullptr);

// ---- persistence -----------------------------------------------------------
//
// A store directory holds:
//   manifest.json    {"format","version","encoder":{...},"correct_count",
//                     "mistake_count","next_correct_seq","next_mistake_seq"}
//   correct.jsonl    one CorrectEntry per line
//   mistakes.jsonl   one MistakeEntry per line
// Field names match the struct members; origin is "seed" | "accumulated";
// absent optionals are null; embeddings are arrays of numbers.

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kCorrectFile = "correct.jsonl";
inline constexpr const char* kMistakeFile = "mistakes.jsonl";

/// Writes the store. Refuses a directory that already holds a store built
/// with a different encoder configuration.
void persist(const KnowledgeBase& kb, const std::filesystem::path& dir);

/// Reads a store; any malformed record aborts the load with file:line.
KnowledgeBase load(const std::filesystem::path& dir);

/// As load, but also requires the stored encoder to match `expected`.
KnowledgeBase load(const std::filesystem::path& dir,
                   const EncoderConfig& expected);

bool store_exists(const std::filesystem::path& dir);

/// Fixed demonstration examples: JSONL of {"question","hint","sql","thought"}.
Notebook<CorrectEntry> load_fixed_examples(const std::filesystem::path& file,
                                           const EncoderConfig& encoder);

}  // namespace lpesql
