#include "lpesql/notebook.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lpesql {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string to_string(Origin origin) {
  return origin == Origin::kSeed ? "seed" : "accumulated";
}

Origin origin_from_string(std::string_view s) {
  if (s == "seed") return Origin::kSeed;
  if (s == "accumulated") return Origin::kAccumulated;
  throw StoreError("unknown origin: " + std::string(s));
}

KnowledgeBase::KnowledgeBase(EncoderConfig encoder)
    : encoder_(std::move(encoder)),
      correct_(encoder_.dimension),
      mistakes_(encoder_.dimension) {
  encoder_.validate();
}

std::int64_t KnowledgeBase::add_correct(const CorrectRecord& r) {
  if (r.sql.empty()) throw StoreError("correct entry requires non-empty sql");
  CorrectEntry e;
  e.question = r.question;
  e.hint = r.hint;
  e.sql = r.sql;
  e.thought = r.thought;
  e.embedding = embed(r.question, encoder_);
  e.origin = r.origin;
  e.db_id = r.db_id;
  return correct_.append(std::move(e)).seq;
}

std::int64_t KnowledgeBase::add_mistake(const MistakeRecord& r) {
  if (r.gold_sql.empty()) {
    throw StoreError("mistake entry requires non-empty gold_sql");
  }
  if (r.exec_error.has_value() != r.reflected_sql.has_value()) {
    throw StoreError("exec_error and reflected_sql must be set together");
  }
  MistakeEntry e;
  e.question = r.question;
  e.hint = r.hint;
  e.first_sql = r.first_sql;
  e.exec_error = r.exec_error;
  e.reflected_sql = r.reflected_sql;
  e.gold_sql = r.gold_sql;
  e.tip = r.tip;
  e.embedding = embed(r.question, encoder_);
  e.origin = r.origin;
  e.db_id = r.db_id;
  return mistakes_.append(std::move(e)).seq;
}

void KnowledgeBase::restore_correct(CorrectEntry entry) {
  correct_.restore(std::move(entry));
}

void KnowledgeBase::restore_mistake(MistakeEntry entry) {
  mistakes_.restore(std::move(entry));
}

void KnowledgeBase::reserve_seqs(std::int64_t next_correct,
                                 std::int64_t next_mistake) {
  correct_.reserve_seq(next_correct);
  mistakes_.reserve_seq(next_mistake);
}

bool operator==(const KnowledgeBase& a, const KnowledgeBase& b) {
  auto same = [](auto x, auto y) {
    return std::equal(x.begin(), x.end(), y.begin(), y.end());
  };
  return a.encoder_.same_space(b.encoder_) &&
         a.correct_.next_seq() == b.correct_.next_seq() &&
         a.mistakes_.next_seq() == b.mistakes_.next_seq() &&
         same(a.correct_.entries(), b.correct_.entries()) &&
         same(a.mistakes_.entries(), b.mistakes_.entries());
}

void DemonstrationPlan::validate() const {
  if (!(correct_rate >= 0.0 && correct_rate <= 1.0)) {
    throw ConfigError("correct rate must lie in [0, 1]");
  }
}

std::size_t DemonstrationPlan::target_correct() const {
  return static_cast<std::size_t>(
      std::floor(static_cast<double>(k) * correct_rate + 0.5));
}

DemonstrationSet select_demonstrations(
    const KnowledgeBase& kb, const UnitVector& query,
    const DemonstrationPlan& plan,
    const Notebook<CorrectEntry>* fixed_examples) {
  plan.validate();
  DemonstrationSet out;
  const auto& correct = kb.correct();
  const auto& mistakes = kb.mistakes();

  if (correct.empty() && mistakes.empty()) {
    if (fixed_examples != nullptr) {
      out.correct_picks = fixed_examples->top_k(query, plan.k);
    }
    return out;
  }

  const std::size_t want_c = std::min(plan.target_correct(), plan.k);
  const std::size_t want_m = plan.k - want_c;
  const std::size_t got_c = std::min(want_c, correct.size());
  const std::size_t got_m = std::min(want_m, mistakes.size());
  const std::size_t extra_m = std::min(want_c - got_c, mistakes.size() - got_m);
  const std::size_t extra_c = std::min(want_m - got_m, correct.size() - got_c);

  out.correct_picks = correct.top_k(query, got_c + extra_c);
  out.mistake_picks = mistakes.top_k(query, got_m + extra_m);
  return out;
}

// ---- persistence -----------------------------------------------------------

namespace {

constexpr const char* kFormatName = "lpesql-notebook";
constexpr int kFormatVersion = 1;

ojson encoder_json(const EncoderConfig& cfg) {
  ojson j;
  j["mode"] = to_string(cfg.mode);
  j["dimension"] = cfg.dimension;
  if (cfg.mode == EncoderMode::kRemote) {
    j["endpoint"] = cfg.endpoint;
    j["model"] = cfg.model;
  }
  return j;
}

EncoderConfig encoder_from_json(const ojson& j) {
  EncoderConfig cfg;
  cfg.mode = encoder_mode_from_string(j.at("mode").get<std::string>());
  cfg.dimension = j.at("dimension").get<std::size_t>();
  if (cfg.mode == EncoderMode::kRemote) {
    cfg.endpoint = j.at("endpoint").get<std::string>();
    cfg.model = j.at("model").get<std::string>();
  }
  cfg.validate();
  return cfg;
}

ojson optional_json(const std::optional<std::string>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

std::optional<std::string> optional_from(const ojson& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<std::string>();
}

ojson entry_json(const CorrectEntry& e) {
  ojson j;
  j["seq"] = e.seq;
  j["question"] = e.question;
  j["hint"] = e.hint;
  j["sql"] = e.sql;
  j["thought"] = e.thought;
  j["origin"] = to_string(e.origin);
  j["db_id"] = e.db_id;
  j["embedding"] = std::vector<double>(e.embedding.values().begin(),
                                       e.embedding.values().end());
  return j;
}

ojson entry_json(const MistakeEntry& e) {
  ojson j;
  j["seq"] = e.seq;
  j["question"] = e.question;
  j["hint"] = e.hint;
  j["first_sql"] = e.first_sql;
  j["exec_error"] = optional_json(e.exec_error);
  j["reflected_sql"] = optional_json(e.reflected_sql);
  j["gold_sql"] = e.gold_sql;
  j["tip"] = e.tip;
  j["origin"] = to_string(e.origin);
  j["db_id"] = e.db_id;
  j["embedding"] = std::vector<double>(e.embedding.values().begin(),
                                       e.embedding.values().end());
  return j;
}

UnitVector embedding_from(const ojson& j, std::size_t dimension) {
  auto values = j.at("embedding").get<std::vector<double>>();
  if (values.size() != dimension) {
    throw DimensionMismatch(dimension, values.size());
  }
  auto v = UnitVector::from_stored(std::move(values));
  const double n = v.norm();
  if (!v.is_zero() && std::abs(n - 1.0) > 1e-6) {
    throw StoreError("embedding is neither unit-norm nor zero");
  }
  return v;
}

CorrectEntry correct_from_json(const ojson& j, std::size_t dimension) {
  CorrectEntry e;
  e.seq = j.at("seq").get<std::int64_t>();
  e.question = j.at("question").get<std::string>();
  e.hint = j.at("hint").get<std::string>();
  e.sql = j.at("sql").get<std::string>();
  e.thought = j.at("thought").get<std::string>();
  e.origin = origin_from_string(j.at("origin").get<std::string>());
  e.db_id = j.at("db_id").get<std::string>();
  e.embedding = embedding_from(j, dimension);
  if (e.sql.empty()) throw StoreError("empty sql");
  return e;
}

MistakeEntry mistake_from_json(const ojson& j, std::size_t dimension) {
  MistakeEntry e;
  e.seq = j.at("seq").get<std::int64_t>();
  e.question = j.at("question").get<std::string>();
  e.hint = j.at("hint").get<std::string>();
  e.first_sql = j.at("first_sql").get<std::string>();
  e.exec_error = optional_from(j, "exec_error");
  e.reflected_sql = optional_from(j, "reflected_sql");
  e.gold_sql = j.at("gold_sql").get<std::string>();
  e.tip = j.at("tip").get<std::string>();
  e.origin = origin_from_string(j.at("origin").get<std::string>());
  e.db_id = j.at("db_id").get<std::string>();
  e.embedding = embedding_from(j, dimension);
  if (e.gold_sql.empty()) throw StoreError("empty gold_sql");
  return e;
}

void write_file_atomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw StoreError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <typename Entry>
std::string jsonl(std::span<const Entry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out += entry_json(e).dump();
    out += '\n';
  }
  return out;
}

ojson read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestFile);
  if (!in) throw StoreError("missing " + (dir / kManifestFile).string());
  try {
    auto j = ojson::parse(in);
    if (j.at("format").get<std::string>() != kFormatName ||
        j.at("version").get<int>() != kFormatVersion) {
      throw StoreError("unsupported store format in " + dir.string());
    }
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError((dir / kManifestFile).string() + ": " + e.what());
  }
}

template <typename Fn>
void for_each_record(const fs::path& file, Fn&& fn) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw StoreError("missing " + file.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(ojson::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw StoreError(file.string() + ":" + std::to_string(lineno) +
                       ": malformed record: " + e.what());
    } catch (const Error& e) {
      throw StoreError(file.string() + ":" + std::to_string(lineno) + ": " +
                       e.what());
    }
  }
}

}  // namespace

bool store_exists(const fs::path& dir) {
  return fs::exists(dir / kManifestFile);
}

void persist(const KnowledgeBase& kb, const fs::path& dir) {
  if (store_exists(dir)) {
    auto existing = encoder_from_json(read_manifest(dir).at("encoder"));
    if (!existing.same_space(kb.encoder())) {
      throw StoreError("encoder config of " + dir.string() +
                       " differs from the store being written");
    }
  }
  fs::create_directories(dir);
  write_file_atomically(dir / kCorrectFile, jsonl(kb.correct().entries()));
  write_file_atomically(dir / kMistakeFile, jsonl(kb.mistakes().entries()));

  ojson manifest;
  manifest["format"] = kFormatName;
  manifest["version"] = kFormatVersion;
  manifest["encoder"] = encoder_json(kb.encoder());
  manifest["correct_count"] = kb.correct().size();
  manifest["mistake_count"] = kb.mistakes().size();
  manifest["next_correct_seq"] = kb.correct().next_seq();
  manifest["next_mistake_seq"] = kb.mistakes().next_seq();
  write_file_atomically(dir / kManifestFile, manifest.dump(2) + "\n");
}

KnowledgeBase load(const fs::path& dir) {
  auto manifest = read_manifest(dir);
  EncoderConfig encoder;
  std::size_t correct_count = 0;
  std::size_t mistake_count = 0;
  std::int64_t next_correct = 1;
  std::int64_t next_mistake = 1;
  try {
    encoder = encoder_from_json(manifest.at("encoder"));
    correct_count = manifest.at("correct_count").get<std::size_t>();
    mistake_count = manifest.at("mistake_count").get<std::size_t>();
    next_correct = manifest.at("next_correct_seq").get<std::int64_t>();
    next_mistake = manifest.at("next_mistake_seq").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw StoreError((dir / kManifestFile).string() + ": " + e.what());
  }

  KnowledgeBase kb(encoder);
  for_each_record(dir / kCorrectFile, [&](const ojson& j) {
    kb.restore_correct(correct_from_json(j, encoder.dimension));
  });
  for_each_record(dir / kMistakeFile, [&](const ojson& j) {
    kb.restore_mistake(mistake_from_json(j, encoder.dimension));
  });
  if (kb.correct().size() != correct_count ||
      kb.mistakes().size() != mistake_count) {
    throw StoreError("record counts in " + dir.string() +
                     " disagree with the manifest");
  }
  if (next_correct < kb.correct().next_seq() ||
      next_mistake < kb.mistakes().next_seq()) {
    throw StoreError("manifest seq counters in " + dir.string() +
                     " are behind the stored records");
  }
  kb.reserve_seqs(next_correct, next_mistake);
  return kb;
}

KnowledgeBase load(const fs::path& dir, const EncoderConfig& expected) {
  auto kb = load(dir);
  if (!kb.encoder().same_space(expected)) {
    throw StoreError("store " + dir.string() + " was built with encoder " +
                     to_string(kb.encoder().mode) + "/" +
                     std::to_string(kb.encoder().dimension) +
                     ", which differs from the configured encoder");
  }
  return kb;
}

Notebook<CorrectEntry> load_fixed_examples(const fs::path& file,
                                           const EncoderConfig& encoder) {
  Notebook<CorrectEntry> book(encoder.dimension);
  for_each_record(file, [&](const ojson& j) {
    CorrectEntry e;
    e.question = j.at("question").get<std::string>();
    e.hint = j.value("hint", std::string{});
    e.sql = j.at("sql").get<std::string>();
    e.thought = j.value("thought", std::string{});
    e.origin = Origin::kSeed;
    e.embedding = embed(e.question, encoder);
    book.append(std::move(e));
  });
  return book;
}

}  // namespace lpesql
