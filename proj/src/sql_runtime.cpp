#include "lpesql/sql_runtime.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include <sqlite3.h>

#include "lpesql/error.hpp"
#include "lpesql/text_util.hpp"

namespace lpesql {

namespace fs = std::filesystem;

CanonicalValue CanonicalValue::integer(std::int64_t v) {
  CanonicalValue c;
  c.value_ = v;
  return c;
}

CanonicalValue CanonicalValue::real(double v) {
  // 2^63 is exactly representable; anything in [-2^63, 2^63) converts safely.
  constexpr double kLimit = 9223372036854775808.0;
  if (std::isfinite(v) && v == std::trunc(v) && v >= -kLimit && v < kLimit) {
    return integer(static_cast<std::int64_t>(v));
  }
  CanonicalValue c;
  c.value_ = v;
  return c;
}

CanonicalValue CanonicalValue::text(std::string v) {
  CanonicalValue c;
  c.value_ = std::move(v);
  return c;
}

CanonicalValue CanonicalValue::blob(const void* data, std::size_t size) {
  CanonicalValue c;
  c.value_ = BlobDigest{
      fnv1a64(std::string_view(static_cast<const char*>(data), size)), size};
  return c;
}

std::string CanonicalValue::debug_string() const {
  switch (kind()) {
    case Kind::kNull: return "NULL";
    case Kind::kInteger: return std::to_string(std::get<std::int64_t>(value_));
    case Kind::kReal: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(value_));
      return buf;
    }
    case Kind::kText: return "'" + std::get<std::string>(value_) + "'";
    case Kind::kBlob: return "blob:" + hex64(std::get<BlobDigest>(value_).hash);
  }
  return "?";
}

void RowSet::insert(Row row) {
  ++row_count;
  rows.insert(std::move(row));
}

ExecOutcome ExecOutcome::failure(std::string message) {
  if (message.empty()) message = "unknown error";
  return ExecOutcome(ExecFailure{std::move(message)});
}

std::string ExecOutcome::error_message() const {
  if (is_failure()) return std::get<ExecFailure>(v_).message;
  if (is_timeout()) return "timeout";
  return {};
}

std::string ExecOutcome::summary() const {
  if (is_rows()) return "rows(" + std::to_string(row_set().rows.size()) + ")";
  if (is_timeout()) return "timeout";
  return "failure: " + error_message();
}

namespace {

struct DbCloser {
  void operator()(sqlite3* db) const { sqlite3_close_v2(db); }
};
struct StmtFinalizer {
  void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using DbHandle = std::unique_ptr<sqlite3, DbCloser>;
using StmtHandle = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

struct Deadline {
  std::chrono::steady_clock::time_point at;
  bool expired = false;
};

int progress_check(void* arg) {
  auto* d = static_cast<Deadline*>(arg);
  if (std::chrono::steady_clock::now() >= d->at) {
    d->expired = true;
    return 1;
  }
  return 0;
}

int deny_attach(void*, int action, const char*, const char*, const char*,
                const char*) {
  return (action == SQLITE_ATTACH || action == SQLITE_DETACH) ? SQLITE_DENY
                                                              : SQLITE_OK;
}

DbHandle open_read_only(const fs::path& db_file) {
  if (!fs::exists(db_file)) throw MissingDatabase(db_file.string());
  sqlite3* raw = nullptr;
  int rc = sqlite3_open_v2(db_file.c_str(), &raw,
                           SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
  DbHandle db(raw);
  if (rc != SQLITE_OK) {
    throw Error("cannot open " + db_file.string() + ": " +
                (raw ? sqlite3_errmsg(raw) : sqlite3_errstr(rc)));
  }
  return db;
}

CanonicalValue column_value(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_INTEGER:
      return CanonicalValue::integer(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT:
      return CanonicalValue::real(sqlite3_column_double(stmt, col));
    case SQLITE_TEXT: {
      auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
      return CanonicalValue::text(
          std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, col))));
    }
    case SQLITE_BLOB: {
      const void* p = sqlite3_column_blob(stmt, col);
      return CanonicalValue::blob(
          p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, col)));
    }
    default:
      return CanonicalValue::null();
  }
}

}  // namespace

ExecOutcome execute(const fs::path& db_file, const std::string& sql,
                    int timeout_ms) {
  if (timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
  auto db = open_read_only(db_file);
  sqlite3* h = db.get();
  sqlite3_set_authorizer(h, deny_attach, nullptr);
  sqlite3_busy_timeout(h, timeout_ms);

  Deadline deadline{std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(timeout_ms)};
  sqlite3_progress_handler(h, 1000, progress_check, &deadline);

  sqlite3_stmt* raw = nullptr;
  const char* tail = nullptr;
  int rc = sqlite3_prepare_v2(h, sql.c_str(), static_cast<int>(sql.size()),
                              &raw, &tail);
  StmtHandle stmt(raw);
  if (deadline.expired) return ExecOutcome::timeout();
  if (rc != SQLITE_OK) return ExecOutcome::failure(sqlite3_errmsg(h));
  if (!stmt) return ExecOutcome::failure("empty statement");

  if (tail != nullptr && *tail != '\0') {
    sqlite3_stmt* next = nullptr;
    rc = sqlite3_prepare_v2(h, tail, -1, &next, nullptr);
    StmtHandle next_stmt(next);
    if (rc != SQLITE_OK || next_stmt) {
      return ExecOutcome::failure("only one statement may be executed at a time");
    }
  }

  RowSet result;
  result.arity = static_cast<std::size_t>(sqlite3_column_count(stmt.get()));
  while (true) {
    rc = sqlite3_step(stmt.get());
    if (rc == SQLITE_ROW) {
      Row row;
      row.reserve(result.arity);
      for (int c = 0; c < static_cast<int>(result.arity); ++c) {
        row.push_back(column_value(stmt.get(), c));
      }
      result.insert(std::move(row));
    } else if (rc == SQLITE_DONE) {
      break;
    } else {
      if (deadline.expired) return ExecOutcome::timeout();
      return ExecOutcome::failure(sqlite3_errmsg(h));
    }
  }
  return ExecOutcome::rows(std::move(result));
}

bool outcomes_equal(const ExecOutcome& a, const ExecOutcome& b) {
  return a.is_rows() && b.is_rows() && a.row_set().same_set(b.row_set());
}

fs::path database_path(const fs::path& db_root, const std::string& db_id) {
  return db_root / db_id / (db_id + ".sqlite");
}

std::string schema_text(const fs::path& db_file) {
  auto db = open_read_only(db_file);
  constexpr const char* kQuery =
      "SELECT sql FROM sqlite_master "
      "WHERE type IN ('table', 'view') AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' "
      "AND sql IS NOT NULL ORDER BY name";
  sqlite3_stmt* raw = nullptr;
  if (sqlite3_prepare_v2(db.get(), kQuery, -1, &raw, nullptr) != SQLITE_OK) {
    throw Error("cannot read schema of " + db_file.string() + ": " +
                sqlite3_errmsg(db.get()));
  }
  StmtHandle stmt(raw);
  std::string out;
  int rc;
  while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
    if (!out.empty()) out += "\n\n";
    out += reinterpret_cast<const char*>(sqlite3_column_text(stmt.get(), 0));
  }
  if (rc != SQLITE_DONE) {
    throw Error("cannot read schema of " + db_file.string() + ": " +
                sqlite3_errmsg(db.get()));
  }
  return out;
}

}  // namespace lpesql
