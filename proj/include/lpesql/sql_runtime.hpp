#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace lpesql {

struct BlobDigest {
  std::uint64_t hash = 0;
  std::size_t size = 0;
  auto operator<=>(const BlobDigest&) const = default;
};

/// One result cell. Reals with an integral value that fits in 64 bits are
/// stored as Integer, so Integer(1) and Real(1.0) are the same value.
class CanonicalValue {
 public:
  enum class Kind { kNull, kInteger, kReal, kText, kBlob };

  CanonicalValue() = default;
  static CanonicalValue null() { return {}; }
  static CanonicalValue integer(std::int64_t v);
  static CanonicalValue real(double v);
  static CanonicalValue text(std::string v);
  static CanonicalValue blob(const void* data, std::size_t size);

  Kind kind() const { return static_cast<Kind>(value_.index()); }
  const auto& raw() const { return value_; }
  std::string debug_string() const;

  auto operator<=>(const CanonicalValue&) const = default;

 private:
  std::variant<std::monostate, std::int64_t, double, std::string, BlobDigest>
      value_;
};

using Row = std::vector<CanonicalValue>;

/// Result rows with set semantics. row_count keeps the pre-collapse count
/// for diagnostics and does not take part in equality.
struct RowSet {
  std::size_t arity = 0;
  std::set<Row> rows;
  std::size_t row_count = 0;

  void insert(Row row);
  bool same_set(const RowSet& other) const {
    return arity == other.arity && rows == other.rows;
  }
};

struct ExecFailure {
  std::string message;
};
struct ExecTimeout {};

/// Rows, Failure(message) or Timeout.
class ExecOutcome {
 public:
  static ExecOutcome rows(RowSet r) { return ExecOutcome(std::move(r)); }
  static ExecOutcome failure(std::string message);
  static ExecOutcome timeout() { return ExecOutcome(ExecTimeout{}); }

  bool is_rows() const { return std::holds_alternative<RowSet>(v_); }
  bool is_failure() const { return std::holds_alternative<ExecFailure>(v_); }
  bool is_timeout() const { return std::holds_alternative<ExecTimeout>(v_); }
  bool is_error() const { return !is_rows(); }

  const RowSet& row_set() const { return std::get<RowSet>(v_); }
  /// Failure message, or "timeout" for a timeout. Empty for Rows.
  std::string error_message() const;
  /// Short description for logs: "rows(3)", "failure: ...", "timeout".
  std::string summary() const;

 private:
  template <typename T>
  explicit ExecOutcome(T v) : v_(std::move(v)) {}
  std::variant<RowSet, ExecFailure, ExecTimeout> v_;
};

inline constexpr int kDefaultTimeoutMs = 30000;

/// Runs the first statement of `sql` read-only, cancelling it at the
/// deadline. Engine errors become Failure. Throws MissingDatabase if the
/// file does not exist.
ExecOutcome execute(const std::filesystem::path& db_file, const std::string& sql,
                    int timeout_ms = kDefaultTimeoutMs);

/// Set equality of Rows outcomes. Failure and Timeout equal nothing,
/// themselves included.
bool outcomes_equal(const ExecOutcome& a, const ExecOutcome& b);

/// `<db_root>/<db_id>/<db_id>.sqlite`
std::filesystem::path database_path(const std::filesystem::path& db_root,
                                    const std::string& db_id);

/// DDL of user tables and views, ordered by name, blank-line separated.
std::string schema_text(const std::filesystem::path& db_file);

}  // namespace lpesql
