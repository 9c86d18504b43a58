#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lpesql/error.hpp"
#include "lpesql/sql_runtime.hpp"
#include "support.hpp"

using namespace lpesql;
using lpesql::testing::TempDir;

namespace {

struct Fixture {
  TempDir dir;
  std::filesystem::path db_root = dir / "db";
  Fixture() { lpesql::testing::build_fixture_databases(db_root); }
  std::filesystem::path db(const std::string& id) const {
    return database_path(db_root, id);
  }
};

const char* kInfinite =
    "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
    "SELECT count(*) FROM c";

}  // namespace

TEST_CASE("select literal") {
  Fixture f;
  auto out = execute(f.db("shop"), "SELECT 1");
  REQUIRE(out.is_rows());
  CHECK(out.row_set().arity == 1);
  REQUIRE(out.row_set().rows.size() == 1);
  CHECK(*out.row_set().rows.begin() == Row{CanonicalValue::integer(1)});
}

TEST_CASE("engine errors become failures") {
  Fixture f;
  auto out = execute(f.db("shop"), "SELECT * FROM nope");
  REQUIRE(out.is_failure());
  CHECK(out.error_message().find("no such table") != std::string::npos);
  CHECK(execute(f.db("shop"), "SELEC 1").is_failure());
  CHECK(execute(f.db("shop"), "").is_failure());
}

TEST_CASE("runaway query times out and leaves the file untouched") {
  Fixture f;
  const auto before = lpesql::testing::read_file(f.db("school"));
  auto out = execute(f.db("school"), kInfinite, 100);
  CHECK(out.is_timeout());
  CHECK(out.error_message() == "timeout");
  (void)execute(f.db("school"), "SELECT * FROM missing");
  (void)execute(f.db("school"), "SELECT count(*) FROM student");
  CHECK(lpesql::testing::read_file(f.db("school")) == before);
}

TEST_CASE("writes are refused") {
  Fixture f;
  const auto before = lpesql::testing::read_file(f.db("shop"));
  CHECK(execute(f.db("shop"), "DELETE FROM product").is_failure());
  CHECK(execute(f.db("shop"), "CREATE TABLE t(x)").is_failure());
  CHECK(execute(f.db("shop"), "ATTACH DATABASE ':memory:' AS other").is_failure());
  CHECK(lpesql::testing::read_file(f.db("shop")) == before);
}

TEST_CASE("only the first statement runs") {
  Fixture f;
  CHECK(execute(f.db("shop"), "SELECT 1;").is_rows());
  CHECK(execute(f.db("shop"), "SELECT 1;  \n").is_rows());
  CHECK(execute(f.db("shop"), "SELECT 1; SELECT 2").is_failure());
}

TEST_CASE("missing database file") {
  Fixture f;
  CHECK_THROWS_AS(execute(f.db("nowhere"), "SELECT 1"), MissingDatabase);
}

TEST_CASE("set semantics and row order") {
  Fixture f;
  auto a = execute(f.db("concert_singer"), "SELECT country FROM singer");
  auto b = execute(f.db("concert_singer"), "SELECT DISTINCT country FROM singer");
  REQUIRE(a.is_rows());
  CHECK(a.row_set().row_count > a.row_set().rows.size());
  CHECK(outcomes_equal(a, b));

  auto asc = execute(f.db("concert_singer"), "SELECT name, age FROM singer ORDER BY age");
  auto desc =
      execute(f.db("concert_singer"), "SELECT name, age FROM singer ORDER BY age DESC");
  CHECK(outcomes_equal(asc, desc));

  auto swapped = execute(f.db("concert_singer"), "SELECT age, name FROM singer");
  CHECK_FALSE(outcomes_equal(asc, swapped));
}

TEST_CASE("integral reals equal integers") {
  Fixture f;
  CHECK(outcomes_equal(execute(f.db("shop"), "SELECT 1"),
                       execute(f.db("shop"), "SELECT 1.0")));
  CHECK_FALSE(outcomes_equal(execute(f.db("shop"), "SELECT 1"),
                             execute(f.db("shop"), "SELECT 1.5")));
  CHECK_FALSE(outcomes_equal(execute(f.db("shop"), "SELECT 1"),
                             execute(f.db("shop"), "SELECT '1'")));
  CHECK(CanonicalValue::real(2.0) == CanonicalValue::integer(2));
  CHECK(CanonicalValue::real(2.0).kind() == CanonicalValue::Kind::kInteger);
  CHECK(CanonicalValue::real(1e300).kind() == CanonicalValue::Kind::kReal);
}

TEST_CASE("nulls and blobs") {
  Fixture f;
  CHECK(outcomes_equal(execute(f.db("shop"), "SELECT NULL"),
                       execute(f.db("shop"), "SELECT NULL")));
  CHECK(outcomes_equal(execute(f.db("shop"), "SELECT x'0102'"),
                       execute(f.db("shop"), "SELECT x'0102'")));
  CHECK_FALSE(outcomes_equal(execute(f.db("shop"), "SELECT x'0102'"),
                             execute(f.db("shop"), "SELECT x'0103'")));
}

TEST_CASE("errors equal nothing") {
  Fixture f;
  auto fail = execute(f.db("shop"), "SELECT * FROM nope");
  auto slow = execute(f.db("shop"), kInfinite, 50);
  CHECK_FALSE(outcomes_equal(fail, fail));
  CHECK_FALSE(outcomes_equal(slow, slow));
  CHECK_FALSE(outcomes_equal(fail, execute(f.db("shop"), "SELECT 1")));
}

TEST_CASE("empty results compare by arity") {
  Fixture f;
  auto one = execute(f.db("shop"), "SELECT name FROM product WHERE 0");
  auto two = execute(f.db("shop"), "SELECT name, price FROM product WHERE 0");
  auto other = execute(f.db("shop"), "SELECT price FROM product WHERE 0");
  CHECK(outcomes_equal(one, other));
  CHECK_FALSE(outcomes_equal(one, two));
}

// Property: equality is reflexive, symmetric and insensitive to row order and
// duplication, and matches a sort-and-dedup oracle.
TEST_CASE("row-set equality properties") {
  std::mt19937_64 rng(7);
  auto random_value = [&]() {
    switch (rng() % 4) {
      case 0: return CanonicalValue::integer(static_cast<std::int64_t>(rng() % 5));
      case 1: return CanonicalValue::real(static_cast<double>(rng() % 5) / 2.0);
      case 2: return CanonicalValue::text(std::string(1, char('a' + rng() % 3)));
      default: return CanonicalValue::null();
    }
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t arity = 1 + rng() % 3;
    std::vector<Row> rows(rng() % 6);
    for (auto& r : rows) {
      for (std::size_t c = 0; c < arity; ++c) r.push_back(random_value());
    }
    auto shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (!shuffled.empty()) shuffled.push_back(shuffled.front());

    RowSet a{arity, {}, 0};
    RowSet b{arity, {}, 0};
    for (const auto& r : rows) a.insert(r);
    for (const auto& r : shuffled) b.insert(r);
    auto oa = ExecOutcome::rows(a);
    auto ob = ExecOutcome::rows(b);
    CHECK(outcomes_equal(oa, oa));
    CHECK(outcomes_equal(oa, ob));
    CHECK(outcomes_equal(ob, oa));

    std::vector<Row> other(rng() % 6);
    for (auto& r : other) {
      for (std::size_t c = 0; c < arity; ++c) r.push_back(random_value());
    }
    RowSet o{arity, {}, 0};
    for (const auto& r : other) o.insert(r);

    auto canon = [](std::vector<Row> v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      return v;
    };
    CHECK(outcomes_equal(oa, ExecOutcome::rows(o)) == (canon(rows) == canon(other)));
  }
}

TEST_CASE("schema text lists tables and views by name") {
  Fixture f;
  const auto text = schema_text(f.db("concert_singer"));
  const auto concert = text.find("CREATE TABLE concert");
  const auto french = text.find("CREATE VIEW french_singers");
  const auto singer = text.find("CREATE TABLE singer");
  REQUIRE(concert != std::string::npos);
  REQUIRE(french != std::string::npos);
  REQUIRE(singer != std::string::npos);
  CHECK(concert < french);
  CHECK(french < singer);
  CHECK(text.find("sqlite_") == std::string::npos);

  TempDir dir;
  lpesql::testing::make_db(dir / "one.sqlite", "CREATE TABLE t (a INTEGER, b TEXT);");
  CHECK(schema_text(dir / "one.sqlite") == "CREATE TABLE t (a INTEGER, b TEXT)");
}

TEST_CASE("database path layout") {
  CHECK(database_path("/data/dev_databases", "shop") ==
        std::filesystem::path("/data/dev_databases/shop/shop.sqlite"));
}
