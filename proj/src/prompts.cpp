#include "lpesql/prompts.hpp"

#include <cctype>
#include <regex>
#include <sstream>
#include <vector>

#include "lpesql/text_util.hpp"

namespace lpesql {

namespace {

constexpr std::string_view kCorrectHeader =
    "# For your reference, here are some examples of Questions, sql queries, "
    "and thought processes related to the Question you're working with\n";

constexpr std::string_view kMistakeHeader =
    "# Below are examples of mistakes you've made before that are similar to "
    "the question you're about to tackle, so please refer to not making the "
    "same mistake!\n";

constexpr std::string_view kSqlOnlyInstructions =
    "In your response, you do not need to mention your intermediate steps.\n"
    "    Do not include any comments in your response.\n"
    "    Do not need to start with the symbol ```\n"
    "    Your SQL code should be concise and efficient.\n"
    "    You only need to return the result SQLite SQL code\n"
    "    start from SELECT\n";

std::string or_none(const std::optional<std::string>& v) {
  return v ? *v : std::string("None");
}

void require(bool ok, PromptKind kind, const char* field) {
  if (!ok) {
    throw PromptError(std::string(to_string(kind)) + " prompt requires " +
                      field);
  }
}

void render_correct(std::ostringstream& out, const CorrectEntry& e) {
  out << "## Question: " << e.question << '\n';
  out << "## External Knowledge: " << e.hint << '\n';
  out << "## SQL: " << e.sql << '\n';
  if (!e.thought.empty()) out << "## Thought process: " << e.thought << '\n';
  out << '\n';
}

void render_mistake(std::ostringstream& out, const MistakeEntry& e) {
  out << "## Question: " << e.question << '\n';
  out << "## External Knowledge: " << e.hint << '\n';
  out << "## Error SQL: " << e.first_sql << '\n';
  if (!e.tip.empty()) out << "## Tip: " << e.tip << '\n';
  out << "## Ground Truth SQL: " << e.gold_sql << '\n';
  out << '\n';
}

// Correct examples first, then mistakes; a section with no picks is omitted.
void render_demonstrations(std::ostringstream& out, const DemonstrationSet& d) {
  if (!d.correct_picks.empty()) {
    out << kCorrectHeader;
    for (const auto& e : d.correct_picks) render_correct(out, e);
  }
  if (!d.mistake_picks.empty()) {
    out << kMistakeHeader;
    for (const auto& e : d.mistake_picks) render_mistake(out, e);
  }
}

void render_schema(std::ostringstream& out, const PromptContext& ctx) {
  out << "# Schema of the database:\n" << ctx.schema_text << "\n\n";
}

void render_question_block(std::ostringstream& out, const PromptContext& ctx) {
  out << "# Question:\n" << ctx.question << "\n\n";
  out << "# External Knowledge :\n" << ctx.hint << "\n\n";
}

std::string render_generate(const PromptContext& ctx) {
  std::ostringstream out;
  render_demonstrations(out, ctx.demonstrations);
  render_schema(out, ctx);
  out << "-- Using valid SQLite and understanding Hint, answer the following "
         "questions for the tables provided above.\n";
  out << "-- " << ctx.question << '\n';
  out << "-- " << ctx.hint << "\n\n";
  out << "Generate the SQLite for the above question after thinking step by "
         "step:\n\n";
  out << kSqlOnlyInstructions;
  return out.str();
}

std::string render_thought(const PromptContext& ctx) {
  std::ostringstream out;
  render_schema(out, ctx);
  render_question_block(out, ctx);
  out << "# You just generated the following SQL:\n" << ctx.sql << "\n\n";
  out << "Now, please provide your thought process behind the generation of "
         "this SQL query. Your explanation should be concise and efficient, "
         "focusing on the key reasoning steps.\n";
  return out.str();
}

std::string render_reflect(const PromptContext& ctx) {
  std::ostringstream out;
  render_demonstrations(out, ctx.demonstrations);
  render_schema(out, ctx);
  render_question_block(out, ctx);
  out << "# SQL Query:\n" << ctx.sql << "\n\n";
  out << "# Error:\n" << *ctx.exec_error << "\n\n";
  out << "Reflect on the error encountered in the SQL query and provide a "
         "corrected SQL query.\n\n";
  out << kSqlOnlyInstructions;
  return out.str();
}

std::string render_tip(const PromptContext& ctx) {
  std::ostringstream out;
  render_schema(out, ctx);
  render_question_block(out, ctx);
  out << "# Error SQL Query:\n" << ctx.sql << "\n\n";
  out << "# Error information:\n" << or_none(ctx.exec_error) << "\n\n";
  out << "# SQL after Reflection:\n" << or_none(ctx.reflected_sql) << "\n\n";
  out << "# Ground Truth SQL:\n" << ctx.gold_sql << "\n\n";
  out << "Error SQL Query is the result you generate the first time and SQL "
         "after Reflection is the result you generate again based on the "
         "Error information returned by the compiler knowing that the first "
         "generated result was wrong. Now that both results are known to be "
         "wrong, I am providing Ground Truth SQL for your reference, please "
         "think carefully about why your first two results were not correct, "
         "please provide a Tip on how to avoid making the same mistake in the "
         "future. Note that you only need to return the Tip. Please return in "
         "the following format:\n";
  out << "# Tip:\n";
  return out.str();
}

bool is_ident(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Position of the first SELECT or CTE-opening WITH in `s`, or npos.
std::size_t find_sql_start(std::string_view s) {
  static const std::regex cte(
      R"(^with\s+(recursive\s+)?[\w"`\[\]]+\s*(\([^)]*\))?\s*as\s*(not\s+materialized\s*|materialized\s*)?\()",
      std::regex::icase);
  const std::string lower = to_lower_ascii(s);
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (i > 0 && is_ident(lower[i - 1])) continue;
    auto rest = std::string_view(lower).substr(i);
    if (rest.starts_with("select") &&
        (rest.size() == 6 || !is_ident(rest[6]))) {
      return i;
    }
    if (rest.starts_with("with") && rest.size() > 4 && !is_ident(rest[4])) {
      const std::string tail(s.substr(i));
      if (std::regex_search(tail, cte)) return i;
    }
  }
  return std::string_view::npos;
}

std::vector<std::string_view> fenced_blocks(std::string_view text) {
  std::vector<std::string_view> blocks;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body = text.find('\n', open + 3);
    if (body == std::string_view::npos) break;
    ++body;
    auto close = text.find("```", body);
    if (close == std::string_view::npos) {
      blocks.push_back(text.substr(body));
      break;
    }
    blocks.push_back(text.substr(body, close - body));
    pos = close + 3;
  }
  return blocks;
}

std::string drop_trailing_commentary(std::string_view sql) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= sql.size()) {
    auto nl = sql.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(sql.substr(start));
      break;
    }
    lines.push_back(sql.substr(start, nl - start));
    start = nl + 1;
  }
  std::size_t terminator = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).ends_with(';')) {
      terminator = i;
      break;
    }
  }
  std::size_t keep = lines.size();
  if (terminator < lines.size()) {
    while (keep > terminator + 1) {
      auto t = trim(lines[keep - 1]);
      if (t.empty() || t.starts_with('#') || t.starts_with("--")) {
        --keep;
      } else {
        break;
      }
    }
  }
  std::string out;
  for (std::size_t i = 0; i < keep; ++i) {
    if (i > 0) out += '\n';
    out += lines[i];
  }
  return std::string(trim(out));
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::kGenerateSql: return "GenerateSql";
    case PromptKind::kThoughtProcess: return "ThoughtProcess";
    case PromptKind::kReflectSql: return "ReflectSql";
    case PromptKind::kMistakeTip: return "MistakeTip";
  }
  return "?";
}

PromptKind prompt_kind_from_string(std::string_view s) {
  for (auto kind : kAllPromptKinds) {
    if (to_string(kind) == s) return kind;
  }
  throw ConfigError("unknown prompt kind: " + std::string(s));
}

std::string render(PromptKind kind, const PromptContext& ctx) {
  require(!ctx.schema_text.empty(), kind, "schema_text");
  require(!ctx.question.empty(), kind, "question");
  switch (kind) {
    case PromptKind::kGenerateSql:
      return render_generate(ctx);
    case PromptKind::kThoughtProcess:
      require(!ctx.sql.empty(), kind, "sql");
      return render_thought(ctx);
    case PromptKind::kReflectSql:
      require(ctx.exec_error.has_value() && !ctx.exec_error->empty(), kind,
              "exec_error");
      return render_reflect(ctx);
    case PromptKind::kMistakeTip:
      require(!ctx.gold_sql.empty(), kind, "gold_sql");
      return render_tip(ctx);
  }
  throw PromptError("unknown prompt kind");
}

std::string extract_sql(std::string_view text) {
  std::string_view region;
  std::size_t start = std::string_view::npos;
  for (auto block : fenced_blocks(text)) {
    start = find_sql_start(block);
    if (start != std::string_view::npos) {
      region = block;
      break;
    }
  }
  if (start == std::string_view::npos) {
    region = text;
    start = find_sql_start(region);
    if (start == std::string_view::npos) throw NoSqlFound();
    auto fence = region.find("```", start);
    if (fence != std::string_view::npos) region = region.substr(0, fence);
  }
  auto sql = drop_trailing_commentary(trim(region.substr(start)));
  if (sql.empty()) throw NoSqlFound();
  return sql;
}

std::string clean_tip(std::string_view text) {
  auto t = trim(text);
  for (std::string_view label : {"# Tip:", "#Tip:", "Tip:"}) {
    if (t.size() >= label.size() &&
        to_lower_ascii(t.substr(0, label.size())) == to_lower_ascii(label)) {
      t = trim(t.substr(label.size()));
      break;
    }
  }
  return std::string(t);
}

}  // namespace lpesql
