#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "lpesql/notebook.hpp"

namespace lpesql {

enum class PromptKind { kGenerateSql, kThoughtProcess, kReflectSql, kMistakeTip };

inline constexpr PromptKind kAllPromptKinds[] = {
    PromptKind::kGenerateSql, PromptKind::kThoughtProcess,
    PromptKind::kReflectSql, PromptKind::kMistakeTip};

/// "GenerateSql", "ThoughtProcess", "ReflectSql", "MistakeTip".
std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view s);

/// Inputs to a template. Which fields are required depends on the kind:
///   GenerateSql     schema_text, question
///   ThoughtProcess  schema_text, question, sql
///   ReflectSql      schema_text, question, exec_error
///   MistakeTip      schema_text, question, gold_sql
/// hint may always be empty. Demonstrations are used by GenerateSql and
/// ReflectSql only.
struct PromptContext {
  std::string schema_text;
  std::string question;
  std::string hint;
  DemonstrationSet demonstrations;
  std::string sql;
  std::optional<std::string> exec_error;
  std::optional<std::string> reflected_sql;
  std::string gold_sql;
};

/// Renders the template for `kind`. Throws PromptError on a missing field.
std::string render(PromptKind kind, const PromptContext& ctx);

/// Pulls the SQL statement out of a model reply: drops code fences, starts
/// at the first SELECT or WITH keyword, and drops "#"/"--" commentary lines
/// that follow a terminating semicolon. Throws NoSqlFound.
std::string extract_sql(std::string_view text);

/// Strips a leading "# Tip:" / "Tip:" label from a tip reply.
std::string clean_tip(std::string_view text);

}  // namespace lpesql
