#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rss {

enum class VariableKind { categorical, open_numeric };

struct Choice {
  std::string value;   // code as it appears in the data file, e.g. "1"
  std::string label;   // survey label, e.g. "white"
  std::string phrase;  // first-person sentence, e.g. "Racially, I am white."

  bool operator==(const Choice&) const = default;
};

struct DemographicVariable {
  std::string code;
  std::string display_name;
  VariableKind kind = VariableKind::categorical;
  std::vector<Choice> choices;
  // Only for open_numeric variables: sentence with a single "{}" placeholder.
  std::string numeric_template;
  int prompt_position = 0;

  const Choice* find_choice(std::string_view value) const;

  bool operator==(const DemographicVariable&) const = default;
};

struct AnswerChoice {
  int index = 0;  // 1-based
  std::string text;

  bool operator==(const AnswerChoice&) const = default;
};

struct CodingRule {
  std::string phrase;
  int target_choice_index = 0;

  bool operator==(const CodingRule&) const = default;
};

enum class QuestionKind { free_text_coded, enumerated_choice };

struct QuestionSpec {
  std::string code;
  std::string topic;
  // For free-text questions this may contain a "{candidates}" placeholder,
  // replaced by candidate_clauses joined with ", and ".
  std::string question_text;
  std::vector<AnswerChoice> answer_choices;
  int max_tokens = 1;
  std::optional<std::string> date_prefix;
  std::vector<CodingRule> coding_rules;
  QuestionKind kind = QuestionKind::enumerated_choice;
  std::vector<std::string> candidate_clauses;

  std::size_t choice_count() const noexcept { return answer_choices.size(); }
  bool has_choice(int index) const noexcept {
    return index >= 1 && static_cast<std::size_t>(index) <= answer_choices.size();
  }

  bool operator==(const QuestionSpec&) const = default;
};

/// One conjunct of a stratum predicate. Either an explicit value set or an
/// inclusive integer range (for open-numeric variables such as age).
struct StratumConjunct {
  std::string variable_code;
  std::vector<std::string> values;
  std::optional<std::int64_t> range_min;
  std::optional<std::int64_t> range_max;

  bool is_range() const noexcept { return range_min.has_value() || range_max.has_value(); }
  bool accepts(std::string_view value) const;

  bool operator==(const StratumConjunct&) const = default;
};

struct StratumSpec {
  std::string name;
  std::vector<StratumConjunct> predicate;
  // Alternates are named variants (e.g. differently labelled interest bands)
  // that are excluded from the default stratum set.
  bool alternate = false;

  bool operator==(const StratumSpec&) const = default;
};

struct SurveyCodebook {
  std::vector<DemographicVariable> variables;
  std::vector<QuestionSpec> questions;
  std::vector<StratumSpec> strata;
  std::map<std::string, std::string> metadata;

  const DemographicVariable* find_variable(std::string_view code) const;
  const QuestionSpec* find_question(std::string_view code) const;
  const StratumSpec* find_stratum(std::string_view name) const;

  const DemographicVariable& variable(std::string_view code) const;
  const QuestionSpec& question(std::string_view code) const;
  const StratumSpec& stratum(std::string_view name) const;

  /// Variables sorted by prompt_position.
  std::vector<const DemographicVariable*> prompt_order() const;
  /// Non-alternate strata in file order.
  std::vector<const StratumSpec*> default_strata() const;

  bool operator==(const SurveyCodebook&) const = default;
};

struct Violation {
  std::string subject;  // offending variable/question/stratum code
  std::string field;
  std::string message;
};

/// Lists every invariant violation; empty means the codebook is valid.
std::vector<Violation> validate_codebook(const SurveyCodebook& cb);

std::string to_string(const Violation& v);

/// Parses and validates. Throws ParseError on malformed documents and
/// ValidationError (message names the first offending code) otherwise.
SurveyCodebook load_codebook(std::istream& source);
SurveyCodebook load_codebook(const std::filesystem::path& path);
SurveyCodebook parse_codebook(std::string_view text);

std::string serialize_codebook(const SurveyCodebook& cb);

std::string_view to_string(VariableKind kind);
std::string_view to_string(QuestionKind kind);

}  // namespace rss
