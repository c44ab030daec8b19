#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "rss/codebook.hpp"
#include "rss/stats.hpp"

namespace rss {

struct CodedOutcome {
  std::optional<int> choice;  // nullopt = missing
  std::optional<std::string> matched_rule;

  bool is_missing() const noexcept { return !choice.has_value(); }
  bool operator==(const CodedOutcome&) const = default;
};

struct CodedAnswer {
  std::uint64_t subject_id = 0;
  std::string question_code;
  CodedOutcome outcome;
};

/// Phrase matching: case-insensitive, on the trimmed completion, phrases must
/// start and end at word boundaries. The longest matching phrase wins; ties
/// go to the earliest occurrence, then to rule order.
CodedOutcome code_free_text(std::string_view text, const QuestionSpec& q);

/// First unsigned integer token of the trimmed completion, if within 1..K.
CodedOutcome code_enumerated(std::string_view text, const QuestionSpec& q);

/// Dispatches on the question kind.
CodedOutcome code_completion(std::string_view text, const QuestionSpec& q);

/// Throws DataError when an answer belongs to another question or when no
/// answer is valid.
ResponseDistribution aggregate(std::span<const CodedAnswer> answers, const QuestionSpec& q);

/// Audit dump: subject_id, question_code, outcome, matched_rule.
void write_coded_answers_csv(std::ostream& out, std::span<const CodedAnswer> answers);

}  // namespace rss
