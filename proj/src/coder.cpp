#include "rss/coder.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>

#include "rss/csv.hpp"
#include "rss/error.hpp"

namespace rss {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Position of the first word-bounded occurrence of needle in hay, or npos.
std::size_t find_word(std::string_view hay, std::string_view needle) {
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]) || !is_word_char(needle.front());
    const auto end = pos + needle.size();
    const bool right_ok = end == hay.size() || !is_word_char(hay[end]) || !is_word_char(needle.back());
    if (left_ok && right_ok) return pos;
  }
  return std::string_view::npos;
}

}  // namespace

CodedOutcome code_free_text(std::string_view text, const QuestionSpec& q) {
  const std::string hay = lower(trim(text));
  CodedOutcome best;
  std::size_t best_len = 0;
  std::size_t best_pos = std::string::npos;
  for (const auto& rule : q.coding_rules) {
    const std::string needle = lower(trim(rule.phrase));
    if (needle.empty()) continue;
    const auto pos = find_word(hay, needle);
    if (pos == std::string::npos) continue;
    if (needle.size() > best_len || (needle.size() == best_len && pos < best_pos)) {
      best_len = needle.size();
      best_pos = pos;
      best.choice = rule.target_choice_index;
      best.matched_rule = rule.phrase;
    }
  }
  return best;
}

CodedOutcome code_enumerated(std::string_view text, const QuestionSpec& q) {
  const auto t = trim(text);
  const auto start = std::find_if(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  if (start == t.end()) return {};
  if (start != t.begin() && *(start - 1) == '-') return {};
  long long value = 0;
  auto it = start;
  for (; it != t.end() && std::isdigit(static_cast<unsigned char>(*it)); ++it) {
    value = value * 10 + (*it - '0');
    if (value > 1'000'000) return {};
  }
  if (!q.has_choice(static_cast<int>(value))) return {};
  CodedOutcome out;
  out.choice = static_cast<int>(value);
  out.matched_rule = std::string(start, it);
  return out;
}

CodedOutcome code_completion(std::string_view text, const QuestionSpec& q) {
  return q.kind == QuestionKind::free_text_coded ? code_free_text(text, q) : code_enumerated(text, q);
}

ResponseDistribution aggregate(std::span<const CodedAnswer> answers, const QuestionSpec& q) {
  std::vector<std::int64_t> counts(q.choice_count(), 0);
  std::int64_t missing = 0;
  for (const auto& a : answers) {
    if (a.question_code != q.code) {
      throw DataError("answer for " + a.question_code + " aggregated under " + q.code);
    }
    if (a.outcome.choice && q.has_choice(*a.outcome.choice)) {
      ++counts[static_cast<std::size_t>(*a.outcome.choice - 1)];
    } else {
      ++missing;
    }
  }
  std::vector<std::string> labels;
  for (const auto& c : q.answer_choices) labels.push_back(c.text);
  return ResponseDistribution::from_counts(q.code, std::move(labels), std::move(counts), missing,
                                           DistributionRole::generated);
}

void write_coded_answers_csv(std::ostream& out, std::span<const CodedAnswer> answers) {
  csv::write_row(out, {"subject_id", "question_code", "outcome", "matched_rule"});
  for (const auto& a : answers) {
    csv::write_row(out, {std::to_string(a.subject_id), a.question_code,
                         a.outcome.choice ? std::to_string(*a.outcome.choice) : "missing",
                         a.outcome.matched_rule.value_or("")});
  }
}

}  // namespace rss
