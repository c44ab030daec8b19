#include "rss/promptgen.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

#include <json.hpp>

#include "rss/error.hpp"

namespace rss {

namespace {

bool is_integer(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && ec == std::errc{} && ptr == s.data() + s.size();
}

std::string sentence_for(const DemographicVariable& var, const std::string& value) {
  if (var.kind == VariableKind::open_numeric) {
    if (!is_integer(value)) throw ValidationError("value '" + value + "' of " + var.code + " is not an integer");
    std::string out = var.numeric_template;
    const auto pos = out.find("{}");
    out.replace(pos, 2, value);
    return out;
  }
  const auto* choice = var.find_choice(value);
  if (!choice) throw ValidationError("value '" + value + "' is not a choice of " + var.code);
  return choice->phrase;
}

}  // namespace

std::string_view to_string(PromptVariant v) {
  return v == PromptVariant::standard ? "standard" : "reversed";
}

PromptVariant prompt_variant_from(std::string_view s) {
  if (s == "standard") return PromptVariant::standard;
  if (s == "reversed" || s == "reversed_order") return PromptVariant::reversed_order;
  throw ConfigError("unknown prompt variant '" + std::string(s) + "'");
}

std::string render_system_prompt(const SiliconSubject& subject, const SurveyCodebook& cb,
                                 std::optional<std::string_view> date_prefix) {
  for (const auto& [code, value] : subject.assignment) {
    if (!cb.find_variable(code)) throw ValidationError("subject assigns unknown variable " + code);
  }
  std::string out;
  auto append = [&out](std::string_view sentence) {
    if (!out.empty()) out.push_back(' ');
    out.append(sentence);
  };
  if (date_prefix && !date_prefix->empty()) append(*date_prefix);
  for (const auto* var : cb.prompt_order()) {
    if (const auto* value = subject.value(var->code)) append(sentence_for(*var, *value));
  }
  return out;
}

std::string render_user_prompt(const QuestionSpec& q, PromptVariant variant) {
  if (q.question_text.empty()) throw ValidationError("question " + q.code + " has empty text");

  if (q.kind == QuestionKind::free_text_coded) {
    static constexpr std::string_view kPlaceholder = "{candidates}";
    const auto pos = q.question_text.find(kPlaceholder);
    if (variant == PromptVariant::reversed_order && (pos == std::string::npos || q.candidate_clauses.size() != 2)) {
      throw ValidationError("reversed order needs a two-candidate question; " + q.code + " is not one");
    }
    if (pos == std::string::npos) return q.question_text;

    std::vector<std::string> clauses = q.candidate_clauses;
    if (variant == PromptVariant::reversed_order) std::reverse(clauses.begin(), clauses.end());
    std::string joined;
    for (std::size_t i = 0; i < clauses.size(); ++i) {
      if (i) joined += ", and ";
      joined += clauses[i];
    }
    std::string out = q.question_text;
    out.replace(pos, kPlaceholder.size(), joined);
    return out;
  }

  if (variant == PromptVariant::reversed_order) {
    throw ValidationError("reversed order needs a two-candidate question; " + q.code + " is enumerated");
  }
  std::string out = "Question: " + q.question_text + "\nAnswer choices:\n";
  for (const auto& a : q.answer_choices) out += std::to_string(a.index) + ". " + a.text + "\n";
  out += "My answer is";
  return out;
}

std::vector<PromptPair> build_prompt_batch(std::span<const SiliconSubject> cohort, const QuestionSpec& q,
                                           const SurveyCodebook& cb, const BatchSettings& settings) {
  if (cohort.empty()) throw ValidationError("cannot build a prompt batch for an empty cohort");
  const std::string user = render_user_prompt(q, settings.variant);

  GenerationParams params = settings.params;
  params.max_tokens = settings.max_tokens_override.value_or(q.max_tokens);
  if (params.max_tokens < 1) throw ValidationError("max_tokens must be >= 1");

  std::optional<std::string_view> date;
  if (settings.date_prefix) date = *settings.date_prefix;

  std::vector<PromptPair> batch;
  batch.reserve(cohort.size());
  for (const auto& s : cohort) {
    PromptPair p;
    p.system_text = render_system_prompt(s, cb, date);
    p.user_text = user;
    p.params = params;
    p.subject_id = s.subject_id;
    p.question_code = q.code;
    p.variant = settings.variant;
    p.demographics = s.assignment;
    batch.push_back(std::move(p));
  }
  std::stable_sort(batch.begin(), batch.end(),
                   [](const PromptPair& a, const PromptPair& b) { return a.subject_id < b.subject_id; });
  return batch;
}

void write_prompt_batch_jsonl(std::ostream& out, std::span<const PromptPair> batch) {
  for (const auto& p : batch) {
    nlohmann::ordered_json j;
    j["subject_id"] = p.subject_id;
    j["question_code"] = p.question_code;
    j["variant"] = std::string(to_string(p.variant));
    j["system_text"] = p.system_text;
    j["user_text"] = p.user_text;
    j["params"] = {{"model", p.params.model_id},
                   {"max_tokens", p.params.max_tokens},
                   {"temperature", p.params.temperature},
                   {"top_p", p.params.top_p},
                   {"frequency_penalty", p.params.frequency_penalty},
                   {"presence_penalty", p.params.presence_penalty}};
    out << j.dump() << '\n';
  }
}

}  // namespace rss
