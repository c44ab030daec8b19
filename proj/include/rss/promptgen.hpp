#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rss/codebook.hpp"
#include "rss/sampler.hpp"

namespace rss {

enum class PromptVariant { standard, reversed_order };

std::string_view to_string(PromptVariant v);
PromptVariant prompt_variant_from(std::string_view s);

struct GenerationParams {
  int max_tokens = 1;
  double temperature = 1.0;
  double top_p = 1.0;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
  std::string model_id = "gpt-3.5-turbo";

  bool operator==(const GenerationParams&) const = default;
};

struct PromptPair {
  std::string system_text;
  std::string user_text;
  GenerationParams params;
  std::uint64_t subject_id = 0;
  std::string question_code;
  PromptVariant variant = PromptVariant::standard;
  // Structured copy of the subject's assignment, carried as batch metadata
  // so offline backends never have to parse prose.
  std::map<std::string, std::string> demographics;
};

/// Sentences for the present variables in prompt_position order, joined by
/// single spaces, optionally preceded by the date sentence.
std::string render_system_prompt(const SiliconSubject& subject, const SurveyCodebook& cb,
                                 std::optional<std::string_view> date_prefix = std::nullopt);

std::string render_user_prompt(const QuestionSpec& q, PromptVariant variant = PromptVariant::standard);

struct BatchSettings {
  GenerationParams params;                 // max_tokens here is ignored unless overridden
  std::optional<int> max_tokens_override;  // otherwise the question's max_tokens
  PromptVariant variant = PromptVariant::standard;
  // Applied when set; callers normally pass the question's own date prefix.
  std::optional<std::string> date_prefix;
};

std::vector<PromptPair> build_prompt_batch(std::span<const SiliconSubject> cohort, const QuestionSpec& q,
                                           const SurveyCodebook& cb, const BatchSettings& settings);

/// One JSON object per line: subject_id, question_code, variant, system_text,
/// user_text, params.
void write_prompt_batch_jsonl(std::ostream& out, std::span<const PromptPair> batch);

}  // namespace rss
