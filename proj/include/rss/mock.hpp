#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rss/backend.hpp"
#include "rss/codebook.hpp"
#include "rss/stats.hpp"

namespace rss {

/// Offline respondent model: choice probabilities are
/// softmax(base + sum of demographic modifiers) and the drawn choice is
/// emitted as its template text.
struct MockQuestionModel {
  std::vector<double> base;  // one weight per choice, index 0 = choice 1
  // (variable code, value) -> additive weight per choice
  std::map<std::pair<std::string, std::string>, std::vector<double>> modifiers;
  // Emission text per choice; an empty template means the choice is never emitted.
  std::vector<std::string> templates;

  bool operator==(const MockQuestionModel&) const = default;
};

struct MockModelSpec {
  std::map<std::string, MockQuestionModel> questions;

  bool operator==(const MockModelSpec&) const = default;
};

/// Throws ValidationError when a question has no emittable choice, weights
/// are not finite, or vector lengths disagree.
void validate_mock_spec(const MockModelSpec& spec);

MockModelSpec parse_mock_spec(std::string_view text);
MockModelSpec load_mock_spec(const std::filesystem::path& path);
std::string serialize_mock_spec(const MockModelSpec& spec);

/// Choice probabilities for one request (choices without templates get 0).
std::vector<double> mock_choice_probabilities(const MockQuestionModel& model,
                                              const std::map<std::string, std::string>& demographics);

/// Seed of the draw for one (run, subject, question) triple.
std::uint64_t mock_draw_seed(std::uint64_t run_seed, std::uint64_t subject_id, std::string_view question_code);

/// Throws BackendError(unknown_question) when the request's question is not
/// in the mock model.
RawCompletion mock_complete(const GenerationRequest& req, const MockModelSpec& spec, std::uint64_t run_seed);

class MockBackend final : public CompletionBackend {
 public:
  MockBackend(const MockModelSpec& spec, std::uint64_t run_seed) : spec_(&spec), run_seed_(run_seed) {}

  RawCompletion complete(const GenerationRequest& req) override { return mock_complete(req, *spec_, run_seed_); }
  std::string identity() const override { return "mock"; }

 private:
  const MockModelSpec* spec_;
  std::uint64_t run_seed_;
};

/// Spec whose answer distribution equals each reference distribution:
/// base weights are log proportions (floored at log 1e-12), no modifiers.
/// Free-text questions emit the answer text, enumerated ones the index.
MockModelSpec fit_mock_spec(const SurveyCodebook& cb, std::span<const ResponseDistribution> references);

}  // namespace rss
