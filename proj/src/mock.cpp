#include "rss/mock.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rss/error.hpp"
#include "rss/rng.hpp"

namespace rss {

using nlohmann::json;

void validate_mock_spec(const MockModelSpec& spec) {
  for (const auto& [code, m] : spec.questions) {
    if (m.base.empty()) throw ValidationError("mock question " + code + " has no choices");
    if (m.templates.size() != m.base.size()) {
      throw ValidationError("mock question " + code + ": templates and base weights differ in length");
    }
    if (std::none_of(m.templates.begin(), m.templates.end(), [](const auto& t) { return !t.empty(); })) {
      throw ValidationError("mock question " + code + " has no emission template");
    }
    auto finite = [](const std::vector<double>& w) {
      return std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(m.base)) throw ValidationError("mock question " + code + " has a non-finite base weight");
    for (const auto& [key, w] : m.modifiers) {
      if (w.size() != m.base.size() || !finite(w)) {
        throw ValidationError("mock question " + code + ": bad modifier for " + key.first + "=" + key.second);
      }
    }
  }
}

MockModelSpec parse_mock_spec(std::string_view text) {
  MockModelSpec spec;
  try {
    const json doc = json::parse(text);
    for (const auto& [code, jq] : doc.at("questions").items()) {
      MockQuestionModel m;
      m.base = jq.at("base").get<std::vector<double>>();
      m.templates = jq.at("templates").get<std::vector<std::string>>();
      for (const auto& jm : jq.value("modifiers", json::array())) {
        auto key = std::make_pair(jm.at("variable").get<std::string>(), jm.at("value").get<std::string>());
        const int choice = jm.at("choice").get<int>();
        if (choice < 1 || static_cast<std::size_t>(choice) > m.base.size()) {
          throw ValidationError("mock question " + code + ": modifier targets missing choice " +
                                std::to_string(choice));
        }
        auto& w = m.modifiers[key];
        w.resize(m.base.size(), 0.0);
        w[static_cast<std::size_t>(choice - 1)] += jm.at("weight").get<double>();
      }
      spec.questions.emplace(code, std::move(m));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed mock spec: ") + e.what());
  }
  validate_mock_spec(spec);
  return spec;
}

MockModelSpec load_mock_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mock spec " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_mock_spec(buf.str());
}

std::string serialize_mock_spec(const MockModelSpec& spec) {
  nlohmann::ordered_json questions = nlohmann::ordered_json::object();
  for (const auto& [code, m] : spec.questions) {
    nlohmann::ordered_json jq;
    jq["base"] = m.base;
    jq["templates"] = m.templates;
    auto mods = nlohmann::ordered_json::array();
    for (const auto& [key, w] : m.modifiers) {
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (w[k] == 0.0) continue;
        mods.push_back({{"variable", key.first}, {"value", key.second}, {"choice", k + 1}, {"weight", w[k]}});
      }
    }
    jq["modifiers"] = std::move(mods);
    questions[code] = std::move(jq);
  }
  nlohmann::ordered_json doc;
  doc["questions"] = std::move(questions);
  return doc.dump(2) + "\n";
}

std::vector<double> mock_choice_probabilities(const MockQuestionModel& model,
                                              const std::map<std::string, std::string>& demographics) {
  std::vector<double> score = model.base;
  for (const auto& [variable, value] : demographics) {
    auto it = model.modifiers.find({variable, value});
    if (it == model.modifiers.end()) continue;
    for (std::size_t k = 0; k < score.size(); ++k) score[k] += it->second[k];
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < score.size(); ++k) {
    if (!model.templates[k].empty()) top = std::max(top, score[k]);
  }
  std::vector<double> p(score.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < score.size(); ++k) {
    if (model.templates[k].empty()) continue;
    p[k] = std::exp(score[k] - top);
    total += p[k];
  }
  for (double& x : p) x /= total;
  return p;
}

std::uint64_t mock_draw_seed(std::uint64_t run_seed, std::uint64_t subject_id, std::string_view question_code) {
  return mix_seed(mix_seed(run_seed, subject_id), fnv1a64(question_code));
}

RawCompletion mock_complete(const GenerationRequest& req, const MockModelSpec& spec, std::uint64_t run_seed) {
  auto it = spec.questions.find(req.question_code);
  if (it == spec.questions.end()) {
    throw BackendError(BackendError::Kind::unknown_question, "mock spec has no question " + req.question_code);
  }
  const auto& model = it->second;
  const auto p = mock_choice_probabilities(model, req.demographics);

  Xoshiro256 rng(mock_draw_seed(run_seed, req.subject_id, req.question_code));
  const double u = rng.uniform01();
  std::size_t chosen = p.size();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    acc += p[k];
    chosen = k;
    if (u < acc) break;
  }

  RawCompletion out;
  out.text = model.templates[chosen];
  out.finish_reason = "stop";
  out.provider = Provider::mock;
  return out;
}

MockModelSpec fit_mock_spec(const SurveyCodebook& cb, std::span<const ResponseDistribution> references) {
  MockModelSpec spec;
  for (const auto& ref : references) {
    const auto& q = cb.question(ref.question_code);
    if (ref.size() != q.choice_count()) throw DataError("reference for " + q.code + " has the wrong choice count");
    MockQuestionModel m;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      m.base.push_back(std::log(std::max(ref.proportions[k], 1e-12)));
      m.templates.push_back(q.kind == QuestionKind::free_text_coded ? q.answer_choices[k].text
                                                                    : std::to_string(q.answer_choices[k].index));
    }
    spec.questions.emplace(q.code, std::move(m));
  }
  validate_mock_spec(spec);
  return spec;
}

}  // namespace rss
