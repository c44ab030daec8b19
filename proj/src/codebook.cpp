#include "rss/codebook.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rss/error.hpp"

namespace rss {

using nlohmann::json;

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return v;
}

std::size_t count_placeholders(std::string_view tmpl) {
  std::size_t n = 0;
  for (auto pos = tmpl.find("{}"); pos != std::string_view::npos; pos = tmpl.find("{}", pos + 2)) ++n;
  return n;
}

VariableKind variable_kind_from(const std::string& s) {
  if (s == "categorical") return VariableKind::categorical;
  if (s == "open_numeric") return VariableKind::open_numeric;
  throw ParseError("unknown variable kind '" + s + "'");
}

QuestionKind question_kind_from(const std::string& s) {
  if (s == "free_text_coded") return QuestionKind::free_text_coded;
  if (s == "enumerated_choice") return QuestionKind::enumerated_choice;
  throw ParseError("unknown question kind '" + s + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

DemographicVariable variable_from_json(const json& j) {
  DemographicVariable v;
  v.code = j.at("code").get<std::string>();
  v.display_name = get_or<std::string>(j, "display_name", v.code);
  v.kind = variable_kind_from(j.at("kind").get<std::string>());
  v.prompt_position = j.at("prompt_position").get<int>();
  v.numeric_template = get_or<std::string>(j, "numeric_template", "");
  for (const auto& c : get_or<json>(j, "choices", json::array())) {
    v.choices.push_back({c.at("value").get<std::string>(), get_or<std::string>(c, "label", ""),
                         get_or<std::string>(c, "phrase", "")});
  }
  return v;
}

QuestionSpec question_from_json(const json& j) {
  QuestionSpec q;
  q.code = j.at("code").get<std::string>();
  q.topic = get_or<std::string>(j, "topic", "");
  q.question_text = j.at("question_text").get<std::string>();
  for (const auto& a : j.at("answer_choices")) {
    q.answer_choices.push_back({a.at("index").get<int>(), a.at("text").get<std::string>()});
  }
  q.max_tokens = j.at("max_tokens").get<int>();
  if (auto it = j.find("date_prefix"); it != j.end() && !it->is_null()) q.date_prefix = it->get<std::string>();
  for (const auto& r : get_or<json>(j, "coding_rules", json::array())) {
    q.coding_rules.push_back({r.at("phrase").get<std::string>(), r.at("target_choice_index").get<int>()});
  }
  q.kind = question_kind_from(j.at("question_kind").get<std::string>());
  q.candidate_clauses = get_or<std::vector<std::string>>(j, "candidate_clauses", {});
  return q;
}

StratumSpec stratum_from_json(const json& j) {
  StratumSpec s;
  s.name = j.at("name").get<std::string>();
  s.alternate = get_or<bool>(j, "alternate", false);
  for (const auto& c : j.at("predicate")) {
    StratumConjunct conj;
    conj.variable_code = c.at("variable_code").get<std::string>();
    conj.values = get_or<std::vector<std::string>>(c, "values", {});
    if (auto it = c.find("range"); it != c.end()) {
      if (!it->is_array() || it->size() != 2) throw ParseError("stratum '" + s.name + "': range must be [min, max]");
      if (!(*it)[0].is_null()) conj.range_min = (*it)[0].get<std::int64_t>();
      if (!(*it)[1].is_null()) conj.range_max = (*it)[1].get<std::int64_t>();
    }
    s.predicate.push_back(std::move(conj));
  }
  return s;
}

json to_json(const DemographicVariable& v) {
  json j{{"code", v.code},
         {"display_name", v.display_name},
         {"kind", std::string(to_string(v.kind))},
         {"prompt_position", v.prompt_position}};
  if (!v.numeric_template.empty()) j["numeric_template"] = v.numeric_template;
  json choices = json::array();
  for (const auto& c : v.choices) choices.push_back({{"value", c.value}, {"label", c.label}, {"phrase", c.phrase}});
  j["choices"] = std::move(choices);
  return j;
}

json to_json(const QuestionSpec& q) {
  json j{{"code", q.code},
         {"topic", q.topic},
         {"question_kind", std::string(to_string(q.kind))},
         {"question_text", q.question_text},
         {"max_tokens", q.max_tokens}};
  json choices = json::array();
  for (const auto& a : q.answer_choices) choices.push_back({{"index", a.index}, {"text", a.text}});
  j["answer_choices"] = std::move(choices);
  if (q.date_prefix) j["date_prefix"] = *q.date_prefix;
  if (!q.candidate_clauses.empty()) j["candidate_clauses"] = q.candidate_clauses;
  if (!q.coding_rules.empty()) {
    json rules = json::array();
    for (const auto& r : q.coding_rules) rules.push_back({{"phrase", r.phrase}, {"target_choice_index", r.target_choice_index}});
    j["coding_rules"] = std::move(rules);
  }
  return j;
}

json to_json(const StratumSpec& s) {
  json pred = json::array();
  for (const auto& c : s.predicate) {
    json jc{{"variable_code", c.variable_code}};
    if (!c.values.empty()) jc["values"] = c.values;
    if (c.is_range()) {
      jc["range"] = json::array({c.range_min ? json(*c.range_min) : json(nullptr),
                                 c.range_max ? json(*c.range_max) : json(nullptr)});
    }
    pred.push_back(std::move(jc));
  }
  json j{{"name", s.name}, {"predicate", std::move(pred)}};
  if (s.alternate) j["alternate"] = true;
  return j;
}

}  // namespace

std::string_view to_string(VariableKind kind) {
  return kind == VariableKind::categorical ? "categorical" : "open_numeric";
}

std::string_view to_string(QuestionKind kind) {
  return kind == QuestionKind::free_text_coded ? "free_text_coded" : "enumerated_choice";
}

const Choice* DemographicVariable::find_choice(std::string_view value) const {
  auto it = std::find_if(choices.begin(), choices.end(), [&](const Choice& c) { return c.value == value; });
  return it == choices.end() ? nullptr : &*it;
}

bool StratumConjunct::accepts(std::string_view value) const {
  if (is_range()) {
    auto v = parse_int(value);
    if (!v) return false;
    if (range_min && *v < *range_min) return false;
    if (range_max && *v > *range_max) return false;
    return true;
  }
  return std::find(values.begin(), values.end(), value) != values.end();
}

const DemographicVariable* SurveyCodebook::find_variable(std::string_view code) const {
  auto it = std::find_if(variables.begin(), variables.end(), [&](const auto& v) { return v.code == code; });
  return it == variables.end() ? nullptr : &*it;
}

const QuestionSpec* SurveyCodebook::find_question(std::string_view code) const {
  auto it = std::find_if(questions.begin(), questions.end(), [&](const auto& q) { return q.code == code; });
  return it == questions.end() ? nullptr : &*it;
}

const StratumSpec* SurveyCodebook::find_stratum(std::string_view name) const {
  auto it = std::find_if(strata.begin(), strata.end(), [&](const auto& s) { return s.name == name; });
  return it == strata.end() ? nullptr : &*it;
}

const DemographicVariable& SurveyCodebook::variable(std::string_view code) const {
  if (const auto* v = find_variable(code)) return *v;
  throw ValidationError("unknown variable '" + std::string(code) + "'");
}

const QuestionSpec& SurveyCodebook::question(std::string_view code) const {
  if (const auto* q = find_question(code)) return *q;
  throw ValidationError("unknown question '" + std::string(code) + "'");
}

const StratumSpec& SurveyCodebook::stratum(std::string_view name) const {
  if (const auto* s = find_stratum(name)) return *s;
  throw ValidationError("unknown stratum '" + std::string(name) + "'");
}

std::vector<const DemographicVariable*> SurveyCodebook::prompt_order() const {
  std::vector<const DemographicVariable*> out;
  out.reserve(variables.size());
  for (const auto& v : variables) out.push_back(&v);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->prompt_position < b->prompt_position; });
  return out;
}

std::vector<const StratumSpec*> SurveyCodebook::default_strata() const {
  std::vector<const StratumSpec*> out;
  for (const auto& s : strata) {
    if (!s.alternate) out.push_back(&s);
  }
  return out;
}

std::string to_string(const Violation& v) {
  return v.subject + " [" + v.field + "]: " + v.message;
}

std::vector<Violation> validate_codebook(const SurveyCodebook& cb) {
  std::vector<Violation> out;
  auto add = [&](std::string subject, std::string field, std::string message) {
    out.push_back({std::move(subject), std::move(field), std::move(message)});
  };

  std::set<std::string> variable_codes;
  std::set<int> positions;
  for (const auto& v : cb.variables) {
    if (v.code.empty()) add("<variable>", "code", "empty variable code");
    if (!variable_codes.insert(v.code).second) add(v.code, "code", "duplicate variable code");
    if (v.prompt_position < 0) add(v.code, "prompt_position", "must be >= 0");
    if (!positions.insert(v.prompt_position).second) add(v.code, "prompt_position", "duplicate prompt_position");

    std::set<std::string> values;
    for (const auto& c : v.choices) {
      if (!values.insert(c.value).second) add(v.code, "choices", "duplicate choice value '" + c.value + "'");
      if (v.kind == VariableKind::categorical && c.phrase.empty()) {
        add(v.code, "phrase", "choice '" + c.value + "' has an empty phrase");
      }
    }
    if (v.kind == VariableKind::categorical && v.choices.size() < 2) {
      add(v.code, "choices", "categorical variable needs at least 2 choices");
    }
    if (v.kind == VariableKind::open_numeric && count_placeholders(v.numeric_template) != 1) {
      add(v.code, "numeric_template", "open_numeric template must contain exactly one {} placeholder");
    }
  }

  std::set<std::string> question_codes;
  for (const auto& q : cb.questions) {
    if (!question_codes.insert(q.code).second) add(q.code, "code", "duplicate question code");
    if (q.question_text.empty()) add(q.code, "question_text", "empty question text");
    if (q.max_tokens < 1) add(q.code, "max_tokens", "max_tokens must be >= 1");
    if (q.answer_choices.empty()) add(q.code, "answer_choices", "no answer choices");
    for (std::size_t i = 0; i < q.answer_choices.size(); ++i) {
      if (q.answer_choices[i].index != static_cast<int>(i) + 1) {
        add(q.code, "answer_choices", "answer choice indices must be 1..K contiguous");
        break;
      }
    }
    for (const auto& r : q.coding_rules) {
      if (!q.has_choice(r.target_choice_index)) {
        add(q.code, "coding_rules",
            "rule '" + r.phrase + "' targets missing choice " + std::to_string(r.target_choice_index));
      }
      if (r.phrase.empty()) add(q.code, "coding_rules", "empty coding phrase");
    }
    const bool has_placeholder = q.question_text.find("{candidates}") != std::string::npos;
    if (has_placeholder && q.candidate_clauses.empty()) {
      add(q.code, "candidate_clauses", "{candidates} placeholder without candidate clauses");
    }
  }

  std::set<std::string> stratum_names;
  for (const auto& s : cb.strata) {
    if (!stratum_names.insert(s.name).second) add(s.name, "name", "duplicate stratum name");
    if (s.predicate.empty()) add(s.name, "predicate", "empty predicate");
    for (const auto& c : s.predicate) {
      const auto* v = cb.find_variable(c.variable_code);
      if (!v) {
        add(s.name, "predicate", "unknown variable '" + c.variable_code + "'");
        continue;
      }
      if (c.is_range()) {
        if (v->kind != VariableKind::open_numeric) add(s.name, "predicate", "range on categorical variable " + v->code);
        if (c.range_min && c.range_max && *c.range_min > *c.range_max) add(s.name, "predicate", "empty range");
      } else {
        if (c.values.empty()) add(s.name, "predicate", "conjunct on " + v->code + " accepts no values");
        for (const auto& value : c.values) {
          const bool ok = v->kind == VariableKind::categorical ? v->find_choice(value) != nullptr
                                                               : parse_int(value).has_value();
          if (!ok) add(s.name, "predicate", "value '" + value + "' not in " + v->code);
        }
      }
    }
  }
  return out;
}

SurveyCodebook parse_codebook(std::string_view text) {
  SurveyCodebook cb;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw ParseError("codebook must be an object");
    for (const auto& v : doc.at("variables")) cb.variables.push_back(variable_from_json(v));
    for (const auto& q : doc.at("questions")) cb.questions.push_back(question_from_json(q));
    for (const auto& s : get_or<json>(doc, "strata", json::array())) cb.strata.push_back(stratum_from_json(s));
    cb.metadata = get_or<std::map<std::string, std::string>>(doc, "metadata", {});
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed codebook: ") + e.what());
  }
  if (auto violations = validate_codebook(cb); !violations.empty()) {
    std::string msg = "invalid codebook: " + to_string(violations.front());
    if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw ValidationError(msg);
  }
  return cb;
}

SurveyCodebook load_codebook(std::istream& source) {
  std::ostringstream buf;
  buf << source.rdbuf();
  return parse_codebook(buf.str());
}

SurveyCodebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open codebook " + path.string());
  return load_codebook(in);
}

std::string serialize_codebook(const SurveyCodebook& cb) {
  json doc;
  doc["metadata"] = cb.metadata;
  doc["variables"] = json::array();
  for (const auto& v : cb.variables) doc["variables"].push_back(to_json(v));
  doc["questions"] = json::array();
  for (const auto& q : cb.questions) doc["questions"].push_back(to_json(q));
  doc["strata"] = json::array();
  for (const auto& s : cb.strata) doc["strata"].push_back(to_json(s));
  return doc.dump(2) + "\n";
}

}  // namespace rss
