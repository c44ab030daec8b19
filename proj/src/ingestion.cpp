#include "rss/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

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

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

enum class ColumnRole { id, variable, question, unknown };

struct Column {
  ColumnRole role = ColumnRole::unknown;
  const DemographicVariable* variable = nullptr;
  const QuestionSpec* question = nullptr;
};

}  // namespace

LoadOptions default_load_options(const SurveyCodebook& cb) {
  LoadOptions opts;
  auto it = cb.metadata.find("missing_sentinels");
  if (it == cb.metadata.end()) {
    for (std::int64_t v = -1; v >= -9; --v) opts.missing_sentinels.insert(v);
    return opts;
  }
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = parse_int(trim(item));
    if (!v) throw ParseError("codebook missing_sentinels entry '" + item + "' is not an integer");
    opts.missing_sentinels.insert(*v);
  }
  return opts;
}

RespondentTable load_respondents(std::istream& source, const SurveyCodebook& cb, const LoadOptions& options) {
  RespondentTable table;
  std::vector<std::string> header;
  if (!csv::read_row(source, header, options.delimiter)) throw ParseError("respondent file is empty");

  std::vector<Column> columns(header.size());
  bool have_id = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name{trim(header[i])};
    if (name == options.id_column) {
      columns[i].role = ColumnRole::id;
      have_id = true;
    } else if (const auto* v = cb.find_variable(name)) {
      columns[i] = {ColumnRole::variable, v, nullptr};
    } else if (const auto* q = cb.find_question(name)) {
      columns[i] = {ColumnRole::question, nullptr, q};
    } else {
      table.unknown_columns.push_back(name);
    }
  }
  if (!have_id) throw ParseError("respondent file has no '" + options.id_column + "' column");
  for (const auto& v : cb.variables) {
    if (std::none_of(columns.begin(), columns.end(), [&](const Column& c) { return c.variable == &v; })) {
      throw ParseError("respondent file lacks variable column " + v.code);
    }
  }
  for (const auto& q : cb.questions) {
    if (std::none_of(columns.begin(), columns.end(), [&](const Column& c) { return c.question == &q; })) {
      throw ParseError("respondent file lacks question column " + q.code);
    }
  }

  std::vector<std::string> row;
  std::size_t line = 1;
  while (csv::read_row(source, row, options.delimiter)) {
    ++line;
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    if (row.size() != header.size()) {
      throw ParseError("line " + std::to_string(line) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(row.size()));
    }
    RespondentRecord rec;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto cell = trim(row[i]);
      const auto& col = columns[i];
      if (col.role == ColumnRole::id) {
        rec.record_id = std::string(cell);
        continue;
      }
      if (col.role == ColumnRole::unknown || cell.empty()) continue;

      const auto as_int = parse_int(cell);
      const bool sentinel = as_int && options.missing_sentinels.count(*as_int) > 0;

      if (col.role == ColumnRole::variable) {
        const auto& var = *col.variable;
        if (sentinel) {
          ++table.missing_mapped_cells;
        } else if (var.kind == VariableKind::open_numeric) {
          if (as_int && *as_int >= 0) {
            rec.demographics.emplace(var.code, std::to_string(*as_int));
          } else {
            ++table.missing_mapped_cells;
          }
        } else if (var.find_choice(cell)) {
          rec.demographics.emplace(var.code, std::string(cell));
        } else {
          ++table.missing_mapped_cells;
        }
      } else {
        const auto& q = *col.question;
        std::optional<int> answer;
        if (!sentinel && as_int && q.has_choice(static_cast<int>(*as_int))) {
          answer = static_cast<int>(*as_int);
        } else {
          ++table.missing_mapped_cells;
        }
        rec.responses.emplace(q.code, answer);
      }
    }
    if (rec.record_id.empty()) throw ParseError("line " + std::to_string(line) + ": empty record id");
    table.records.push_back(std::move(rec));
  }
  return table;
}

RespondentTable load_respondents(std::istream& source, const SurveyCodebook& cb) {
  return load_respondents(source, cb, default_load_options(cb));
}

RespondentTable load_respondents(const std::filesystem::path& path, const SurveyCodebook& cb) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open respondent file " + path.string());
  return load_respondents(in, cb);
}

double MarginalDistribution::probability_of(const std::string& value) const {
  auto it = std::find(support.begin(), support.end(), value);
  return it == support.end() ? 0.0 : probabilities[static_cast<std::size_t>(it - support.begin())];
}

const MarginalDistribution& MarginalSet::at(const std::string& code) const {
  auto it = marginals.find(code);
  if (it == marginals.end()) throw DataError("no marginal for variable " + code);
  return it->second;
}

MarginalDistribution marginal_distribution(std::span<const RespondentRecord> records, const std::string& variable_code,
                                           const SurveyCodebook& cb) {
  const auto& var = cb.variable(variable_code);
  MarginalDistribution m;
  m.variable_code = variable_code;
  m.n_total = records.size();

  std::map<std::string, std::size_t> counts;
  std::map<std::int64_t, std::size_t> numeric_counts;
  for (const auto& r : records) {
    const auto* value = r.demographic(variable_code);
    if (!value) continue;
    ++m.n_observed;
    if (var.kind == VariableKind::open_numeric) {
      auto v = parse_int(*value);
      if (!v) throw DataError("non-numeric value '" + *value + "' for " + variable_code);
      ++numeric_counts[*v];
    } else {
      ++counts[*value];
    }
  }
  if (m.n_observed == 0) throw DataError("variable " + variable_code + " is missing for every record");

  const double n = static_cast<double>(m.n_observed);
  if (var.kind == VariableKind::open_numeric) {
    for (const auto& [v, c] : numeric_counts) {
      m.support.push_back(std::to_string(v));
      m.probabilities.push_back(static_cast<double>(c) / n);
    }
  } else {
    for (const auto& choice : var.choices) {
      m.support.push_back(choice.value);
      auto it = counts.find(choice.value);
      m.probabilities.push_back(it == counts.end() ? 0.0 : static_cast<double>(it->second) / n);
    }
  }
  m.missing_rate = m.n_total == 0 ? 0.0
                                  : static_cast<double>(m.n_total - m.n_observed) / static_cast<double>(m.n_total);
  return m;
}

MarginalSet marginal_set(std::span<const RespondentRecord> records, const SurveyCodebook& cb) {
  MarginalSet set;
  set.source_n = records.size();
  for (const auto& v : cb.variables) set.marginals.emplace(v.code, marginal_distribution(records, v.code, cb));
  return set;
}

ResponseDistribution reference_response_distribution(std::span<const RespondentRecord> records,
                                                     const std::string& question_code, const SurveyCodebook& cb) {
  const auto& q = cb.question(question_code);
  std::vector<std::int64_t> counts(q.choice_count(), 0);
  std::int64_t n_missing = 0;
  for (const auto& r : records) {
    auto it = r.responses.find(question_code);
    if (it == r.responses.end()) continue;
    if (it->second && q.has_choice(*it->second)) {
      ++counts[static_cast<std::size_t>(*it->second - 1)];
    } else {
      ++n_missing;
    }
  }
  std::vector<std::string> labels;
  for (const auto& a : q.answer_choices) labels.push_back(a.text);
  return ResponseDistribution::from_counts(question_code, std::move(labels), std::move(counts), n_missing,
                                           DistributionRole::reference);
}

bool matches(const RespondentRecord& record, const StratumSpec& stratum) {
  for (const auto& conj : stratum.predicate) {
    const auto* value = record.demographic(conj.variable_code);
    if (!value || !conj.accepts(*value)) return false;
  }
  return true;
}

std::vector<RespondentRecord> stratify(std::span<const RespondentRecord> records, const StratumSpec& stratum) {
  std::vector<RespondentRecord> out;
  for (const auto& r : records) {
    if (matches(r, stratum)) out.push_back(r);
  }
  return out;
}

}  // namespace rss
