#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rss/codebook.hpp"
#include "rss/ingestion.hpp"
#include "rss/sampler.hpp"

namespace rss::test {

inline std::filesystem::path source_dir() { return RSS_SOURCE_DIR; }
inline std::filesystem::path codebook_path() { return source_dir() / "data" / "anes2020.codebook"; }
inline std::filesystem::path fixture_path() { return source_dir() / "data" / "fixture_anes2020.csv"; }
inline std::filesystem::path population_spec_path() { return source_dir() / "data" / "fixture_population.mock.json"; }

inline const SurveyCodebook& codebook() {
  static const SurveyCodebook cb = load_codebook(codebook_path());
  return cb;
}

inline const std::vector<RespondentRecord>& fixture_records() {
  static const std::vector<RespondentRecord> records = load_respondents(fixture_path(), codebook()).records;
  return records;
}

inline SiliconSubject subject(std::map<std::string, std::string> assignment, std::uint64_t id = 0) {
  SiliconSubject s;
  s.subject_id = id;
  s.subject_index = id;
  s.assignment = std::move(assignment);
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rss_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Empirical cell frequencies of one variable over a cohort, including the
// missing cell, next to the marginal's own cell probabilities.
struct CellComparison {
  std::vector<double> expected;
  std::vector<double> observed;
};

inline CellComparison compare_cells(const std::vector<SiliconSubject>& cohort, const MarginalDistribution& m) {
  CellComparison c;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < m.support.size(); ++i) {
    index[m.support[i]] = i;
    c.expected.push_back((1.0 - m.missing_rate) * m.probabilities[i]);
  }
  c.expected.push_back(m.missing_rate);
  c.observed.assign(c.expected.size(), 0.0);
  for (const auto& s : cohort) {
    const auto* v = s.value(m.variable_code);
    c.observed[v ? index.at(*v) : m.support.size()] += 1.0;
  }
  for (auto& o : c.observed) o /= static_cast<double>(cohort.size());
  return c;
}

// Expected total-variation distance of an n-sample multinomial from its own
// law, from the normal approximation E|X/n - p| = sqrt(2 p (1 - p) / (pi n)).
inline double expected_sampling_tv(const std::vector<double>& p, std::size_t n) {
  double total = 0.0;
  for (double pi : p) total += std::sqrt(2.0 * pi * (1.0 - pi) / (M_PI * static_cast<double>(n)));
  return total / 2.0;
}

}  // namespace rss::test
