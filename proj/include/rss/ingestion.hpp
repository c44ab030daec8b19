#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rss/codebook.hpp"
#include "rss/stats.hpp"

namespace rss {

struct RespondentRecord {
  std::string record_id;
  // Absent key: missing or refused.
  std::map<std::string, std::string> demographics;
  // Key present when the cell was non-empty; nullopt when that entry was a
  // sentinel or an out-of-set answer (e.g. a third-party vote).
  std::map<std::string, std::optional<int>> responses;

  const std::string* demographic(const std::string& code) const {
    auto it = demographics.find(code);
    return it == demographics.end() ? nullptr : &it->second;
  }
};

struct LoadOptions {
  std::set<std::int64_t> missing_sentinels;
  char delimiter = ',';
  std::string id_column = "id";
};

/// Sentinels come from the codebook's "missing_sentinels" metadata
/// (comma-separated integers); defaults to -1..-9.
LoadOptions default_load_options(const SurveyCodebook& cb);

struct RespondentTable {
  std::vector<RespondentRecord> records;
  std::vector<std::string> unknown_columns;  // ignored
  std::size_t missing_mapped_cells = 0;      // sentinel or out-of-codebook cells turned into missing
};

RespondentTable load_respondents(std::istream& source, const SurveyCodebook& cb, const LoadOptions& options);
RespondentTable load_respondents(std::istream& source, const SurveyCodebook& cb);
RespondentTable load_respondents(const std::filesystem::path& path, const SurveyCodebook& cb);

struct MarginalDistribution {
  std::string variable_code;
  std::vector<std::string> support;
  std::vector<double> probabilities;
  double missing_rate = 0.0;
  std::size_t n_observed = 0;  // non-missing entries
  std::size_t n_total = 0;

  double probability_of(const std::string& value) const;
};

struct MarginalSet {
  std::map<std::string, MarginalDistribution> marginals;
  std::size_t source_n = 0;

  const MarginalDistribution& at(const std::string& code) const;
};

/// Empirical distribution of one variable over the non-missing entries.
/// Categorical support follows codebook choice order (zero-frequency choices
/// included); open-numeric support is the sorted set of observed integers.
/// Throws DataError when every entry is missing.
MarginalDistribution marginal_distribution(std::span<const RespondentRecord> records, const std::string& variable_code,
                                           const SurveyCodebook& cb);

MarginalSet marginal_set(std::span<const RespondentRecord> records, const SurveyCodebook& cb);

/// Reference answer distribution. Throws DataError when no respondent gave a
/// valid answer.
ResponseDistribution reference_response_distribution(std::span<const RespondentRecord> records,
                                                     const std::string& question_code, const SurveyCodebook& cb);

bool matches(const RespondentRecord& record, const StratumSpec& stratum);

std::vector<RespondentRecord> stratify(std::span<const RespondentRecord> records, const StratumSpec& stratum);

}  // namespace rss
