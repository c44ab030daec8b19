#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rss/codebook.hpp"
#include "rss/ingestion.hpp"

namespace rss {

/// One synthetic respondent. Absent variables were sampled as missing and
/// produce no prompt sentence.
struct SiliconSubject {
  std::uint64_t subject_id = 0;
  std::map<std::string, std::string> assignment;
  std::uint64_t run_seed = 0;
  std::uint64_t subject_index = 0;

  const std::string* value(const std::string& code) const {
    auto it = assignment.find(code);
    return it == assignment.end() ? nullptr : &it->second;
  }

  bool operator==(const SiliconSubject&) const = default;
};

struct CohortPlan {
  std::size_t n = 0;
  std::uint64_t run_seed = 0;
  const MarginalSet* marginal_set = nullptr;
  // When false, every variable is always drawn from its support.
  bool reproduce_missing = true;
};

/// Draws plan.n subjects. Subject i uses its own stream seeded by
/// mix_seed(run_seed, i); variables are visited in code order and each
/// consumes exactly two uniforms (missingness, then value), so the cohort
/// does not depend on evaluation order or thread count.
std::vector<SiliconSubject> sample_subjects(const CohortPlan& plan);

/// floor(base_n * fraction), at least 1. Throws ConfigError for fractions
/// outside (0, 1] and for base_n == 0.
std::vector<std::size_t> downsample_sizes(std::size_t base_n, std::span<const double> fractions);

/// Marginals over the stratum subset; variables missing for the whole
/// subset get missing_rate 1 and an empty support.
MarginalSet stratum_marginals(std::span<const RespondentRecord> stratum_records, const SurveyCodebook& cb);

/// Cohort drawn from the stratum's own marginals; n defaults to the
/// stratum's record count. Throws DataError for an empty stratum.
std::vector<SiliconSubject> stratified_cohort(std::span<const RespondentRecord> records, const StratumSpec& stratum,
                                              const SurveyCodebook& cb, std::optional<std::size_t> n,
                                              std::uint64_t run_seed);

/// Audit dump: subject_id then one column per variable, empty = missing.
void write_cohort_csv(std::ostream& out, std::span<const SiliconSubject> cohort, const SurveyCodebook& cb);

}  // namespace rss
