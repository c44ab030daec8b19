#include "rss/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rss/csv.hpp"
#include "rss/error.hpp"
#include "rss/rng.hpp"

namespace rss {

namespace {

struct PreparedMarginal {
  const std::string* code;
  const MarginalDistribution* marginal;
  std::vector<double> cumulative;
  std::size_t last_positive = 0;
};

std::vector<PreparedMarginal> prepare(const MarginalSet& set) {
  std::vector<PreparedMarginal> out;
  out.reserve(set.marginals.size());
  for (const auto& [code, m] : set.marginals) {
    PreparedMarginal p{&code, &m, {}, 0};
    double acc = 0.0;
    for (std::size_t i = 0; i < m.probabilities.size(); ++i) {
      acc += m.probabilities[i];
      p.cumulative.push_back(acc);
      if (m.probabilities[i] > 0.0) p.last_positive = i;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<SiliconSubject> sample_subjects(const CohortPlan& plan) {
  if (!plan.marginal_set) throw ConfigError("cohort plan has no marginal set");
  if (plan.n < 1) throw ConfigError("cohort size must be >= 1");
  const auto prepared = prepare(*plan.marginal_set);

  std::vector<SiliconSubject> cohort(plan.n);
  for (std::size_t i = 0; i < plan.n; ++i) {
    auto& s = cohort[i];
    s.subject_id = i;
    s.subject_index = i;
    s.run_seed = plan.run_seed;
    Xoshiro256 rng(mix_seed(plan.run_seed, i));
    for (const auto& p : prepared) {
      const double u_missing = rng.uniform01();
      const double u_value = rng.uniform01();
      if (p.marginal->support.empty()) continue;
      if (plan.reproduce_missing && u_missing < p.marginal->missing_rate) continue;
      auto it = std::upper_bound(p.cumulative.begin(), p.cumulative.end(), u_value);
      auto idx = static_cast<std::size_t>(it - p.cumulative.begin());
      // Rounding can leave the final cumulative just below 1.
      if (idx >= p.cumulative.size()) idx = p.last_positive;
      s.assignment.emplace(*p.code, p.marginal->support[idx]);
    }
  }
  return cohort;
}

std::vector<std::size_t> downsample_sizes(std::size_t base_n, std::span<const double> fractions) {
  if (base_n < 1) throw ConfigError("down-sampling base size must be >= 1");
  std::vector<std::size_t> out;
  out.reserve(fractions.size());
  for (double f : fractions) {
    if (!(f > 0.0) || f > 1.0) throw ConfigError("down-sampling fraction must lie in (0, 1]");
    // The tolerance absorbs binary error in fractions like 0.29 (29/100).
    const double scaled = static_cast<double>(base_n) * f;
    auto size = static_cast<std::size_t>(std::floor(scaled + 1e-9 * std::max(1.0, scaled)));
    out.push_back(std::max<std::size_t>(1, std::min(size, base_n)));
  }
  return out;
}

MarginalSet stratum_marginals(std::span<const RespondentRecord> stratum_records, const SurveyCodebook& cb) {
  MarginalSet set;
  set.source_n = stratum_records.size();
  for (const auto& v : cb.variables) {
    const bool any = std::any_of(stratum_records.begin(), stratum_records.end(),
                                 [&](const RespondentRecord& r) { return r.demographic(v.code) != nullptr; });
    if (any) {
      set.marginals.emplace(v.code, marginal_distribution(stratum_records, v.code, cb));
    } else {
      MarginalDistribution m;
      m.variable_code = v.code;
      m.missing_rate = 1.0;
      m.n_total = stratum_records.size();
      set.marginals.emplace(v.code, std::move(m));
    }
  }
  return set;
}

std::vector<SiliconSubject> stratified_cohort(std::span<const RespondentRecord> records, const StratumSpec& stratum,
                                              const SurveyCodebook& cb, std::optional<std::size_t> n,
                                              std::uint64_t run_seed) {
  const auto subset = stratify(records, stratum);
  if (subset.empty()) throw DataError("stratum '" + stratum.name + "' has no records");
  const auto marginals = stratum_marginals(subset, cb);
  return sample_subjects({n.value_or(subset.size()), run_seed, &marginals, true});
}

void write_cohort_csv(std::ostream& out, std::span<const SiliconSubject> cohort, const SurveyCodebook& cb) {
  std::vector<std::string> row{"subject_id"};
  for (const auto& v : cb.variables) row.push_back(v.code);
  csv::write_row(out, row);
  for (const auto& s : cohort) {
    row.assign(1, std::to_string(s.subject_id));
    for (const auto& v : cb.variables) {
      const auto* value = s.value(v.code);
      row.push_back(value ? *value : std::string{});
    }
    csv::write_row(out, row);
  }
}

}  // namespace rss
