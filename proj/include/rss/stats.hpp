#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rss {

enum class DistributionRole { reference, generated };

/// Distribution of answers over one question's choices. Plays both the
/// reference (survey) and generated (silicon cohort) roles.
struct ResponseDistribution {
  std::string question_code;
  std::vector<std::string> choice_labels;
  // Absent when only proportions are known; the homogeneity test needs counts.
  std::optional<std::vector<std::int64_t>> counts;
  std::vector<double> proportions;
  std::int64_t n_valid = 0;
  std::int64_t n_missing = 0;
  DistributionRole role = DistributionRole::reference;

  std::size_t size() const noexcept { return proportions.size(); }

  /// Throws DataError when every count is zero.
  static ResponseDistribution from_counts(std::string question_code, std::vector<std::string> labels,
                                          std::vector<std::int64_t> counts, std::int64_t n_missing,
                                          DistributionRole role);
  /// Normalizes the given weights; they need not sum to one.
  static ResponseDistribution from_proportions(std::string question_code, std::vector<std::string> labels,
                                               std::vector<double> weights, DistributionRole role);
};

struct HomogeneityResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool significant_at_05 = false;
  // Choice columns that survived the zero-total filter.
  std::vector<std::size_t> kept_columns;
};

/// Chi-square test of homogeneity on the 2xK contingency table built from
/// the two count vectors. Zero-total columns are dropped before testing.
HomogeneityResult chi_square_homogeneity(std::span<const std::int64_t> a, std::span<const std::int64_t> b);
HomogeneityResult chi_square_homogeneity(const ResponseDistribution& a, const ResponseDistribution& b);

/// Regularized lower/upper incomplete gamma functions P(a, x) and Q(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

/// Upper-tail probability of the chi-square law with `df` degrees of freedom.
/// Throws DataError for df < 1 and for negative or NaN statistics.
double chi_square_sf(double x, int df);

bool significant_at_05(double p_value) noexcept;

inline constexpr double kDefaultKlEpsilon = 1e-9;

struct KlResult {
  double value = 0.0;       // smoothed divergence
  double unsmoothed = 0.0;  // may be +inf when q has a zero cell under positive p
  bool smoothing_changed = false;  // |value - unsmoothed| > 1e-6
};

/// D(p || q) in nats after adding epsilon to every cell and renormalizing.
double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon = kDefaultKlEpsilon);
KlResult kl_divergence_detail(std::span<const double> p, std::span<const double> q,
                              double epsilon = kDefaultKlEpsilon);

/// Divergence of `generated` from `reference`, D(generated || reference).
double kl_divergence(const ResponseDistribution& generated, const ResponseDistribution& reference,
                     double epsilon = kDefaultKlEpsilon);
KlResult kl_divergence_detail(const ResponseDistribution& generated, const ResponseDistribution& reference,
                              double epsilon = kDefaultKlEpsilon);

/// Half the L1 distance between two probability vectors of equal length.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace rss
