#include "rss/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rss/error.hpp"

namespace rss {

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kTiny = 1e-300;
constexpr double kRelEps = 1e-16;

// Series expansion of P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxIterations; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kRelEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz); used for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kRelEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void require_same_support(const ResponseDistribution& a, const ResponseDistribution& b) {
  if (a.question_code != b.question_code) {
    throw DataError("distributions belong to different questions: " + a.question_code + " vs " + b.question_code);
  }
  if (a.size() != b.size()) {
    throw DataError("distributions for " + a.question_code + " have different numbers of choices");
  }
}

}  // namespace

ResponseDistribution ResponseDistribution::from_counts(std::string question_code, std::vector<std::string> labels,
                                                       std::vector<std::int64_t> counts, std::int64_t n_missing,
                                                       DistributionRole role) {
  ResponseDistribution d;
  d.question_code = std::move(question_code);
  d.choice_labels = std::move(labels);
  d.n_valid = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  d.n_missing = n_missing;
  d.role = role;
  if (d.n_valid <= 0) throw DataError("no valid responses for " + d.question_code);
  d.proportions.reserve(counts.size());
  for (auto c : counts) {
    if (c < 0) throw DataError("negative count for " + d.question_code);
    d.proportions.push_back(static_cast<double>(c) / static_cast<double>(d.n_valid));
  }
  d.counts = std::move(counts);
  return d;
}

ResponseDistribution ResponseDistribution::from_proportions(std::string question_code,
                                                            std::vector<std::string> labels,
                                                            std::vector<double> weights, DistributionRole role) {
  ResponseDistribution d;
  d.question_code = std::move(question_code);
  d.choice_labels = std::move(labels);
  d.role = role;
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("invalid proportion for " + d.question_code);
    total += w;
  }
  if (total <= 0.0) throw DataError("proportions for " + d.question_code + " sum to zero");
  for (double& w : weights) w /= total;
  d.proportions = std::move(weights);
  return d;
}

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0) throw DataError("incomplete gamma needs a > 0");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (a <= 0.0) throw DataError("incomplete gamma needs a > 0");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_continued_fraction(a, x);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw DataError("chi-square needs df >= 1");
  if (std::isnan(x)) throw DataError("chi-square statistic is NaN");
  if (x < 0.0) throw DataError("chi-square statistic is negative");
  if (x == 0.0) return 1.0;
  const double q = regularized_gamma_q(0.5 * df, 0.5 * x);
  return std::clamp(q, 0.0, 1.0);
}

bool significant_at_05(double p_value) noexcept { return p_value < 0.05; }

HomogeneityResult chi_square_homogeneity(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.size() != b.size()) throw DataError("count vectors differ in length");
  HomogeneityResult out;
  double row_a = 0.0;
  double row_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] < 0 || b[k] < 0) throw DataError("negative count in contingency table");
    if (a[k] + b[k] > 0) out.kept_columns.push_back(k);
    row_a += static_cast<double>(a[k]);
    row_b += static_cast<double>(b[k]);
  }
  if (row_a <= 0.0 || row_b <= 0.0) throw DataError("contingency table has an empty row");
  if (out.kept_columns.size() < 2) throw DataError("fewer than 2 non-empty answer columns");

  const double total = row_a + row_b;
  double stat = 0.0;
  for (auto k : out.kept_columns) {
    const double col = static_cast<double>(a[k] + b[k]);
    const double ea = row_a * col / total;
    const double eb = row_b * col / total;
    const double da = static_cast<double>(a[k]) - ea;
    const double db = static_cast<double>(b[k]) - eb;
    stat += da * da / ea + db * db / eb;
  }
  out.statistic = stat;
  out.df = static_cast<int>(out.kept_columns.size()) - 1;
  out.p_value = chi_square_sf(stat, out.df);
  out.significant_at_05 = significant_at_05(out.p_value);
  return out;
}

HomogeneityResult chi_square_homogeneity(const ResponseDistribution& a, const ResponseDistribution& b) {
  require_same_support(a, b);
  if (!a.counts || !b.counts) {
    throw DataError("homogeneity test for " + a.question_code + " needs raw counts, not proportions");
  }
  return chi_square_homogeneity(*a.counts, *b.counts);
}

KlResult kl_divergence_detail(std::span<const double> p, std::span<const double> q, double epsilon) {
  if (p.size() != q.size() || p.empty()) throw DataError("KL-divergence needs equal, non-empty supports");
  if (!(epsilon >= 0.0)) throw DataError("KL smoothing epsilon must be >= 0");

  const double sp = std::accumulate(p.begin(), p.end(), 0.0) + epsilon * static_cast<double>(p.size());
  const double sq = std::accumulate(q.begin(), q.end(), 0.0) + epsilon * static_cast<double>(q.size());
  const double rp = std::accumulate(p.begin(), p.end(), 0.0);
  const double rq = std::accumulate(q.begin(), q.end(), 0.0);
  if (sp <= 0.0 || sq <= 0.0) throw DataError("KL-divergence of an all-zero distribution");

  KlResult out;
  double smoothed = 0.0;
  double raw = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + epsilon) / sp;
    const double qi = (q[i] + epsilon) / sq;
    if (pi > 0.0) smoothed += pi * std::log(pi / qi);

    const double pr = p[i] / rp;
    const double qr = q[i] / rq;
    if (pr > 0.0) raw += qr > 0.0 ? pr * std::log(pr / qr) : std::numeric_limits<double>::infinity();
  }
  out.value = std::max(0.0, smoothed);
  out.unsmoothed = std::max(0.0, raw);
  out.smoothing_changed = !std::isfinite(out.unsmoothed) || std::abs(out.value - out.unsmoothed) > 1e-6;
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon) {
  return kl_divergence_detail(p, q, epsilon).value;
}

KlResult kl_divergence_detail(const ResponseDistribution& generated, const ResponseDistribution& reference,
                              double epsilon) {
  require_same_support(generated, reference);
  return kl_divergence_detail(generated.proportions, reference.proportions, epsilon);
}

double kl_divergence(const ResponseDistribution& generated, const ResponseDistribution& reference, double epsilon) {
  return kl_divergence_detail(generated, reference, epsilon).value;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DataError("total variation needs equal supports");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace rss
