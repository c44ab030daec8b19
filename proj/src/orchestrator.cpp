#include "rss/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "rss/cache.hpp"
#include "rss/error.hpp"
#include "rss/promptgen.hpp"
#include "rss/report.hpp"
#include "rss/rng.hpp"
#include "rss/version.hpp"
#include "rss/wire.hpp"

namespace rss {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string default_single_question(const SurveyCodebook& cb) {
  if (auto it = cb.metadata.find("election_question"); it != cb.metadata.end()) return it->second;
  for (const auto& q : cb.questions) {
    if (q.kind == QuestionKind::free_text_coded) return q.code;
  }
  if (cb.questions.empty()) throw ConfigError("codebook has no questions");
  return cb.questions.front().code;
}

std::string fraction_key(double f) { return fmt::format("fraction:{:.6f}", f); }

std::string sanitize(std::string_view key) {
  std::string out;
  for (char c : key) {
    const auto u = static_cast<unsigned char>(c);
    out.push_back(std::isalnum(u) || c == '-' || c == '.' ? c : '_');
  }
  return out;
}

}  // namespace

std::uint64_t row_seed(std::uint64_t run_seed, ExperimentKind kind, const std::string& row_key) {
  return mix_seed(mix_seed(run_seed, fnv1a64(to_string(kind))), fnv1a64(row_key));
}

ReportSummary summarize(const std::vector<ReportRow>& rows) {
  ReportSummary s;
  std::vector<const ReportRow*> live;
  for (const auto& r : rows) {
    if (!r.skipped) live.push_back(&r);
  }
  s.rows = live.size();
  if (live.empty()) return s;
  double kl_total = 0.0;
  for (const auto* r : live) {
    kl_total += r->kl;
    if (r->significant) ++s.significant_rows;
  }
  s.mean_kl = kl_total / static_cast<double>(live.size());

  const std::size_t k = live.front()->generated_rates.size();
  const bool same_shape = std::all_of(live.begin(), live.end(), [&](const ReportRow* r) {
    return r->generated_rates.size() == k && r->question_code == live.front()->question_code;
  });
  if (!same_shape) return s;
  s.mean_rate.assign(k, 0.0);
  s.sd_rate.assign(k, 0.0);
  const double n = static_cast<double>(live.size());
  for (const auto* r : live) {
    for (std::size_t i = 0; i < k; ++i) s.mean_rate[i] += r->generated_rates[i] / n;
  }
  if (live.size() > 1) {
    for (const auto* r : live) {
      for (std::size_t i = 0; i < k; ++i) {
        const double d = r->generated_rates[i] - s.mean_rate[i];
        s.sd_rate[i] += d * d / (n - 1.0);
      }
    }
    for (double& v : s.sd_rate) v = std::sqrt(v);
  }
  return s;
}

ExperimentInputs load_inputs(const ExperimentConfig& cfg) {
  ExperimentInputs in;
  in.codebook = load_codebook(cfg.codebook_path);
  in.records = load_respondents(cfg.data_path, in.codebook).records;
  if (cfg.backend == BackendKind::mock && cfg.mock_spec_path) in.mock_spec = load_mock_spec(*cfg.mock_spec_path);
  return in;
}

struct ExperimentRunner::RowPlan {
  std::string key;
  std::string label;
  std::optional<std::size_t> repetition;
  std::optional<double> fraction;
  std::string stratum;
  const QuestionSpec* question = nullptr;
  std::size_t cohort_size = 0;
  std::shared_ptr<const MarginalSet> marginals;
  std::shared_ptr<const ResponseDistribution> reference;
  std::string skip_reason;
};

ExperimentRunner::ExperimentRunner(ExperimentConfig cfg, ExperimentInputs inputs)
    : cfg_(std::move(cfg)), inputs_(std::move(inputs)) {
  validate_config(cfg_);
  const auto& cb = inputs_.codebook;
  for (const auto& code : cfg_.question_codes) cb.question(code);
  if (cfg_.kind == ExperimentKind::multi_question) {
    for (const auto& code : cfg_.question_codes) {
      if (cb.question(code).kind != QuestionKind::enumerated_choice) {
        throw ConfigError("multi-question runs take enumerated questions only; " + code + " is free text");
      }
    }
  }
  for (const auto& name : cfg_.strata) {
    if (!cb.find_stratum(name)) throw ConfigError("unknown stratum '" + name + "'");
  }
  if (inputs_.records.empty()) throw ConfigError("respondent data is empty");

  if (inputs_.backend_override) {
    manifest_.backend_identity = inputs_.backend_override->identity();
  } else if (cfg_.backend == BackendKind::mock) {
    if (inputs_.mock_spec) {
      fitted_spec_ = *inputs_.mock_spec;
    } else {
      std::vector<ResponseDistribution> refs;
      for (const auto& q : cb.questions) {
        try {
          refs.push_back(reference_response_distribution(inputs_.records, q.code, cb));
        } catch (const DataError&) {
          // Questions without valid reference answers cannot be fitted.
        }
      }
      fitted_spec_ = fit_mock_spec(cb, refs);
    }
    manifest_.backend_identity = inputs_.mock_spec ? "mock" : "mock (fitted to reference data)";
    manifest_.mock_spec_digest = sha256_hex(serialize_mock_spec(fitted_spec_));
  } else {
    auto key = WireBackend::credential_from_env(cfg_.wire);
    wire_ = std::make_shared<WireBackend>(cfg_.wire, std::move(key), nullptr);
    manifest_.backend_identity = wire_->identity() + " model=" + cfg_.generation.model_id;
  }
  if (cfg_.cache_dir) manifest_.backend_identity += " +cache";
}

std::vector<ExperimentRunner::RowPlan> ExperimentRunner::plan_rows() const {
  const auto& cb = inputs_.codebook;
  const auto& records = inputs_.records;
  std::vector<RowPlan> plans;

  auto full_marginals = [&] {
    return std::make_shared<const MarginalSet>(stratum_marginals(records, cb));
  };
  auto reference_for = [&](std::span<const RespondentRecord> subset, const QuestionSpec& q,
                           std::string& skip) -> std::shared_ptr<const ResponseDistribution> {
    try {
      return std::make_shared<const ResponseDistribution>(reference_response_distribution(subset, q.code, cb));
    } catch (const DataError& e) {
      skip = e.what();
      return nullptr;
    }
  };

  switch (cfg_.kind) {
    case ExperimentKind::replication: {
      const auto& q = cb.question(cfg_.question_codes.empty() ? default_single_question(cb) : cfg_.question_codes[0]);
      const auto marginals = full_marginals();
      std::string skip;
      const auto reference = reference_for(records, q, skip);
      for (std::size_t r = 1; r <= cfg_.repetitions; ++r) {
        RowPlan p;
        p.key = "rep:" + std::to_string(r);
        p.label = "RSS " + std::to_string(r);
        p.repetition = r;
        p.question = &q;
        p.cohort_size = cfg_.cohort_size.value_or(records.size());
        p.marginals = marginals;
        p.reference = reference;
        p.skip_reason = skip;
        plans.push_back(std::move(p));
      }
      break;
    }
    case ExperimentKind::downsampling: {
      const auto& q = cb.question(cfg_.question_codes.empty() ? default_single_question(cb) : cfg_.question_codes[0]);
      const auto fractions = cfg_.fractions.empty() ? default_downsample_fractions() : cfg_.fractions;
      const std::size_t base = cfg_.cohort_size.value_or(records.size());
      const auto sizes = downsample_sizes(base, fractions);
      const auto marginals = full_marginals();
      std::string skip;
      const auto reference = reference_for(records, q, skip);
      for (std::size_t i = 0; i < fractions.size(); ++i) {
        RowPlan p;
        p.key = fraction_key(fractions[i]);
        p.label = fmt::format("{:g} %", fractions[i] * 100.0);
        p.fraction = fractions[i];
        p.question = &q;
        p.cohort_size = sizes[i];
        p.marginals = marginals;
        p.reference = reference;
        p.skip_reason = skip;
        plans.push_back(std::move(p));
      }
      break;
    }
    case ExperimentKind::multi_question: {
      std::vector<std::string> codes = cfg_.question_codes;
      if (codes.empty()) {
        for (const auto& q : cb.questions) {
          if (q.kind == QuestionKind::enumerated_choice) codes.push_back(q.code);
        }
      }
      const auto marginals = full_marginals();
      for (const auto& code : codes) {
        const auto& q = cb.question(code);
        RowPlan p;
        p.key = "question:" + code;
        p.label = q.topic.empty() ? code : q.topic;
        p.question = &q;
        p.cohort_size = cfg_.cohort_size.value_or(records.size());
        p.marginals = marginals;
        p.reference = reference_for(records, q, p.skip_reason);
        plans.push_back(std::move(p));
      }
      break;
    }
    case ExperimentKind::stratified: {
      std::vector<const StratumSpec*> strata;
      if (cfg_.strata.empty()) {
        strata = cb.default_strata();
      } else {
        for (const auto& name : cfg_.strata) strata.push_back(&cb.stratum(name));
      }
      std::vector<std::string> codes = cfg_.question_codes;
      if (codes.empty()) codes.push_back(default_single_question(cb));
      for (const auto* s : strata) {
        const auto subset = stratify(records, *s);
        std::shared_ptr<const MarginalSet> marginals;
        if (!subset.empty()) marginals = std::make_shared<const MarginalSet>(stratum_marginals(subset, cb));
        for (const auto& code : codes) {
          const auto& q = cb.question(code);
          RowPlan p;
          p.key = "stratum:" + s->name + "|question:" + code;
          p.label = s->name;
          p.stratum = s->name;
          p.question = &q;
          p.cohort_size = cfg_.cohort_size.value_or(subset.size());
          p.marginals = marginals;
          if (subset.empty()) {
            p.skip_reason = "stratum has no records";
          } else {
            p.reference = reference_for(subset, q, p.skip_reason);
          }
          plans.push_back(std::move(p));
        }
      }
      break;
    }
  }
  return plans;
}

std::shared_ptr<CompletionBackend> ExperimentRunner::backend_for(std::uint64_t seed) const {
  if (inputs_.backend_override) return inputs_.backend_override;
  if (cfg_.backend == BackendKind::wire) return wire_;
  return std::make_shared<MockBackend>(fitted_spec_, mix_seed(seed, fnv1a64("mock")));
}

ReportRow ExperimentRunner::execute(const RowPlan& plan) {
  const auto& cb = inputs_.codebook;
  const auto& q = *plan.question;

  ReportRow row;
  row.key = plan.key;
  row.label = plan.label;
  row.repetition = plan.repetition;
  row.fraction = plan.fraction;
  row.stratum = plan.stratum;
  row.question_code = q.code;
  row.topic = q.topic;
  row.row_seed = row_seed(cfg_.run_seed, cfg_.kind, plan.key);
  row.cohort_size = plan.cohort_size;
  for (const auto& a : q.answer_choices) row.choice_labels.push_back(a.text);

  if (!plan.skip_reason.empty() || !plan.reference || !plan.marginals) {
    row.skipped = true;
    row.note = plan.skip_reason.empty() ? "no reference distribution" : plan.skip_reason;
    return row;
  }
  const auto& reference = *plan.reference;
  row.reference_rates = reference.proportions;
  row.reference_counts = *reference.counts;
  row.reference_missing = reference.n_missing;

  const auto cohort = sample_subjects({plan.cohort_size, row.row_seed, plan.marginals.get(), cfg_.reproduce_missing});

  BatchSettings settings;
  settings.params = cfg_.generation;
  settings.max_tokens_override = cfg_.max_tokens_override;
  settings.variant = cfg_.variant;
  if (cfg_.date_prefix) settings.date_prefix = q.date_prefix;
  const auto prompts = build_prompt_batch(cohort, q, cb, settings);

  std::vector<GenerationRequest> requests;
  requests.reserve(prompts.size());
  for (const auto& p : prompts) requests.push_back(make_request(p, mix_seed(row.row_seed, p.subject_id)));

  auto backend = backend_for(row.row_seed);
  std::optional<ResponseCache> cache;
  std::optional<CachingBackend> cached;
  CompletionBackend* active = backend.get();
  if (cfg_.cache_dir) {
    cache.emplace(*cfg_.cache_dir);
    cached.emplace(*backend, *cache);
    active = &*cached;
  }
  DispatchOptions dispatch_opts;
  if (cfg_.backend == BackendKind::wire || inputs_.backend_override) {
    dispatch_opts.in_flight = cfg_.wire.in_flight;
    dispatch_opts.rate_per_second = cfg_.wire.rate_per_second;
  }
  const auto completions = dispatch(requests, *active, dispatch_opts);

  manifest_.requests += completions.size();
  if (cached) manifest_.cache_hits += cached->hits();
  for (const auto& c : completions) {
    manifest_.prompt_tokens += c.prompt_tokens.value_or(0);
    manifest_.completion_tokens += c.completion_tokens.value_or(0);
  }

  std::vector<CodedAnswer> answers;
  answers.reserve(completions.size());
  for (std::size_t i = 0; i < completions.size(); ++i) {
    answers.push_back({prompts[i].subject_id, q.code, code_completion(completions[i].text, q)});
  }

  std::optional<ResponseDistribution> generated;
  try {
    generated = aggregate(answers, q);
  } catch (const DataError& e) {
    row.skipped = true;
    row.note = e.what();
  }
  if (generated) {
    row.generated_rates = generated->proportions;
    row.generated_counts = *generated->counts;
    row.generated_missing = generated->n_missing;
    try {
      const auto h = chi_square_homogeneity(*generated, reference);
      row.chi_square = h.statistic;
      row.df = h.df;
      row.p_value = h.p_value;
      row.significant = h.significant_at_05;
    } catch (const DataError& e) {
      row.chi_square = std::numeric_limits<double>::quiet_NaN();
      row.p_value = std::numeric_limits<double>::quiet_NaN();
      row.df = 0;
      row.significant = false;
      row.note = e.what();
    }
    const auto kl = kl_divergence_detail(*generated, reference, cfg_.kl_epsilon);
    row.kl = kl.value;
    row.kl_smoothing_changed = kl.smoothing_changed;
  }
  checkpoint(row, completions, answers, cohort, prompts);
  return row;
}

void ExperimentRunner::checkpoint(const ReportRow& row, std::span<const RawCompletion> completions,
                                  std::span<const CodedAnswer> answers, std::span<const SiliconSubject> cohort,
                                  std::span<const PromptPair> prompts) const {
  (void)completions;
  if (cfg_.output_dir.empty()) return;
  std::error_code ec;
  fs::create_directories(cfg_.output_dir / "rows", ec);
  if (ec) throw Error("cannot create output directory " + cfg_.output_dir.string());
  {
    std::ofstream partial(cfg_.output_dir / "rows.partial.jsonl", std::ios::app);
    partial << row_to_json(row).dump() << '\n';
  }
  const auto stem = cfg_.output_dir / "rows" / sanitize(row.key);
  if (cfg_.backend == BackendKind::wire || cfg_.audit) {
    std::ofstream out(stem.string() + ".coded.csv");
    write_coded_answers_csv(out, answers);
  }
  if (cfg_.audit) {
    std::ofstream cohort_out(stem.string() + ".cohort.csv");
    write_cohort_csv(cohort_out, cohort, inputs_.codebook);
    std::ofstream prompt_out(stem.string() + ".prompts.jsonl");
    write_prompt_batch_jsonl(prompt_out, prompts);
  }
}

std::vector<std::string> ExperimentRunner::row_keys() const {
  std::vector<std::string> keys;
  for (const auto& p : plan_rows()) keys.push_back(p.key);
  return keys;
}

ReportRow ExperimentRunner::run_row(const std::string& row_key) {
  for (const auto& p : plan_rows()) {
    if (p.key == row_key) return execute(p);
  }
  throw ConfigError("no row '" + row_key + "' in this experiment");
}

EvaluationReport ExperimentRunner::run() {
  manifest_.started_at = utc_now();
  if (!cfg_.output_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg_.output_dir, ec);
    fs::remove(cfg_.output_dir / "rows.partial.jsonl", ec);
  }
  EvaluationReport report;
  report.kind = cfg_.kind;
  for (const auto& plan : plan_rows()) report.rows.push_back(execute(plan));

  if (cfg_.kind == ExperimentKind::stratified) {
    KlMatrix m;
    std::map<std::string, std::map<std::string, double>> cells;
    std::vector<std::string> strata_order;
    for (const auto& r : report.rows) {
      if (std::find(strata_order.begin(), strata_order.end(), r.stratum) == strata_order.end()) {
        strata_order.push_back(r.stratum);
      }
      if (std::find(m.questions.begin(), m.questions.end(), r.question_code) == m.questions.end()) {
        m.questions.push_back(r.question_code);
        m.topics.push_back(r.topic.empty() ? r.question_code : r.topic);
      }
      if (!r.skipped) cells[r.stratum][r.question_code] = r.kl;
    }
    std::map<std::string, double> avg;
    for (const auto& s : strata_order) {
      double total = 0.0;
      std::size_t n = 0;
      for (const auto& [code, kl] : cells[s]) {
        total += kl;
        ++n;
      }
      avg[s] = n ? total / static_cast<double>(n) : std::numeric_limits<double>::infinity();
    }
    std::stable_sort(strata_order.begin(), strata_order.end(),
                     [&](const std::string& a, const std::string& b) { return avg[a] < avg[b]; });
    for (const auto& s : strata_order) {
      m.strata.push_back(s);
      m.row_average.push_back(avg[s]);
      std::vector<std::optional<double>> line;
      for (const auto& code : m.questions) {
        auto it = cells[s].find(code);
        line.push_back(it == cells[s].end() ? std::nullopt : std::optional<double>(it->second));
      }
      m.values.push_back(std::move(line));
    }
    std::vector<ReportRow> sorted;
    for (const auto& s : m.strata) {
      for (auto& r : report.rows) {
        if (r.stratum == s) sorted.push_back(std::move(r));
      }
    }
    report.rows = std::move(sorted);
    report.kl_matrix = std::move(m);
  }

  report.summary = summarize(report.rows);
  manifest_.tool_version = kVersion;
  manifest_.kind = std::string(to_string(cfg_.kind));
  manifest_.run_seed = cfg_.run_seed;
  manifest_.config_digest = config_digest(cfg_);
  manifest_.config = config_to_json(cfg_);
  manifest_.finished_at = utc_now();
  report.manifest = manifest_;
  return report;
}

namespace {

EvaluationReport run_kind(const ExperimentConfig& cfg, ExperimentKind expected) {
  if (cfg.kind != expected) {
    throw ConfigError("config kind is " + std::string(to_string(cfg.kind)) + ", expected " +
                      std::string(to_string(expected)));
  }
  ExperimentRunner runner(cfg, load_inputs(cfg));
  return runner.run();
}

}  // namespace

EvaluationReport run_replication(const ExperimentConfig& cfg) { return run_kind(cfg, ExperimentKind::replication); }
EvaluationReport run_stratified(const ExperimentConfig& cfg) { return run_kind(cfg, ExperimentKind::stratified); }
EvaluationReport run_downsampling(const ExperimentConfig& cfg) { return run_kind(cfg, ExperimentKind::downsampling); }
EvaluationReport run_multi_question(const ExperimentConfig& cfg) {
  return run_kind(cfg, ExperimentKind::multi_question);
}
EvaluationReport run_experiment(const ExperimentConfig& cfg) { return run_kind(cfg, cfg.kind); }

}  // namespace rss
