#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rss/backend.hpp"
#include "rss/codebook.hpp"
#include "rss/coder.hpp"
#include "rss/config.hpp"
#include "rss/ingestion.hpp"
#include "rss/mock.hpp"
#include "rss/sampler.hpp"

namespace rss {

struct ReportRow {
  std::string key;    // stable row identity, also the seed key
  std::string label;  // display name, e.g. "RSS 3", "Liberals", "Current economy"
  std::optional<std::size_t> repetition;
  std::optional<double> fraction;
  std::string stratum;
  std::string question_code;
  std::string topic;
  std::uint64_t row_seed = 0;
  std::size_t cohort_size = 0;

  std::vector<std::string> choice_labels;
  std::vector<double> reference_rates;
  std::vector<double> generated_rates;
  std::vector<std::int64_t> reference_counts;
  std::vector<std::int64_t> generated_counts;
  std::int64_t reference_missing = 0;
  std::int64_t generated_missing = 0;

  // NaN statistic/p when the contingency table has fewer than two non-empty columns.
  double chi_square = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool significant = false;
  double kl = 0.0;
  bool kl_smoothing_changed = false;

  bool skipped = false;
  std::string note;
};

struct ReportSummary {
  std::size_t rows = 0;
  std::size_t significant_rows = 0;
  // Over generated rates; empty when rows have different choice counts.
  std::vector<double> mean_rate;
  std::vector<double> sd_rate;  // sample standard deviation (n - 1)
  double mean_kl = 0.0;
};

/// Strata x questions grid of KL values, rows ordered by ascending average.
struct KlMatrix {
  std::vector<std::string> strata;
  std::vector<std::string> questions;  // question codes
  std::vector<std::string> topics;
  std::vector<std::vector<std::optional<double>>> values;
  std::vector<double> row_average;
};

struct Manifest {
  std::string tool_version;
  std::string kind;
  std::uint64_t run_seed = 0;
  std::string config_digest;
  nlohmann::ordered_json config;
  std::string backend_identity;
  std::string mock_spec_digest;
  std::string started_at;
  std::string finished_at;
  std::size_t requests = 0;
  std::size_t cache_hits = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct EvaluationReport {
  ExperimentKind kind = ExperimentKind::replication;
  std::vector<ReportRow> rows;
  ReportSummary summary;
  std::optional<KlMatrix> kl_matrix;
  Manifest manifest;
};

/// Seed of one report row: a pure function of the master seed, the
/// experiment kind and the row key, so any row can be re-run alone.
std::uint64_t row_seed(std::uint64_t run_seed, ExperimentKind kind, const std::string& row_key);

ReportSummary summarize(const std::vector<ReportRow>& rows);

/// Everything an experiment needs, loaded once. Tests build one in memory.
struct ExperimentInputs {
  SurveyCodebook codebook;
  std::vector<RespondentRecord> records;
  std::optional<MockModelSpec> mock_spec;
  // Overrides the backend selected by the config (tests inject fakes here).
  std::shared_ptr<CompletionBackend> backend_override;
};

ExperimentInputs load_inputs(const ExperimentConfig& cfg);

class ExperimentRunner {
 public:
  ExperimentRunner(ExperimentConfig cfg, ExperimentInputs inputs);

  EvaluationReport run();
  /// Re-runs exactly one row; throws ConfigError when the key is unknown.
  ReportRow run_row(const std::string& row_key);
  std::vector<std::string> row_keys() const;

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const ExperimentInputs& inputs() const noexcept { return inputs_; }

 private:
  struct RowPlan;
  std::vector<RowPlan> plan_rows() const;
  ReportRow execute(const RowPlan& plan);
  std::shared_ptr<CompletionBackend> backend_for(std::uint64_t seed) const;
  void checkpoint(const ReportRow& row, std::span<const RawCompletion> completions,
                  std::span<const CodedAnswer> answers, std::span<const SiliconSubject> cohort,
                  std::span<const PromptPair> prompts) const;

  ExperimentConfig cfg_;
  ExperimentInputs inputs_;
  MockModelSpec fitted_spec_;
  std::shared_ptr<CompletionBackend> wire_;
  Manifest manifest_;
};

EvaluationReport run_replication(const ExperimentConfig& cfg);
EvaluationReport run_stratified(const ExperimentConfig& cfg);
EvaluationReport run_downsampling(const ExperimentConfig& cfg);
EvaluationReport run_multi_question(const ExperimentConfig& cfg);
/// Runs whichever design cfg.kind names.
EvaluationReport run_experiment(const ExperimentConfig& cfg);

}  // namespace rss
