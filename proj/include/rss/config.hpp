#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rss/promptgen.hpp"
#include "rss/wire.hpp"

namespace rss {

enum class ExperimentKind { replication, stratified, downsampling, multi_question };
enum class BackendKind { wire, mock };

std::string_view to_string(ExperimentKind k);
ExperimentKind experiment_kind_from(std::string_view s);
std::string_view to_string(BackendKind k);
BackendKind backend_kind_from(std::string_view s);

/// Down-sampling fractions used when none are configured: 0.9..0.1 then 0.09..0.01.
std::vector<double> default_downsample_fractions();

struct ExperimentConfig {
  std::filesystem::path codebook_path;
  std::filesystem::path data_path;
  ExperimentKind kind = ExperimentKind::replication;
  std::vector<std::string> question_codes;  // empty -> kind default
  std::optional<std::size_t> cohort_size;
  std::size_t repetitions = 1;
  std::vector<double> fractions;     // downsampling; empty -> defaults
  std::vector<std::string> strata;   // stratified; empty -> codebook default set
  PromptVariant variant = PromptVariant::standard;
  bool date_prefix = true;
  bool reproduce_missing = true;

  BackendKind backend = BackendKind::mock;
  std::optional<std::filesystem::path> mock_spec_path;  // empty -> fit to the reference data
  std::optional<std::filesystem::path> cache_dir;
  WireConfig wire;
  GenerationParams generation;
  std::optional<int> max_tokens_override;

  std::uint64_t run_seed = 0;
  std::filesystem::path output_dir;
  double kl_epsilon = 1e-9;
  bool audit = false;  // write cohort, prompt and coded-answer dumps per row
};

/// Relative paths in the document resolve against base_dir.
ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical document with absolute paths; parse_experiment_config inverts it.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);

/// Structural checks that need no input files. Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

}  // namespace rss
