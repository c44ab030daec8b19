#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rss/codebook.hpp"
#include "rss/config.hpp"
#include "rss/error.hpp"
#include "rss/ingestion.hpp"
#include "rss/mock.hpp"
#include "rss/orchestrator.hpp"
#include "rss/report.hpp"
#include "rss/version.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string out;
  std::string format = "json";
  std::string variant;
  // validate and mock-fit also accept the inputs directly
  std::string codebook;
  std::string data;
};

rss::ExperimentConfig resolve_config(const GlobalFlags& g, std::optional<rss::ExperimentKind> kind) {
  rss::ExperimentConfig cfg;
  if (!g.config.empty()) {
    cfg = rss::load_experiment_config(g.config);
  } else if (kind) {
    throw rss::ConfigError("--config is required");
  }
  if (!g.codebook.empty()) cfg.codebook_path = fs::absolute(g.codebook);
  if (!g.data.empty()) cfg.data_path = fs::absolute(g.data);
  if (kind) {
    if (!g.config.empty() && cfg.kind != *kind) {
      // A config written for one design cannot silently drive another: the
      // design-specific fields would be ignored or rejected.
      throw rss::ConfigError("config describes a " + std::string(rss::to_string(cfg.kind)) +
                             " experiment, not " + std::string(rss::to_string(*kind)));
    }
    cfg.kind = *kind;
  }
  if (g.seed) cfg.run_seed = *g.seed;
  if (!g.backend.empty()) cfg.backend = rss::backend_kind_from(g.backend);
  if (!g.out.empty()) cfg.output_dir = fs::absolute(g.out);
  if (!g.variant.empty()) cfg.variant = rss::prompt_variant_from(g.variant);
  return cfg;
}

int run_design(const GlobalFlags& g, rss::ExperimentKind kind) {
  auto cfg = resolve_config(g, kind);
  if (cfg.output_dir.empty()) throw rss::ConfigError("no output directory: set output_dir or pass --out");
  const auto format = rss::report_format_from(g.format);
  rss::validate_config(cfg);
  const auto report = rss::run_experiment(cfg);
  const auto paths = rss::emit_report(report, format, cfg.output_dir);
  std::cout << rss::to_string(kind) << ": " << report.rows.size() << " rows, " << report.summary.significant_rows
            << " significant, mean KL " << rss::format_kl(report.summary.mean_kl) << '\n';
  for (const auto& p : paths) std::cout << "wrote " << p.string() << '\n';
  return 0;
}

int run_validate(const GlobalFlags& g) {
  const auto cfg = resolve_config(g, std::nullopt);
  if (cfg.codebook_path.empty()) throw rss::ConfigError("validate needs --codebook or --config");
  std::ifstream in(cfg.codebook_path);
  if (!in) throw rss::Error("cannot read " + cfg.codebook_path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  rss::SurveyCodebook cb;
  try {
    cb = rss::parse_codebook(text);
  } catch (const rss::ValidationError& e) {
    std::cout << "codebook: INVALID\n  " << e.what() << '\n';
    return 2;
  }
  std::cout << "codebook: ok (" << cb.variables.size() << " variables, " << cb.questions.size() << " questions, "
            << cb.strata.size() << " strata)\n";
  if (cfg.data_path.empty()) return 0;

  const auto table = rss::load_respondents(cfg.data_path, cb);
  std::cout << "data: " << table.records.size() << " records, " << table.missing_mapped_cells
            << " cells mapped to missing\n";
  for (const auto& c : table.unknown_columns) std::cout << "  ignored column " << c << '\n';
  const auto ms = rss::marginal_set(table.records, cb);
  for (const auto& v : cb.variables) {
    const auto& m = ms.at(v.code);
    std::cout << "  " << v.code << " (" << v.display_name << "): " << m.support.size() << " values, "
              << rss::format_rate(m.missing_rate) << "% missing\n";
  }
  for (const auto& q : cb.questions) {
    try {
      const auto ref = rss::reference_response_distribution(table.records, q.code, cb);
      std::cout << "  " << q.code << ": " << ref.n_valid << " valid, " << ref.n_missing << " missing\n";
    } catch (const rss::DataError& e) {
      std::cout << "  " << q.code << ": " << e.what() << '\n';
    }
  }
  return 0;
}

int run_mock_fit(const GlobalFlags& g, const std::string& spec_out) {
  const auto cfg = resolve_config(g, std::nullopt);
  if (cfg.codebook_path.empty() || cfg.data_path.empty()) {
    throw rss::ConfigError("mock-fit needs --config or both --codebook and --data");
  }
  const auto cb = rss::load_codebook(cfg.codebook_path);
  const auto table = rss::load_respondents(cfg.data_path, cb);
  std::vector<rss::ResponseDistribution> refs;
  for (const auto& q : cb.questions) refs.push_back(rss::reference_response_distribution(table.records, q.code, cb));
  const auto spec = rss::fit_mock_spec(cb, refs);
  const auto text = rss::serialize_mock_spec(spec);
  if (spec_out.empty() || spec_out == "-") {
    std::cout << text;
  } else {
    std::ofstream out(spec_out);
    if (!out) throw rss::Error("cannot write " + spec_out);
    out << text;
    std::cout << "wrote " << spec_out << '\n';
  }
  return 0;
}

int run_replay(const std::string& manifest_path, const std::string& row_key) {
  std::ifstream in(manifest_path);
  if (!in) throw rss::Error("cannot read " + manifest_path);
  const auto manifest = nlohmann::json::parse(in);
  if (!manifest.contains("config")) throw rss::ConfigError("manifest has no config");
  auto cfg = rss::parse_experiment_config(manifest["config"].dump(), fs::path(manifest_path).parent_path());
  cfg.output_dir.clear();  // a replay never touches the original run's files
  rss::ExperimentRunner runner(cfg, rss::load_inputs(cfg));
  if (row_key.empty()) {
    for (const auto& k : runner.row_keys()) std::cout << k << '\n';
    return 0;
  }
  std::cout << rss::row_to_json(runner.run_row(row_key)).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random silicon sampling: simulate survey sub-populations with a language model"};
  app.set_version_flag("--version", std::string(rss::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "Experiment config file");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--backend", g.backend, "Completion backend")->check(CLI::IsMember({"wire", "mock"}));
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"json", "csv", "markdown"}));
  app.add_option("--variant", g.variant, "Prompt variant")->check(CLI::IsMember({"standard", "reversed"}));

  auto* replicate = app.add_subcommand("replicate", "Repeated samplings against the full population");
  auto* stratify = app.add_subcommand("stratify", "One row per subgroup and question");
  auto* downsample = app.add_subcommand("downsample", "Shrinking cohorts against the full reference");
  auto* questions = app.add_subcommand("questions", "One row per multiple-choice question");
  auto* validate = app.add_subcommand("validate", "Check a codebook and respondent file");
  validate->add_option("--codebook", g.codebook, "Codebook file");
  validate->add_option("--data", g.data, "Respondent CSV");
  std::string spec_out;
  auto* mock_fit = app.add_subcommand("mock-fit", "Derive a mock model matching the reference answers");
  mock_fit->add_option("--codebook", g.codebook, "Codebook file");
  mock_fit->add_option("--data", g.data, "Respondent CSV");
  mock_fit->add_option("-o,--spec-out", spec_out, "Where to write the spec ('-' for stdout)");
  std::string manifest_path;
  std::string row_key;
  auto* replay = app.add_subcommand("replay", "Re-run one row of a finished experiment from its manifest");
  replay->add_option("manifest", manifest_path, "manifest.json of the run")->required();
  replay->add_option("--row", row_key, "Row key; omit to list the keys");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*replicate) return run_design(g, rss::ExperimentKind::replication);
    if (*stratify) return run_design(g, rss::ExperimentKind::stratified);
    if (*downsample) return run_design(g, rss::ExperimentKind::downsampling);
    if (*questions) return run_design(g, rss::ExperimentKind::multi_question);
    if (*validate) return run_validate(g);
    if (*mock_fit) return run_mock_fit(g, spec_out);
    if (*replay) return run_replay(manifest_path, row_key);
  } catch (const rss::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const rss::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const rss::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const rss::BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
