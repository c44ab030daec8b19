#include "rss/config.hpp"

#include <fstream>
#include <sstream>

#include "rss/backend.hpp"
#include "rss/error.hpp"

namespace rss {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::replication: return "replication";
    case ExperimentKind::stratified: return "stratified";
    case ExperimentKind::downsampling: return "downsampling";
    case ExperimentKind::multi_question: return "multi_question";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from(std::string_view s) {
  if (s == "replication") return ExperimentKind::replication;
  if (s == "stratified") return ExperimentKind::stratified;
  if (s == "downsampling") return ExperimentKind::downsampling;
  if (s == "multi_question") return ExperimentKind::multi_question;
  throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind k) { return k == BackendKind::wire ? "wire" : "mock"; }

BackendKind backend_kind_from(std::string_view s) {
  if (s == "wire") return BackendKind::wire;
  if (s == "mock") return BackendKind::mock;
  throw ConfigError("unknown backend '" + std::string(s) + "'");
}

std::vector<double> default_downsample_fractions() {
  std::vector<double> out;
  for (int k = 90; k >= 10; k -= 10) out.push_back(k / 100.0);
  for (int k = 9; k >= 1; --k) out.push_back(k / 100.0);
  return out;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, const fs::path& base_dir) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.codebook_path = resolve(base_dir, j.at("codebook").get<std::string>());
    cfg.data_path = resolve(base_dir, j.at("data").get<std::string>());
    cfg.kind = experiment_kind_from(j.at("kind").get<std::string>());
    cfg.question_codes = j.value("questions", std::vector<std::string>{});
    if (j.contains("cohort_size") && !j["cohort_size"].is_null()) cfg.cohort_size = j["cohort_size"].get<std::size_t>();
    cfg.repetitions = j.value("repetitions", std::size_t{1});
    cfg.fractions = j.value("fractions", std::vector<double>{});
    cfg.strata = j.value("strata", std::vector<std::string>{});
    cfg.variant = prompt_variant_from(j.value("variant", std::string("standard")));
    cfg.date_prefix = j.value("date_prefix", true);
    cfg.reproduce_missing = j.value("reproduce_missing", true);
    cfg.run_seed = j.value("seed", std::uint64_t{0});
    if (j.contains("output_dir") && !j["output_dir"].is_null()) {
      cfg.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    }
    cfg.kl_epsilon = j.value("kl_epsilon", 1e-9);
    cfg.audit = j.value("audit", false);

    if (auto it = j.find("backend"); it != j.end()) {
      const auto& b = *it;
      cfg.backend = backend_kind_from(b.value("kind", std::string("mock")));
      if (b.contains("mock_spec") && !b["mock_spec"].is_null()) {
        cfg.mock_spec_path = resolve(base_dir, b["mock_spec"].get<std::string>());
      }
      if (b.contains("cache_dir") && !b["cache_dir"].is_null()) {
        cfg.cache_dir = resolve(base_dir, b["cache_dir"].get<std::string>());
      }
      if (auto w = b.find("wire"); w != b.end()) {
        if (w->contains("api_key")) throw ConfigError("credentials are read from the environment, not the config file");
        cfg.wire.endpoint = w->value("endpoint", cfg.wire.endpoint);
        cfg.wire.api_key_env = w->value("api_key_env", cfg.wire.api_key_env);
        cfg.wire.max_retries = w->value("max_retries", cfg.wire.max_retries);
        cfg.wire.backoff_base = std::chrono::milliseconds(w->value("backoff_base_ms", cfg.wire.backoff_base.count()));
        cfg.wire.backoff_max = std::chrono::milliseconds(w->value("backoff_max_ms", cfg.wire.backoff_max.count()));
        cfg.wire.timeout = std::chrono::seconds(w->value("timeout_s", cfg.wire.timeout.count()));
        cfg.wire.in_flight = w->value("in_flight", cfg.wire.in_flight);
        cfg.wire.rate_per_second = w->value("rate_per_second", cfg.wire.rate_per_second);
        cfg.wire.jitter_seed = w->value("jitter_seed", cfg.wire.jitter_seed);
      }
    }
    if (auto it = j.find("generation"); it != j.end()) {
      const auto& g = *it;
      cfg.generation.model_id = g.value("model", cfg.generation.model_id);
      cfg.generation.temperature = g.value("temperature", cfg.generation.temperature);
      cfg.generation.top_p = g.value("top_p", cfg.generation.top_p);
      cfg.generation.frequency_penalty = g.value("frequency_penalty", cfg.generation.frequency_penalty);
      cfg.generation.presence_penalty = g.value("presence_penalty", cfg.generation.presence_penalty);
      if (g.contains("max_tokens") && !g["max_tokens"].is_null()) cfg.max_tokens_override = g["max_tokens"].get<int>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed experiment config: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), fs::absolute(path).parent_path());
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["codebook"] = fs::absolute(cfg.codebook_path).string();
  j["data"] = fs::absolute(cfg.data_path).string();
  j["kind"] = std::string(to_string(cfg.kind));
  j["questions"] = cfg.question_codes;
  j["cohort_size"] = cfg.cohort_size ? oj(*cfg.cohort_size) : oj(nullptr);
  j["repetitions"] = cfg.repetitions;
  j["fractions"] = cfg.fractions;
  j["strata"] = cfg.strata;
  j["variant"] = std::string(to_string(cfg.variant));
  j["date_prefix"] = cfg.date_prefix;
  j["reproduce_missing"] = cfg.reproduce_missing;
  oj backend;
  backend["kind"] = std::string(to_string(cfg.backend));
  backend["mock_spec"] = cfg.mock_spec_path ? oj(fs::absolute(*cfg.mock_spec_path).string()) : oj(nullptr);
  backend["cache_dir"] = cfg.cache_dir ? oj(fs::absolute(*cfg.cache_dir).string()) : oj(nullptr);
  backend["wire"] = {{"endpoint", cfg.wire.endpoint},
                     {"api_key_env", cfg.wire.api_key_env},
                     {"max_retries", cfg.wire.max_retries},
                     {"backoff_base_ms", cfg.wire.backoff_base.count()},
                     {"backoff_max_ms", cfg.wire.backoff_max.count()},
                     {"timeout_s", cfg.wire.timeout.count()},
                     {"in_flight", cfg.wire.in_flight},
                     {"rate_per_second", cfg.wire.rate_per_second},
                     {"jitter_seed", cfg.wire.jitter_seed}};
  j["backend"] = std::move(backend);
  j["generation"] = {{"model", cfg.generation.model_id},
                     {"temperature", cfg.generation.temperature},
                     {"top_p", cfg.generation.top_p},
                     {"frequency_penalty", cfg.generation.frequency_penalty},
                     {"presence_penalty", cfg.generation.presence_penalty},
                     {"max_tokens", cfg.max_tokens_override ? oj(*cfg.max_tokens_override) : oj(nullptr)}};
  j["seed"] = cfg.run_seed;
  j["output_dir"] = cfg.output_dir.empty() ? oj(nullptr) : oj(fs::absolute(cfg.output_dir).string());
  j["kl_epsilon"] = cfg.kl_epsilon;
  j["audit"] = cfg.audit;
  return j;
}

std::string config_digest(const ExperimentConfig& cfg) {
  auto j = config_to_json(cfg);
  // The output location does not influence results.
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (cfg.cohort_size && *cfg.cohort_size < 1) throw ConfigError("cohort_size must be >= 1");
  if (!(cfg.kl_epsilon >= 0.0)) throw ConfigError("kl_epsilon must be >= 0");
  for (double f : cfg.fractions) {
    if (!(f > 0.0) || f > 1.0) throw ConfigError("down-sampling fractions must lie in (0, 1]");
  }
  if (cfg.kind == ExperimentKind::replication || cfg.kind == ExperimentKind::downsampling) {
    if (cfg.question_codes.size() > 1) {
      throw ConfigError(std::string(to_string(cfg.kind)) + " runs take a single question");
    }
  }
  if (cfg.kind != ExperimentKind::downsampling && !cfg.fractions.empty()) {
    throw ConfigError("fractions are only valid for downsampling runs");
  }
  if (cfg.kind != ExperimentKind::stratified && !cfg.strata.empty()) {
    throw ConfigError("strata are only valid for stratified runs");
  }
  if (cfg.generation.temperature < 0.0 || cfg.generation.top_p < 0.0) {
    throw ConfigError("temperature and top_p must be >= 0");
  }
  if (cfg.max_tokens_override && *cfg.max_tokens_override < 1) throw ConfigError("max_tokens must be >= 1");
}

}  // namespace rss
