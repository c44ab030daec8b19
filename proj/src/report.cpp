#include "rss/report.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "rss/csv.hpp"
#include "rss/error.hpp"

namespace rss {

namespace fs = std::filesystem;
using oj = nlohmann::ordered_json;

namespace {

oj number_or_null(double v) { return std::isfinite(v) ? oj(v) : oj(nullptr); }

std::size_t max_choices(const EvaluationReport& report) {
  std::size_t k = 0;
  for (const auto& r : report.rows) k = std::max(k, r.choice_labels.size());
  return k;
}

bool single_question(const EvaluationReport& report) {
  return report.kind == ExperimentKind::replication || report.kind == ExperimentKind::downsampling;
}

std::string chi_cell(const ReportRow& r, bool star) {
  if (r.skipped || !std::isfinite(r.chi_square)) return "";
  auto s = format_chi_square(r.chi_square);
  if (star && r.significant) s += " *";
  return s;
}

std::string kl_cell(const ReportRow& r) { return r.skipped ? "" : format_kl(r.kl); }

std::string p_cell(const ReportRow& r) {
  return r.skipped || !std::isfinite(r.p_value) ? "" : fmt::format("{:.6g}", r.p_value);
}

std::string rate_cell(const std::vector<double>& rates, std::size_t i, bool percent_sign) {
  if (i >= rates.size()) return "";
  return percent_sign ? format_rate(rates[i]) + " %" : format_rate(rates[i]);
}

std::string row_name(const ReportRow& r, ExperimentKind kind) {
  if (kind == ExperimentKind::stratified) return r.stratum;
  return r.label;
}

// Rows of cells shared by the csv and markdown renderers.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table build_table(const EvaluationReport& report, bool markdown) {
  Table t;
  const bool single = single_question(report);
  if (single) {
    t.header.push_back("Sample");
    if (!report.rows.empty()) {
      for (const auto& label : report.rows.front().choice_labels) {
        t.header.push_back(label + (markdown ? " rate" : " rate (%)"));
      }
    }
  } else {
    const std::size_t k = max_choices(report);
    t.header.push_back(report.kind == ExperimentKind::stratified ? "Group" : "Topic");
    if (report.kind == ExperimentKind::stratified) t.header.push_back("Question");
    for (std::size_t i = 1; i <= k; ++i) t.header.push_back(fmt::format("Reference {}", i));
    for (std::size_t i = 1; i <= k; ++i) t.header.push_back(fmt::format("Silicon {}", i));
  }
  t.header.insert(t.header.end(), {"Chi-squared value", "KL-divergence", "df", "p-value", "Cohort size",
                                   "Generated missing", "Note"});
  if (report.rows.empty()) return t;

  if (single) {
    const auto& first = report.rows.front();
    std::vector<std::string> ref{"Reference"};
    for (std::size_t i = 0; i < first.reference_rates.size(); ++i) ref.push_back(rate_cell(first.reference_rates, i, markdown));
    if (first.reference_rates.empty()) ref.resize(1 + first.choice_labels.size());
    std::int64_t n_ref = std::accumulate(first.reference_counts.begin(), first.reference_counts.end(), std::int64_t{0});
    ref.insert(ref.end(), {"", "", "", "", std::to_string(n_ref), "", ""});
    t.rows.push_back(std::move(ref));
  }
  const std::size_t k = max_choices(report);
  for (const auto& r : report.rows) {
    std::vector<std::string> line{row_name(r, report.kind)};
    if (single) {
      for (std::size_t i = 0; i < r.choice_labels.size(); ++i) line.push_back(rate_cell(r.generated_rates, i, markdown));
    } else {
      if (report.kind == ExperimentKind::stratified) line.push_back(r.topic.empty() ? r.question_code : r.topic);
      for (std::size_t i = 0; i < k; ++i) line.push_back(rate_cell(r.reference_rates, i, markdown));
      for (std::size_t i = 0; i < k; ++i) line.push_back(rate_cell(r.generated_rates, i, markdown));
    }
    line.push_back(chi_cell(r, markdown));
    line.push_back(kl_cell(r));
    line.push_back(r.skipped || r.df == 0 ? "" : std::to_string(r.df));
    line.push_back(p_cell(r));
    line.push_back(std::to_string(r.cohort_size));
    line.push_back(r.skipped ? "" : std::to_string(r.generated_missing));
    line.push_back(r.skipped ? "skipped: " + r.note : r.note);
    t.rows.push_back(std::move(line));
  }
  return t;
}

std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out.push_back(c);
  }
  return out;
}

void write_md_table(std::ostringstream& out, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  out << '|';
  for (const auto& h : header) out << ' ' << md_escape(h) << " |";
  out << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? " --- |" : " ---: |");
  out << '\n';
  for (const auto& r : rows) {
    out << '|';
    for (const auto& c : r) out << ' ' << md_escape(c) << " |";
    out << '\n';
  }
}

}  // namespace

ReportFormat report_format_from(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw ConfigError("unknown report format '" + std::string(s) + "'");
}

std::string_view file_extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::json: return "json";
    case ReportFormat::csv: return "csv";
    case ReportFormat::markdown: return "md";
  }
  return "txt";
}

std::string format_rate(double proportion) { return fmt::format("{:.2f}", proportion * 100.0); }
std::string format_chi_square(double statistic) { return fmt::format("{:.4f}", statistic); }
std::string format_kl(double kl) { return fmt::format("{:.5f}", kl); }

oj row_to_json(const ReportRow& r) {
  oj j;
  j["key"] = r.key;
  j["label"] = r.label;
  j["repetition"] = r.repetition ? oj(*r.repetition) : oj(nullptr);
  j["fraction"] = r.fraction ? oj(*r.fraction) : oj(nullptr);
  j["stratum"] = r.stratum;
  j["question_code"] = r.question_code;
  j["topic"] = r.topic;
  j["row_seed"] = r.row_seed;
  j["cohort_size"] = r.cohort_size;
  j["choice_labels"] = r.choice_labels;
  j["reference_rates"] = r.reference_rates;
  j["generated_rates"] = r.generated_rates;
  j["reference_counts"] = r.reference_counts;
  j["generated_counts"] = r.generated_counts;
  j["reference_missing"] = r.reference_missing;
  j["generated_missing"] = r.generated_missing;
  j["chi_square"] = number_or_null(r.chi_square);
  j["df"] = r.df;
  j["p_value"] = number_or_null(r.p_value);
  j["significant"] = r.significant;
  j["kl"] = r.kl;
  j["kl_smoothing_changed"] = r.kl_smoothing_changed;
  j["skipped"] = r.skipped;
  j["note"] = r.note;
  return j;
}

oj manifest_to_json(const Manifest& m) {
  oj j;
  j["tool_version"] = m.tool_version;
  j["kind"] = m.kind;
  j["run_seed"] = m.run_seed;
  j["config_digest"] = m.config_digest;
  j["backend"] = m.backend_identity;
  j["mock_spec_digest"] = m.mock_spec_digest;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["requests"] = m.requests;
  j["cache_hits"] = m.cache_hits;
  j["prompt_tokens"] = m.prompt_tokens;
  j["completion_tokens"] = m.completion_tokens;
  j["config"] = m.config;
  return j;
}

oj report_to_json(const EvaluationReport& report) {
  oj j;
  j["kind"] = std::string(to_string(report.kind));
  j["run_seed"] = report.manifest.run_seed;
  j["config_digest"] = report.manifest.config_digest;
  auto rows = oj::array();
  for (const auto& r : report.rows) rows.push_back(row_to_json(r));
  j["rows"] = std::move(rows);
  const auto& s = report.summary;
  j["summary"] = {{"rows", s.rows},
                  {"significant_rows", s.significant_rows},
                  {"mean_rate", s.mean_rate},
                  {"sd_rate", s.sd_rate},
                  {"mean_kl", s.mean_kl}};
  if (report.kl_matrix) {
    const auto& m = *report.kl_matrix;
    oj jm;
    jm["strata"] = m.strata;
    jm["questions"] = m.questions;
    jm["topics"] = m.topics;
    auto values = oj::array();
    for (const auto& line : m.values) {
      auto jl = oj::array();
      for (const auto& v : line) jl.push_back(v ? oj(*v) : oj(nullptr));
      values.push_back(std::move(jl));
    }
    jm["values"] = std::move(values);
    auto avg = oj::array();
    for (double a : m.row_average) avg.push_back(number_or_null(a));
    jm["row_average"] = std::move(avg);
    j["kl_matrix"] = std::move(jm);
  }
  return j;
}

std::string render_csv(const EvaluationReport& report) {
  const auto t = build_table(report, false);
  std::ostringstream out;
  csv::write_row(out, t.header);
  for (const auto& r : t.rows) csv::write_row(out, r);
  return out.str();
}

std::string render_markdown(const EvaluationReport& report) {
  std::ostringstream out;
  out << "# " << to_string(report.kind) << " report\n\n";
  const auto t = build_table(report, true);
  write_md_table(out, t.header, t.rows);
  out << "\nChi-squared values marked * have p < 0.05.\n";

  const auto& s = report.summary;
  out << "\n## Summary\n\n";
  out << "- rows: " << s.rows << "\n";
  out << "- significant rows (p < 0.05): " << s.significant_rows << "\n";
  out << "- mean KL-divergence: " << format_kl(s.mean_kl) << "\n";
  if (!s.mean_rate.empty() && !report.rows.empty()) {
    const auto& labels = report.rows.front().choice_labels;
    for (std::size_t i = 0; i < s.mean_rate.size() && i < labels.size(); ++i) {
      out << "- " << labels[i] << " rate: mean " << format_rate(s.mean_rate[i]) << " %, sd "
          << format_rate(s.sd_rate[i]) << " %\n";
    }
  }

  if (report.kl_matrix) {
    const auto& m = *report.kl_matrix;
    out << "\n## KL-divergence by group\n\n";
    std::vector<std::string> header{"Group"};
    header.insert(header.end(), m.topics.begin(), m.topics.end());
    header.push_back("AVG");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < m.strata.size(); ++i) {
      std::vector<std::string> line{m.strata[i]};
      for (const auto& v : m.values[i]) line.push_back(v ? fmt::format("{:.4f}", *v) : "");
      line.push_back(std::isfinite(m.row_average[i]) ? fmt::format("{:.4f}", m.row_average[i]) : "");
      rows.push_back(std::move(line));
    }
    write_md_table(out, header, rows);
  }
  return out.str();
}

std::vector<fs::path> emit_report(const EvaluationReport& report, ReportFormat format, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Error("cannot create output directory " + out_dir.string());

  auto write = [&](const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed for " + path.string());
  };

  std::vector<fs::path> written;
  const auto report_path = out_dir / ("report." + std::string(file_extension(format)));
  switch (format) {
    case ReportFormat::json: write(report_path, report_to_json(report).dump(2) + "\n"); break;
    case ReportFormat::csv: write(report_path, render_csv(report)); break;
    case ReportFormat::markdown: write(report_path, render_markdown(report)); break;
  }
  written.push_back(report_path);
  const auto manifest_path = out_dir / "manifest.json";
  write(manifest_path, manifest_to_json(report.manifest).dump(2) + "\n");
  written.push_back(manifest_path);
  return written;
}

}  // namespace rss
