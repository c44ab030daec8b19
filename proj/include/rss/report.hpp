#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rss/orchestrator.hpp"

namespace rss {

enum class ReportFormat { json, csv, markdown };

ReportFormat report_format_from(std::string_view s);
std::string_view file_extension(ReportFormat f);

/// Percentages with two decimals ("58.00").
std::string format_rate(double proportion);
std::string format_chi_square(double statistic);  // four decimals
std::string format_kl(double kl);                 // five decimals

nlohmann::ordered_json row_to_json(const ReportRow& row);
/// Report body without the manifest, so it carries no timestamps.
nlohmann::ordered_json report_to_json(const EvaluationReport& report);
nlohmann::ordered_json manifest_to_json(const Manifest& manifest);

std::string render_csv(const EvaluationReport& report);
std::string render_markdown(const EvaluationReport& report);

/// Writes report.<ext> and manifest.json into out_dir (created if needed).
/// Returns the written paths. Throws Error when out_dir is not writable.
std::vector<std::filesystem::path> emit_report(const EvaluationReport& report, ReportFormat format,
                                               const std::filesystem::path& out_dir);

}  // namespace rss
