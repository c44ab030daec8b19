#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rss/error.hpp"
#include "rss/report.hpp"

namespace rss {
namespace {

ReportRow vote_row(int rep, double biden, double chi, double kl, double p) {
  ReportRow r;
  r.key = "rep:" + std::to_string(rep);
  r.label = "RSS " + std::to_string(rep);
  r.repetition = rep;
  r.question_code = "V202073";
  r.topic = "Presidential vote";
  r.cohort_size = 5441;
  r.choice_labels = {"Joe Biden", "Donald Trump"};
  r.reference_rates = {0.5888, 0.4112};
  r.reference_counts = {5888, 4112};
  r.generated_rates = {biden, 1.0 - biden};
  r.generated_counts = {static_cast<std::int64_t>(biden * 1000), static_cast<std::int64_t>((1 - biden) * 1000)};
  r.chi_square = chi;
  r.df = 1;
  r.p_value = p;
  r.significant = p < 0.05;
  r.kl = kl;
  return r;
}

EvaluationReport replication_report() {
  EvaluationReport report;
  report.kind = ExperimentKind::replication;
  report.rows = {vote_row(1, 0.58, 0.5688, 0.000147, 0.4507), vote_row(2, 0.5661, 4.2774, 0.00100, 0.0386)};
  report.summary = summarize(report.rows);
  report.manifest.run_seed = 3;
  report.manifest.started_at = "2020-11-03T00:00:00Z";
  return report;
}

TEST(Formatting, FixedDecimals) {
  EXPECT_EQ(format_rate(0.58), "58.00");
  EXPECT_EQ(format_rate(0.41155306816), "41.16");
  EXPECT_EQ(format_chi_square(0.56884), "0.5688");
  EXPECT_EQ(format_chi_square(8.89312), "8.8931");
  EXPECT_EQ(format_kl(0.000141), "0.00014");
  EXPECT_EQ(format_kl(0.0021), "0.00210");
}

TEST(Formats, NamesAndExtensions) {
  EXPECT_EQ(report_format_from("json"), ReportFormat::json);
  EXPECT_EQ(report_format_from("csv"), ReportFormat::csv);
  EXPECT_EQ(report_format_from("markdown"), ReportFormat::markdown);
  EXPECT_EQ(file_extension(ReportFormat::markdown), "md");
  EXPECT_THROW(report_format_from("xml"), ConfigError);
}

TEST(Csv, ReplicationTableShape) {
  EXPECT_EQ(render_csv(replication_report()),
            "Sample,Joe Biden rate (%),Donald Trump rate (%),Chi-squared value,KL-divergence,df,p-value,Cohort size,"
            "Generated missing,Note\n"
            "Reference,58.88,41.12,,,,,10000,,\n"
            "RSS 1,58.00,42.00,0.5688,0.00015,1,0.4507,5441,0,\n"
            "RSS 2,56.61,43.39,4.2774,0.00100,1,0.0386,5441,0,\n");
}

TEST(Markdown, SignificantRowsCarryAStar) {
  const auto md = render_markdown(replication_report());
  EXPECT_NE(md.find("| RSS 1 | 58.00 % | 42.00 % | 0.5688 | 0.00015 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| RSS 2 | 56.61 % | 43.39 % | 4.2774 * | 0.00100 |"), std::string::npos) << md;
  EXPECT_NE(md.find("- significant rows (p < 0.05): 1"), std::string::npos);
}

TEST(Json, StableOrderAndNoTimestamps) {
  const auto j = report_to_json(replication_report());
  const auto text = j.dump();
  EXPECT_EQ(text.find("2020-11-03"), std::string::npos);
  EXPECT_LT(text.find("\"kind\""), text.find("\"rows\""));
  EXPECT_EQ(j["rows"][1]["significant"], true);
  EXPECT_EQ(j["summary"]["rows"], 2);
  EXPECT_EQ(text, report_to_json(replication_report()).dump());
}

TEST(Json, UndefinedStatisticsSerializeAsNull) {
  auto report = replication_report();
  report.rows[0].chi_square = std::numeric_limits<double>::quiet_NaN();
  report.rows[0].p_value = std::numeric_limits<double>::quiet_NaN();
  const auto j = report_to_json(report);
  EXPECT_TRUE(j["rows"][0]["chi_square"].is_null());
  EXPECT_TRUE(j["rows"][0]["p_value"].is_null());
  EXPECT_EQ(render_csv(report).find("nan"), std::string::npos);
}

TEST(Emit, EmptyReportWritesHeadersAndManifest) {
  EvaluationReport empty;
  empty.kind = ExperimentKind::replication;
  empty.manifest.kind = "replication";
  const auto dir = test::scratch_dir("emit_empty");
  const auto paths = emit_report(empty, ReportFormat::csv, dir);
  ASSERT_EQ(paths.size(), 2u);
  std::ifstream csv(dir / "report.csv");
  std::string all((std::istreambuf_iterator<char>(csv)), std::istreambuf_iterator<char>());
  EXPECT_EQ(all, "Sample,Chi-squared value,KL-divergence,df,p-value,Cohort size,Generated missing,Note\n");
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(Emit, EveryFormatIsWritten) {
  const auto dir = test::scratch_dir("emit_all");
  for (auto f : {ReportFormat::json, ReportFormat::csv, ReportFormat::markdown}) {
    const auto paths = emit_report(replication_report(), f, dir);
    EXPECT_TRUE(std::filesystem::exists(paths.front()));
  }
  const auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  EXPECT_EQ(manifest["run_seed"], 3);
  EXPECT_EQ(manifest["started_at"], "2020-11-03T00:00:00Z");
}

TEST(Emit, UnwritableDirectoryIsAnError) {
  const auto dir = test::scratch_dir("emit_blocked");
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_report(replication_report(), ReportFormat::json, dir / "file" / "sub"), Error);
}

}  // namespace
}  // namespace rss
