// Generates the synthetic respondent fixture: demographics from fixed
// population proportions (with party identification conditioned on
// ideology), answers from a mock respondent model, and missing cells at
// fixed rates. Output is a pure function of the seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rss/codebook.hpp"
#include "rss/coder.hpp"
#include "rss/csv.hpp"
#include "rss/error.hpp"
#include "rss/mock.hpp"
#include "rss/rng.hpp"

namespace {

using rss::Xoshiro256;

std::size_t draw(Xoshiro256& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

// Returns "" (blank), a refusal sentinel, or nothing when the cell is present.
std::optional<std::string> missing_cell(Xoshiro256& rng, double rate) {
  const double u = rng.uniform01();
  const double v = rng.uniform01();
  if (u >= rate) return std::nullopt;
  if (v < 0.5) return std::string("-9");
  if (v < 0.8) return std::string("-8");
  return std::string();
}

std::vector<std::size_t> race_quota(std::size_t n, Xoshiro256& rng) {
  // white, black, asian, native American, hispanic, missing
  std::vector<std::size_t> counts{3840, 480, 230, 204, 590, 97};
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < counts.size(); ++k) out.insert(out.end(), counts[k], k);
  out.resize(n, counts.size() - 1);
  for (std::size_t i = out.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic respondent fixture"};
  std::string codebook_path;
  std::string spec_path;
  std::string out_path;
  std::uint64_t seed = 2020;
  std::size_t n = 5441;
  app.add_option("--codebook", codebook_path, "Codebook file")->required();
  app.add_option("--population-spec", spec_path, "Mock model that answers for the population")->required();
  app.add_option("--out", out_path, "Output CSV")->required();
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("-n", n, "Number of respondents");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto cb = rss::load_codebook(std::filesystem::path(codebook_path));
    const auto spec = rss::load_mock_spec(spec_path);

    Xoshiro256 quota_rng(rss::mix_seed(seed, rss::fnv1a64("race")));
    const auto race = race_quota(n, quota_rng);

    const std::vector<double> gender{0.47, 0.53};
    std::vector<double> age(63, 1.0);
    for (int a = 18; a <= 80; ++a) {
      auto& w = age[static_cast<std::size_t>(a - 18)];
      if (a < 25) w = 0.6;
      else if (a >= 76 && a < 80) w = 0.7;
      else if (a == 80) w = 2.5;
    }
    const std::vector<double> ideology{0.06, 0.14, 0.11, 0.30, 0.13, 0.16, 0.05};
    const std::vector<std::vector<double>> party_by_ideology{
        {0.42, 0.20, 0.20, 0.08, 0.04, 0.03, 0.03},
        {0.12, 0.14, 0.14, 0.22, 0.14, 0.12, 0.12},
        {0.03, 0.03, 0.04, 0.08, 0.20, 0.20, 0.42}};
    const std::vector<double> interest{0.45, 0.37, 0.11, 0.07};
    const std::vector<double> church{0.42, 0.58};
    const std::vector<double> discuss{0.80, 0.20};

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw rss::Error("cannot write " + out_path);
    std::vector<std::string> header{"id"};
    for (const auto& v : cb.variables) header.push_back(v.code);
    for (const auto& q : cb.questions) header.push_back(q.code);
    rss::csv::write_row(out, header);

    const std::uint64_t answer_seed = rss::mix_seed(seed, rss::fnv1a64("answers"));
    for (std::size_t i = 0; i < n; ++i) {
      Xoshiro256 rng(rss::mix_seed(seed, i));
      std::map<std::string, std::string> demo;
      std::map<std::string, std::string> cells;

      auto categorical = [&](const std::string& code, const std::vector<double>& w, double missing_rate) {
        const auto idx = draw(rng, w);
        if (auto m = missing_cell(rng, missing_rate)) {
          cells[code] = *m;
          return std::size_t{99};
        }
        cells[code] = std::to_string(idx + 1);
        demo[code] = cells[code];
        return idx;
      };

      if (race[i] < 5) {
        cells["V201549x"] = std::to_string(race[i] + 1);
        demo["V201549x"] = cells["V201549x"];
      } else {
        cells["V201549x"] = "-9";
      }
      categorical("V201600", gender, 0.01);
      {
        const auto a = 18 + draw(rng, age);
        if (auto m = missing_cell(rng, 0.02)) {
          cells["V201507x"] = *m;
        } else {
          cells["V201507x"] = std::to_string(a);
          demo["V201507x"] = cells["V201507x"];
        }
      }
      const auto ideo = categorical("V201200", ideology, 0.05);
      // "Haven't thought much about it" is outside the answer set.
      if (ideo != 99 && rng.uniform01() < 0.03) {
        cells["V201200"] = "99";
        demo.erase("V201200");
      }
      const std::size_t group = demo.count("V201200") == 0 ? 1 : (ideo < 3 ? 0 : (ideo == 3 ? 1 : 2));
      categorical("V201231x", party_by_ideology[group], 0.01);
      categorical("V202406", interest, 0.005);
      categorical("V201452", church, 0.01);
      categorical("V202022", discuss, 0.01);

      for (const auto& q : cb.questions) {
        rss::GenerationRequest req;
        req.subject_id = i;
        req.question_code = q.code;
        req.demographics = demo;
        const auto completion = rss::mock_complete(req, spec, answer_seed);
        const auto coded = rss::code_completion(completion.text, q);
        std::string cell = coded.choice ? std::to_string(*coded.choice) : "-9";
        if (auto m = missing_cell(rng, 0.03)) cell = *m;
        if (q.kind == rss::QuestionKind::free_text_coded && rng.uniform01() < 0.025) {
          cell = rng.uniform01() < 0.7 ? "3" : "4";  // third-party candidates
        }
        cells[q.code] = cell;
      }

      std::vector<std::string> row{std::to_string(200000 + i)};
      for (std::size_t c = 1; c < header.size(); ++c) row.push_back(cells[header[c]]);
      rss::csv::write_row(out, row);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
