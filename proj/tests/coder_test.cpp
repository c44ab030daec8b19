#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rss/coder.hpp"
#include "rss/error.hpp"

namespace rss {
namespace {

const QuestionSpec& election() { return test::codebook().question("V202073"); }
const QuestionSpec& economy() { return test::codebook().question("V201324"); }

const std::vector<std::string> kBidenPhrases{"Joe Biden", "Joe", "Biden", "the Democratic", "a Democratic"};
const std::vector<std::string> kTrumpPhrases{"Donald Trump", "Donald", "Trump", "the Republican", "a Republican"};

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}
std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

TEST(Coder, EveryPublishedPhraseCodesToItsCandidate) {
  for (const auto& [phrases, target] : {std::pair{&kBidenPhrases, 1}, std::pair{&kTrumpPhrases, 2}}) {
    for (const auto& p : *phrases) {
      for (const auto& text : {p, upper(p), lower(p), " " + p + ".", p + "\n", "\"" + p + "\""}) {
        const auto out = code_free_text(text, election());
        ASSERT_TRUE(out.choice.has_value()) << text;
        EXPECT_EQ(*out.choice, target) << text;
        EXPECT_TRUE(out.matched_rule.has_value());
      }
    }
  }
}

TEST(Coder, PhrasesMustSitOnWordBoundaries) {
  for (const char* text : {"Joey", "Bidenomics", "Trumpet", "Donaldson", "undemocratic"}) {
    EXPECT_TRUE(code_free_text(text, election()).is_missing()) << text;
  }
}

TEST(Coder, UnmatchedTextIsMissing) {
  for (const char* text : {"", "   ", "nobody", "Jo Jorgensen", "I did not vote", "a third"}) {
    EXPECT_TRUE(code_free_text(text, election()).is_missing()) << text;
  }
}

TEST(Coder, LongestPhraseThenEarliestWins) {
  EXPECT_EQ(code_free_text("Donald Trump, not Joe", election()).choice, 2);
  EXPECT_EQ(code_free_text("Joe, not Donald Trump", election()).choice, 2);  // longer phrase wins
  EXPECT_EQ(code_free_text("Biden Trump", election()).choice, 1);            // equal length: earliest
  EXPECT_EQ(code_free_text("Trump Biden", election()).choice, 2);
  EXPECT_EQ(code_free_text("the Democratic", election()).matched_rule, "the Democratic");
}

TEST(Coder, EnumeratedAnswers) {
  EXPECT_EQ(code_enumerated("3", economy()).choice, 3);
  EXPECT_EQ(code_enumerated(" 2.", economy()).choice, 2);
  EXPECT_EQ(code_enumerated("Answer: 4", economy()).choice, 4);
  EXPECT_EQ(code_enumerated("5", economy()).choice, 5);
  for (const char* text : {"6", "0", "-1", "12", "abc", "", "Very good"}) {
    EXPECT_TRUE(code_enumerated(text, economy()).is_missing()) << text;
  }
  const auto& three = test::codebook().question("V202371");
  EXPECT_TRUE(code_enumerated("4", three).is_missing());
  EXPECT_EQ(code_enumerated("3", three).choice, 3);
}

TEST(Coder, DispatchFollowsQuestionKind) {
  EXPECT_EQ(code_completion("Biden", election()).choice, 1);
  EXPECT_EQ(code_completion("1", economy()).choice, 1);
  EXPECT_TRUE(code_completion("1", election()).is_missing());
}

TEST(Coder, CountsPlusMissingEqualCohortSize) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> pool{"Joe Biden", "Trump", "idk", "", "a Republican", "Jo", "the Democratic party"};
  for (std::size_t n : {1u, 7u, 100u, 5441u}) {
    std::vector<CodedAnswer> answers;
    for (std::size_t i = 0; i < n; ++i) {
      answers.push_back({i, "V202073", code_completion(pool[rng() % pool.size()], election())});
    }
    answers.front().outcome = code_completion("Biden", election());  // at least one valid
    const auto d = aggregate(answers, election());
    std::int64_t total = d.n_missing;
    for (auto c : *d.counts) total += c;
    EXPECT_EQ(total, static_cast<std::int64_t>(n));
    EXPECT_EQ(d.role, DistributionRole::generated);
  }
}

TEST(Coder, AggregateRejectsForeignAndEmptyInput) {
  std::vector<CodedAnswer> foreign{{0, "V201324", {1, std::nullopt}}};
  EXPECT_THROW(aggregate(foreign, election()), DataError);
  std::vector<CodedAnswer> none{{0, "V202073", {}}, {1, "V202073", {}}};
  EXPECT_THROW(aggregate(none, election()), DataError);
}

TEST(Coder, AuditCsv) {
  std::vector<CodedAnswer> answers{{3, "V202073", code_completion("Joe", election())},
                                   {4, "V202073", code_completion("?", election())}};
  std::ostringstream out;
  write_coded_answers_csv(out, answers);
  EXPECT_EQ(out.str(), "subject_id,question_code,outcome,matched_rule\n3,V202073,1,Joe\n4,V202073,missing,\n");
}

}  // namespace
}  // namespace rss
