#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "goldens.hpp"
#include "rss/error.hpp"
#include "rss/promptgen.hpp"

namespace rss {
namespace {

const QuestionSpec& election() { return test::codebook().question("V202073"); }
const QuestionSpec& economy() { return test::codebook().question("V201324"); }

TEST(PromptGolden, ElectionRespondentOne) {
  const auto s = test::subject(test::kRespondent1);
  EXPECT_EQ(render_system_prompt(s, test::codebook()), test::kRespondent1System);
  EXPECT_EQ(render_user_prompt(election()), test::kElectionUser);
}

TEST(PromptGolden, ElectionRespondentTwo) {
  const auto s = test::subject(test::kRespondent2);
  EXPECT_EQ(render_system_prompt(s, test::codebook()), test::kRespondent2System);
}

TEST(PromptGolden, EconomyWithDatePrefix) {
  const auto s = test::subject(test::kEconomyRespondent);
  ASSERT_TRUE(economy().date_prefix.has_value());
  EXPECT_EQ(render_system_prompt(s, test::codebook(), *economy().date_prefix), test::kEconomySystem);
  EXPECT_EQ(render_user_prompt(economy()), test::kEconomyUser);
}

TEST(Promptgen, MissingVariablesEmitNoSentence) {
  auto assignment = test::kRespondent1;
  assignment.erase("V201231x");
  assignment.erase("V201507x");
  EXPECT_EQ(render_system_prompt(test::subject(assignment), test::codebook()),
            "Racially, I am black. I like to discuss politics with my family and friends. Ideologically, I am "
            "strongly liberal. I do not attend church. I am a man. I am highly interested in politics.");
  EXPECT_EQ(render_system_prompt(test::subject({}), test::codebook()), "");
  EXPECT_EQ(render_system_prompt(test::subject({}), test::codebook(), "Today is November 3, 2020."),
            "Today is November 3, 2020.");
}

TEST(Promptgen, EveryPartyPhrase) {
  const std::vector<std::string> expected{
      "Politically, I am a strong democrat.",
      "Politically, I am a democrat.",
      "Politically, I am an independent who leans Democratic.",
      "Politically, I am an independent.",
      "Politically, I am an independent who leans Republican.",
      "Politically, I am a Republican.",
      "Politically, I am a strong Republican."};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(render_system_prompt(test::subject({{"V201231x", std::to_string(i + 1)}}), test::codebook()),
              expected[i]);
  }
}

TEST(Promptgen, UnknownValueIsRejected) {
  EXPECT_THROW(render_system_prompt(test::subject({{"V201231x", "9"}}), test::codebook()), Error);
}

TEST(Promptgen, ReversedVariantSwapsCandidates) {
  EXPECT_EQ(render_user_prompt(election(), PromptVariant::reversed_order),
            "In the 2020 presidential election, Joe Biden is the Democratic candidate, and Donald Trump is the "
            "Republican candidate, and I voted for");
  EXPECT_THROW(render_user_prompt(economy(), PromptVariant::reversed_order), ValidationError);
  auto three = election();
  three.candidate_clauses.push_back("Jo Jorgensen is the Libertarian candidate");
  EXPECT_THROW(render_user_prompt(three, PromptVariant::reversed_order), ValidationError);
}

TEST(Promptgen, VariantNames) {
  EXPECT_EQ(prompt_variant_from("standard"), PromptVariant::standard);
  EXPECT_EQ(prompt_variant_from("reversed"), PromptVariant::reversed_order);
  EXPECT_EQ(to_string(PromptVariant::reversed_order), "reversed");
  EXPECT_THROW(prompt_variant_from("sideways"), Error);
}

TEST(PromptBatch, MaxTokensFollowTheQuestion) {
  const std::vector<SiliconSubject> cohort{test::subject(test::kRespondent1, 0), test::subject(test::kRespondent2, 1)};
  BatchSettings settings;
  const auto vote = build_prompt_batch(cohort, election(), test::codebook(), settings);
  ASSERT_EQ(vote.size(), 2u);
  EXPECT_EQ(vote[0].params.max_tokens, 2);
  EXPECT_EQ(vote[1].subject_id, 1u);
  EXPECT_EQ(vote[1].system_text, test::kRespondent2System);
  EXPECT_EQ(vote[1].demographics, test::kRespondent2);
  EXPECT_EQ(vote[0].params.temperature, 1.0);
  EXPECT_EQ(vote[0].params.top_p, 1.0);
  EXPECT_EQ(vote[0].params.frequency_penalty, 0.0);
  EXPECT_EQ(vote[0].params.presence_penalty, 0.0);

  const auto econ = build_prompt_batch(cohort, economy(), test::codebook(), settings);
  EXPECT_EQ(econ[0].params.max_tokens, 1);

  settings.max_tokens_override = 5;
  EXPECT_EQ(build_prompt_batch(cohort, economy(), test::codebook(), settings)[0].params.max_tokens, 5);
}

TEST(PromptBatch, DatePrefixIsPrepended) {
  const std::vector<SiliconSubject> cohort{test::subject(test::kEconomyRespondent)};
  BatchSettings settings;
  settings.date_prefix = *economy().date_prefix;
  const auto batch = build_prompt_batch(cohort, economy(), test::codebook(), settings);
  EXPECT_EQ(batch[0].system_text, test::kEconomySystem);
  EXPECT_EQ(batch[0].user_text, test::kEconomyUser);
}

TEST(PromptBatch, EmptyCohortIsAnError) {
  EXPECT_THROW(build_prompt_batch({}, election(), test::codebook(), BatchSettings{}), Error);
}

TEST(PromptBatch, JsonlCarriesPromptsVerbatim) {
  const std::vector<SiliconSubject> cohort{test::subject(test::kEconomyRespondent, 4)};
  const auto batch = build_prompt_batch(cohort, economy(), test::codebook(), BatchSettings{});
  std::ostringstream out;
  write_prompt_batch_jsonl(out, batch);
  const auto line = nlohmann::json::parse(out.str());
  EXPECT_EQ(line["subject_id"], 4);
  EXPECT_EQ(line["question_code"], "V201324");
  EXPECT_EQ(line["user_text"], test::kEconomyUser);
  EXPECT_EQ(line["variant"], "standard");
}

}  // namespace
}  // namespace rss
