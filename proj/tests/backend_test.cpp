#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rss/backend.hpp"
#include "rss/cache.hpp"
#include "rss/error.hpp"
#include "rss/mock.hpp"

namespace rss {
namespace {

MockModelSpec three_way(std::vector<double> base, std::vector<std::string> templates = {"1", "2", "3"}) {
  MockModelSpec spec;
  spec.questions["Q"] = MockQuestionModel{std::move(base), {}, std::move(templates)};
  return spec;
}

GenerationRequest request(std::uint64_t subject, std::string question = "Q") {
  GenerationRequest r;
  r.model_id = "m";
  r.system_text = "I am a man.";
  r.user_text = "Pick";
  r.subject_id = subject;
  r.question_code = std::move(question);
  return r;
}

std::vector<double> frequencies(const MockModelSpec& spec, std::size_t n, std::uint64_t seed,
                                std::map<std::string, std::string> demo = {}) {
  std::vector<double> f(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto req = request(i);
    req.demographics = demo;
    f[static_cast<std::size_t>(std::stoi(mock_complete(req, spec, seed).text) - 1)] += 1.0 / n;
  }
  return f;
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CacheKey, CoversPromptsParamsAndReplicate) {
  const auto base = request(0);
  const auto key = cache_key(base);
  EXPECT_EQ(key.size(), 64u);
  EXPECT_EQ(cache_key(base), key);

  auto meta = base;
  meta.subject_id = 99;
  meta.demographics["V201600"] = "1";
  EXPECT_EQ(cache_key(meta), key);  // batch metadata is not part of the request

  std::vector<GenerationRequest> variants(8, base);
  variants[0].model_id = "n";
  variants[1].system_text += " ";
  variants[2].user_text = "pick";
  variants[3].params.max_tokens = 2;
  variants[4].params.temperature = 0.7;
  variants[5].params.top_p = 0.9;
  variants[6].params.presence_penalty = 0.1;
  variants[7].replicate = 1;
  for (const auto& v : variants) EXPECT_NE(cache_key(v), key);
  auto r2 = base;
  r2.replicate = 2;
  EXPECT_NE(cache_key(r2), cache_key(variants[7]));
}

TEST(MockModel, DeterministicPerSeedSubjectAndQuestion) {
  const auto& cb = test::codebook();
  (void)cb;
  const auto spec = three_way({0.0, 0.0, 0.0});
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_EQ(mock_complete(request(s), spec, 5).text, mock_complete(request(s), spec, 5).text);
  }
  EXPECT_NE(frequencies(spec, 300, 5), frequencies(spec, 300, 6));
  EXPECT_NE(mock_draw_seed(1, 2, "Q"), mock_draw_seed(1, 2, "R"));
  EXPECT_NE(mock_draw_seed(1, 2, "Q"), mock_draw_seed(1, 3, "Q"));
}

TEST(MockModel, EqualWeightsGiveEqualFrequencies) {
  const auto f = frequencies(three_way({0.0, 0.0, 0.0}), 30000, 17);
  for (double x : f) EXPECT_NEAR(x, 1.0 / 3.0, 0.015);
}

TEST(MockModel, LargeModifierDominates) {
  auto spec = three_way({0.0, 0.0, 0.0});
  spec.questions["Q"].modifiers[{"V201231x", "7"}] = {0.0, 10.0, 0.0};
  const auto p = mock_choice_probabilities(spec.questions["Q"], {{"V201231x", "7"}});
  EXPECT_NEAR(p[1], std::exp(10.0) / (std::exp(10.0) + 2.0), 1e-12);
  EXPECT_GT(frequencies(spec, 10000, 3, {{"V201231x", "7"}})[1], 0.999);
  // Other values of the variable leave the base untouched.
  const auto q = mock_choice_probabilities(spec.questions["Q"], {{"V201231x", "1"}});
  EXPECT_NEAR(q[1], 1.0 / 3.0, 1e-12);
}

TEST(MockModel, SoftmaxOfSummedWeights) {
  MockQuestionModel m{{std::log(0.2), std::log(0.8)}, {}, {"a", "b"}};
  m.modifiers[{"G", "1"}] = {std::log(4.0), 0.0};
  const auto p = mock_choice_probabilities(m, {{"G", "1"}});
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
}

TEST(MockModel, EmptyTemplatesAreNeverEmitted) {
  const auto spec = three_way({5.0, 0.0, 0.0}, {"", "2", "3"});
  const auto f = frequencies(spec, 2000, 1);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(mock_choice_probabilities(spec.questions.at("Q"), {})[0], 0.0);
}

TEST(MockModel, UnknownQuestionIsABackendError) {
  const auto spec = three_way({0.0, 0.0, 0.0});
  try {
    mock_complete(request(0, "OTHER"), spec, 1);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::unknown_question);
  }
}

TEST(MockSpec, ValidationAndRoundTrip) {
  EXPECT_THROW(validate_mock_spec(three_way({0.0, 0.0})), ValidationError);
  EXPECT_THROW(validate_mock_spec(three_way({0.0, 0.0, 0.0}, {"", "", ""})), ValidationError);
  EXPECT_THROW(validate_mock_spec(three_way({0.0, std::nan(""), 0.0})), ValidationError);
  auto spec = three_way({0.1, -0.2, 0.3}, {"x", "", "z \"quoted\""});
  spec.questions["Q"].modifiers[{"V201600", "2"}] = {0.0, 0.5, -1.25};
  EXPECT_EQ(parse_mock_spec(serialize_mock_spec(spec)), spec);
  EXPECT_THROW(parse_mock_spec("{\"questions\": 3}"), ParseError);
}

TEST(MockSpec, ShippedPopulationSpecLoads) {
  const auto spec = load_mock_spec(test::population_spec_path());
  EXPECT_EQ(spec.questions.size(), 11u);
  EXPECT_EQ(spec.questions.at("V202073").templates, (std::vector<std::string>{"Joe Biden", "Donald Trump"}));
}

TEST(MockSpec, FitReproducesReferenceProportions) {
  const auto& cb = test::codebook();
  std::vector<ResponseDistribution> refs{
      reference_response_distribution(test::fixture_records(), "V202073", cb),
      reference_response_distribution(test::fixture_records(), "V201324", cb)};
  const auto spec = fit_mock_spec(cb, refs);
  for (const auto& ref : refs) {
    const auto p = mock_choice_probabilities(spec.questions.at(ref.question_code), {{"V201600", "1"}});
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], ref.proportions[k], 1e-12);
  }
  EXPECT_EQ(spec.questions.at("V202073").templates, (std::vector<std::string>{"Joe Biden", "Donald Trump"}));
  EXPECT_EQ(spec.questions.at("V201324").templates.back(), "5");
}

// Counts calls and the largest number of simultaneous calls.
class ProbeBackend final : public CompletionBackend {
 public:
  explicit ProbeBackend(std::chrono::milliseconds delay, std::optional<std::uint64_t> fail_on = std::nullopt)
      : delay_(delay), fail_on_(fail_on) {}
  RawCompletion complete(const GenerationRequest& req) override {
    const int now = ++active_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    ++calls_;
    std::this_thread::sleep_for(delay_);
    --active_;
    if (fail_on_ && req.subject_id == *fail_on_) throw BackendError(BackendError::Kind::io, "boom");
    RawCompletion out;
    out.text = std::to_string(req.subject_id);
    return out;
  }
  std::string identity() const override { return "probe"; }
  int peak() const { return peak_; }
  int calls() const { return calls_; }

 private:
  std::chrono::milliseconds delay_;
  std::optional<std::uint64_t> fail_on_;
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
  std::atomic<int> calls_{0};
};

std::vector<GenerationRequest> requests(std::size_t n) {
  std::vector<GenerationRequest> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(request(i));
    out.back().replicate = i;  // distinct cache keys
  }
  return out;
}

TEST(Dispatch, PreservesOrderAndRespectsInFlightBound) {
  ProbeBackend probe(std::chrono::milliseconds(2));
  const auto reqs = requests(60);
  const auto out = dispatch(reqs, probe, {4, 0.0});
  ASSERT_EQ(out.size(), reqs.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].text, std::to_string(i));
  EXPECT_LE(probe.peak(), 4);
  EXPECT_EQ(probe.calls(), 60);
}

TEST(Dispatch, SingleFlightIsSequential) {
  ProbeBackend probe(std::chrono::milliseconds(0));
  const auto reqs = requests(20);
  dispatch(reqs, probe, {1, 0.0});
  EXPECT_EQ(probe.peak(), 1);
}

TEST(Dispatch, FirstFailureIsRethrown) {
  ProbeBackend probe(std::chrono::milliseconds(1), 5);
  const auto reqs = requests(40);
  EXPECT_THROW(dispatch(reqs, probe, {2, 0.0}), BackendError);
  EXPECT_LT(probe.calls(), 40);
}

TEST(Dispatch, RateCapSpacesRequests) {
  ProbeBackend probe(std::chrono::milliseconds(0));
  const auto reqs = requests(6);
  const auto start = std::chrono::steady_clock::now();
  dispatch(reqs, probe, {3, 100.0});
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(45));
}

TEST(Cache, HitsNeedNoInnerCalls) {
  const auto dir = test::scratch_dir("cache_hits");
  ProbeBackend probe(std::chrono::milliseconds(0));
  {
    ResponseCache cache(dir);
    CachingBackend caching(probe, cache);
    const auto reqs = requests(10);
    dispatch(reqs, caching, {3, 0.0});
    EXPECT_EQ(caching.misses(), 10u);
    EXPECT_EQ(probe.calls(), 10);
  }
  ResponseCache reopened(dir);
  CachingBackend second(probe, reopened);
  const auto reqs = requests(10);
  const auto out = dispatch(reqs, second, {3, 0.0});
  EXPECT_EQ(probe.calls(), 10);  // nothing new reached the inner backend
  EXPECT_EQ(second.hits(), 10u);
  EXPECT_EQ(out[7].text, "7");
  EXPECT_EQ(out[7].provider, Provider::cache);

  std::ifstream index(dir / "index.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(index, line);) ++lines;
  EXPECT_EQ(lines, 10u);
}

TEST(Cache, MissingEntryIsAMiss) {
  ResponseCache cache(test::scratch_dir("cache_miss"));
  EXPECT_FALSE(cache.get(cache_key(request(0))).has_value());
}

TEST(MakeRequest, CopiesThePromptPair) {
  PromptPair pair;
  pair.system_text = "s";
  pair.user_text = "u";
  pair.params.max_tokens = 2;
  pair.params.model_id = "gpt-3.5-turbo";
  pair.subject_id = 8;
  pair.question_code = "V202073";
  pair.demographics = {{"V201600", "2"}};
  const auto r = make_request(pair, 3);
  EXPECT_EQ(r.model_id, "gpt-3.5-turbo");
  EXPECT_EQ(r.system_text, "s");
  EXPECT_EQ(r.user_text, "u");
  EXPECT_EQ(r.params.max_tokens, 2);
  EXPECT_EQ(r.subject_id, 8u);
  EXPECT_EQ(r.replicate, 3u);
  EXPECT_EQ(r.demographics.at("V201600"), "2");
}

}  // namespace
}  // namespace rss
