#include <cstdlib>
#include <deque>

#include <gtest/gtest.h>

#include "fake_endpoint.hpp"
#include "fixtures.hpp"
#include "rss/error.hpp"
#include "rss/wire.hpp"

namespace rss {
namespace {

// Scripted transport: pops one outcome per call; status 0 means a
// transport failure.
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::deque<HttpResponse> script) : script_(std::move(script)) {}
  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) override {
    urls.push_back(url);
    bodies.push_back(body);
    last_headers = headers;
    if (script_.empty()) throw TransportError("script exhausted");
    auto next = script_.front();
    script_.pop_front();
    if (next.status == 0) throw TransportError("connection reset");
    return next;
  }
  std::vector<std::string> urls;
  std::vector<std::string> bodies;
  HttpHeaders last_headers;

 private:
  std::deque<HttpResponse> script_;
};

const std::string kOkBody =
    R"({"choices":[{"message":{"role":"assistant","content":"Joe Biden"},"finish_reason":"length"}],)"
    R"("usage":{"prompt_tokens":57,"completion_tokens":2}})";

GenerationRequest election_request() {
  GenerationRequest r;
  r.model_id = "gpt-3.5-turbo";
  r.system_text = "Racially, I am white.\nI attend church. \xe2\x80\x9cquoted\xe2\x80\x9d \\ \"x\"";
  r.user_text = "In the 2020 presidential election, Donald Trump is the Republican candidate, and I voted for";
  r.params.max_tokens = 2;
  r.question_code = "V202073";
  return r;
}

struct Harness {
  std::shared_ptr<ScriptedTransport> transport;
  std::vector<std::chrono::milliseconds> sleeps;
  std::unique_ptr<WireBackend> backend;

  explicit Harness(std::deque<HttpResponse> script, int max_retries = 3) {
    transport = std::make_shared<ScriptedTransport>(std::move(script));
    WireConfig cfg;
    cfg.endpoint = "https://example.invalid/v1/chat/completions";
    cfg.max_retries = max_retries;
    cfg.backoff_base = std::chrono::milliseconds(100);
    cfg.backoff_max = std::chrono::milliseconds(1000);
    backend = std::make_unique<WireBackend>(cfg, "sk-test", transport,
                                            [this](std::chrono::milliseconds d) { sleeps.push_back(d); });
  }
};

TEST(WireFormat, RequestBodyCarriesPromptsUnchanged) {
  const auto req = election_request();
  const auto j = nlohmann::json::parse(serialize_wire_request(req));
  EXPECT_EQ(j["model"], "gpt-3.5-turbo");
  ASSERT_EQ(j["messages"].size(), 2u);
  EXPECT_EQ(j["messages"][0]["role"], "system");
  EXPECT_EQ(j["messages"][0]["content"].get<std::string>(), req.system_text);
  EXPECT_EQ(j["messages"][1]["role"], "user");
  EXPECT_EQ(j["messages"][1]["content"].get<std::string>(), req.user_text);
  EXPECT_EQ(j["max_tokens"], 2);
  EXPECT_EQ(j["temperature"], 1.0);
  EXPECT_EQ(j["top_p"], 1.0);
  EXPECT_EQ(j["frequency_penalty"], 0.0);
  EXPECT_EQ(j["presence_penalty"], 0.0);
  EXPECT_FALSE(j.contains("subject_id"));
}

TEST(WireFormat, ResponseParsing) {
  const auto out = parse_wire_response(kOkBody);
  EXPECT_EQ(out.text, "Joe Biden");
  EXPECT_EQ(out.finish_reason, "length");
  EXPECT_EQ(out.prompt_tokens, 57);
  EXPECT_EQ(out.completion_tokens, 2);
  EXPECT_EQ(out.provider, Provider::wire);
  for (const char* bad : {"", "{}", R"({"choices":[]})", R"({"choices":[{"message":{}}]})", "<html>"}) {
    try {
      parse_wire_response(bad);
      ADD_FAILURE() << bad;
    } catch (const BackendError& e) {
      EXPECT_EQ(e.kind(), BackendError::Kind::malformed_response);
    }
  }
}

TEST(WireRetry, RetryableStatuses) {
  for (int s : {408, 429, 500, 502, 503}) EXPECT_TRUE(is_retryable_status(s)) << s;
  for (int s : {200, 400, 401, 403, 404, 422}) EXPECT_FALSE(is_retryable_status(s)) << s;
}

TEST(WireRetry, BackoffIsExponentialAndCapped) {
  WireConfig cfg;
  cfg.backoff_base = std::chrono::milliseconds(100);
  cfg.backoff_max = std::chrono::milliseconds(1000);
  EXPECT_EQ(backoff_delay(cfg, 0, 0.0).count(), 100);
  EXPECT_EQ(backoff_delay(cfg, 1, 0.0).count(), 200);
  EXPECT_EQ(backoff_delay(cfg, 3, 0.0).count(), 800);
  EXPECT_EQ(backoff_delay(cfg, 8, 0.0).count(), 1000);
  EXPECT_EQ(backoff_delay(cfg, 0, 0.5).count(), 150);
}

TEST(WireRetry, RecoversFromTransientFailures) {
  Harness h({{429, "slow down", {{"Retry-After", "2"}}}, {0, "", {}}, {503, "", {}}, {200, kOkBody, {}}});
  const auto out = h.backend->complete(election_request());
  EXPECT_EQ(out.text, "Joe Biden");
  EXPECT_EQ(h.transport->bodies.size(), 4u);
  ASSERT_EQ(h.sleeps.size(), 3u);
  EXPECT_GE(h.sleeps[0], std::chrono::milliseconds(2000));  // Retry-After wins over a shorter backoff
  EXPECT_GE(h.sleeps[1], std::chrono::milliseconds(200));
  EXPECT_LT(h.sleeps[1], std::chrono::milliseconds(300));
  for (const auto& b : h.transport->bodies) EXPECT_EQ(b, h.transport->bodies.front());  // identical resends
}

TEST(WireRetry, BudgetExhaustion) {
  Harness h({{500, "", {}}, {500, "", {}}, {500, "", {}}}, 2);
  try {
    h.backend->complete(election_request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::retry_exhausted);
  }
  EXPECT_EQ(h.transport->bodies.size(), 3u);
  EXPECT_EQ(h.sleeps.size(), 2u);
}

TEST(WireRetry, AuthFailuresAreNotRetried) {
  for (int status : {401, 403}) {
    Harness h({{status, "no", {}}, {200, kOkBody, {}}});
    try {
      h.backend->complete(election_request());
      FAIL();
    } catch (const BackendError& e) {
      EXPECT_EQ(e.kind(), BackendError::Kind::auth);
    }
    EXPECT_EQ(h.transport->bodies.size(), 1u);
  }
}

TEST(WireRetry, ClientErrorsAreRejected) {
  Harness h({{400, "bad", {}}});
  try {
    h.backend->complete(election_request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::request_rejected);
  }
}

TEST(WireAuth, CredentialTravelsOnlyInTheHeader) {
  Harness h({{200, kOkBody, {}}});
  h.backend->complete(election_request());
  bool found = false;
  for (const auto& [k, v] : h.transport->last_headers) found |= (k == "Authorization" && v == "Bearer sk-test");
  EXPECT_TRUE(found);
  EXPECT_EQ(h.transport->bodies.front().find("sk-test"), std::string::npos);
}

TEST(WireAuth, CredentialComesFromTheEnvironment) {
  WireConfig cfg;
  cfg.api_key_env = "RSS_TEST_KEY_THAT_IS_UNSET";
  ::unsetenv(cfg.api_key_env.c_str());
  try {
    WireBackend::credential_from_env(cfg);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::auth);
  }
  ::setenv(cfg.api_key_env.c_str(), "sk-env", 1);
  EXPECT_EQ(WireBackend::credential_from_env(cfg), "sk-env");
  ::unsetenv(cfg.api_key_env.c_str());
}

TEST(WireHttp, TalksToALocalEndpoint) {
  test::FakeChatEndpoint endpoint;
  WireConfig cfg;
  cfg.endpoint = endpoint.url();
  cfg.max_retries = 0;
  WireBackend backend(cfg, "sk-local", std::make_shared<HttpTransport>(std::chrono::seconds(5)));
  const auto req = election_request();
  const auto out = backend.complete(req);
  EXPECT_EQ(out.text, " Joe Biden");
  EXPECT_EQ(out.prompt_tokens, 60);
  const auto bodies = endpoint.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(bodies[0]["messages"][0]["content"].get<std::string>(), req.system_text);
  EXPECT_EQ(endpoint.authorizations()[0], "Bearer sk-local");
}

TEST(WireHttp, UnreachableEndpointIsATransportError) {
  HttpTransport transport(std::chrono::seconds(1));
  EXPECT_THROW(transport.post("http://127.0.0.1:1/v1/chat/completions", "{}", {}), TransportError);
  EXPECT_THROW(transport.post("not a url", "{}", {}), Error);
}

}  // namespace
}  // namespace rss
