#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "rss/wire.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace rss {

using nlohmann::json;

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string header_value(const HttpResponse& r, std::string_view name) {
  for (const auto& [k, v] : r.headers) {
    if (k.size() == name.size() && std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return v;
    }
  }
  return {};
}

}  // namespace

HttpResponse HttpTransport::post(const std::string& url, const std::string& body, const HttpHeaders& headers) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(parts.path, h, body, "application/json");
  if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
  HttpResponse out;
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) out.headers.emplace_back(k, v);
  return out;
}

std::string serialize_wire_request(const GenerationRequest& req) {
  nlohmann::ordered_json j;
  j["model"] = req.model_id;
  j["messages"] = nlohmann::ordered_json::array({
      {{"role", "system"}, {"content", req.system_text}},
      {{"role", "user"}, {"content", req.user_text}},
  });
  j["max_tokens"] = req.params.max_tokens;
  j["temperature"] = req.params.temperature;
  j["top_p"] = req.params.top_p;
  j["frequency_penalty"] = req.params.frequency_penalty;
  j["presence_penalty"] = req.params.presence_penalty;
  return j.dump();
}

RawCompletion parse_wire_response(const std::string& body) {
  RawCompletion out;
  out.provider = Provider::wire;
  try {
    const json j = json::parse(body);
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    out.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) out.finish_reason = *it;
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
      if (it->contains("prompt_tokens")) out.prompt_tokens = (*it)["prompt_tokens"].get<std::int64_t>();
      if (it->contains("completion_tokens")) out.completion_tokens = (*it)["completion_tokens"].get<std::int64_t>();
    }
  } catch (const json::exception& e) {
    throw BackendError(BackendError::Kind::malformed_response, std::string("malformed completion response: ") + e.what());
  }
  return out;
}

bool is_retryable_status(int status) noexcept { return status == 408 || status == 429 || status >= 500; }

std::chrono::milliseconds backoff_delay(const WireConfig& cfg, int attempt, double jitter01) {
  const double base = static_cast<double>(cfg.backoff_base.count());
  const double exp = std::min(base * std::pow(2.0, attempt), static_cast<double>(cfg.backoff_max.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(exp + jitter01 * base));
}

WireBackend::WireBackend(WireConfig cfg, std::string api_key, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      api_key_(std::move(api_key)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      jitter_rng_(cfg_.jitter_seed) {
  if (!transport_) transport_ = std::make_shared<HttpTransport>(cfg_.timeout);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string WireBackend::credential_from_env(const WireConfig& cfg) {
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (!key || !*key) throw BackendError(BackendError::Kind::auth, "environment variable " + cfg.api_key_env + " is not set");
  return key;
}

double WireBackend::next_jitter() {
  std::lock_guard lock(jitter_mu_);
  return jitter_rng_.uniform01();
}

RawCompletion WireBackend::complete(const GenerationRequest& req) {
  if (req.user_text.empty()) throw BackendError(BackendError::Kind::request_rejected, "empty user prompt");
  const std::string body = serialize_wire_request(req);
  const HttpHeaders headers{{"Authorization", "Bearer " + api_key_}, {"Content-Type", "application/json"}};

  std::string last_failure;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    const auto started = std::chrono::steady_clock::now();
    std::chrono::milliseconds retry_after{0};
    try {
      const auto res = transport_->post(cfg_.endpoint, body, headers);
      if (res.status >= 200 && res.status < 300) {
        auto out = parse_wire_response(res.body);
        out.latency = std::chrono::steady_clock::now() - started;
        return out;
      }
      if (res.status == 401 || res.status == 403) {
        throw BackendError(BackendError::Kind::auth, "provider rejected credential (HTTP " + std::to_string(res.status) + ")");
      }
      if (!is_retryable_status(res.status)) {
        throw BackendError(BackendError::Kind::request_rejected,
                           "provider rejected request (HTTP " + std::to_string(res.status) + "): " + res.body);
      }
      last_failure = "HTTP " + std::to_string(res.status);
      const auto ra = header_value(res, "retry-after");
      int seconds = 0;
      if (!ra.empty() && std::from_chars(ra.data(), ra.data() + ra.size(), seconds).ec == std::errc{}) {
        retry_after = std::chrono::seconds(seconds);
      }
    } catch (const TransportError& e) {
      last_failure = e.what();
    }
    if (attempt < cfg_.max_retries) sleeper_(std::max(backoff_delay(cfg_, attempt, next_jitter()), retry_after));
  }
  throw BackendError(BackendError::Kind::retry_exhausted, "retry budget exhausted after " +
                                                             std::to_string(cfg_.max_retries + 1) +
                                                             " attempts; last failure: " + last_failure);
}

}  // namespace rss
