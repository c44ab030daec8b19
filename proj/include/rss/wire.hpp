#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "rss/backend.hpp"
#include "rss/error.hpp"
#include "rss/rng.hpp"

namespace rss {

struct HttpResponse {
  int status = 0;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

/// Network or timeout failure below the HTTP layer; always retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError when no HTTP response was received.
  virtual HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) = 0;
};

/// cpp-httplib transport for http:// and https:// URLs.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}
  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) override;

 private:
  std::chrono::seconds timeout_;
};

struct WireConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 5;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_max{30000};
  std::chrono::seconds timeout{60};
  std::size_t in_flight = 8;
  double rate_per_second = 0.0;
  std::uint64_t jitter_seed = 0;
};

/// Chat-completions request body. Message contents are the prompt texts
/// unchanged.
std::string serialize_wire_request(const GenerationRequest& req);

/// Reads choices[0].message.content, finish_reason and usage. Throws
/// BackendError(malformed_response).
RawCompletion parse_wire_response(const std::string& body);

bool is_retryable_status(int status) noexcept;

/// Delay before retry number `attempt` (0-based): base * 2^attempt capped at
/// max, plus uniform jitter in [0, base).
std::chrono::milliseconds backoff_delay(const WireConfig& cfg, int attempt, double jitter01);

class WireBackend final : public CompletionBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  WireBackend(WireConfig cfg, std::string api_key, std::shared_ptr<Transport> transport, Sleeper sleeper = {});

  RawCompletion complete(const GenerationRequest& req) override;
  std::string identity() const override { return "wire:" + cfg_.endpoint; }

  /// Reads the credential from the configured environment variable; throws
  /// BackendError(auth) when unset.
  static std::string credential_from_env(const WireConfig& cfg);

 private:
  double next_jitter();

  WireConfig cfg_;
  std::string api_key_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::mutex jitter_mu_;
  Xoshiro256 jitter_rng_;
};

}  // namespace rss
