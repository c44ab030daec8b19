#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rss/promptgen.hpp"

namespace rss {

struct GenerationRequest {
  std::string model_id;
  std::string system_text;
  std::string user_text;
  GenerationParams params;
  // Batch metadata. Not sent on the wire.
  std::uint64_t subject_id = 0;
  std::string question_code;
  std::map<std::string, std::string> demographics;
  // Distinguishes independent draws for otherwise identical prompts.
  std::optional<std::uint64_t> replicate;
};

enum class Provider { wire, mock, cache };

std::string_view to_string(Provider p);

struct RawCompletion {
  std::string text;
  std::string finish_reason;
  std::string request_digest;
  std::chrono::nanoseconds latency{0};
  Provider provider = Provider::mock;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
};

/// Request for one prompt pair; the model id comes from the pair's params.
GenerationRequest make_request(const PromptPair& pair, std::optional<std::uint64_t> replicate = std::nullopt);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Canonical text hashed by cache_key: model, both prompts, every generation
/// parameter and the replicate index.
std::string canonical_request(const GenerationRequest& req);

/// Stable content digest of a request (SHA-256 of canonical_request).
std::string cache_key(const GenerationRequest& req);

/// Completion provider. Implementations must be safe to call concurrently.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual RawCompletion complete(const GenerationRequest& req) = 0;
  virtual std::string identity() const = 0;
};

struct DispatchOptions {
  std::size_t in_flight = 1;     // maximum simultaneously outstanding requests
  double rate_per_second = 0.0;  // 0 disables the rate cap
};

/// Completes every request with at most options.in_flight outstanding at a
/// time. Output order matches input order. The first failure stops dispatch
/// of further requests and is rethrown once in-flight work drains.
std::vector<RawCompletion> dispatch(std::span<const GenerationRequest> requests, CompletionBackend& backend,
                                    const DispatchOptions& options);

}  // namespace rss
