#include "rss/backend.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <openssl/evp.h>

#include <json.hpp>

#include "rss/error.hpp"

namespace rss {

std::string_view to_string(Provider p) {
  switch (p) {
    case Provider::wire: return "wire";
    case Provider::mock: return "mock";
    case Provider::cache: return "cache";
  }
  return "unknown";
}

GenerationRequest make_request(const PromptPair& pair, std::optional<std::uint64_t> replicate) {
  GenerationRequest req;
  req.model_id = pair.params.model_id;
  req.system_text = pair.system_text;
  req.user_text = pair.user_text;
  req.params = pair.params;
  req.subject_id = pair.subject_id;
  req.question_code = pair.question_code;
  req.demographics = pair.demographics;
  req.replicate = replicate;
  return req;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string canonical_request(const GenerationRequest& req) {
  nlohmann::ordered_json j;
  j["model"] = req.model_id;
  j["system"] = req.system_text;
  j["user"] = req.user_text;
  j["max_tokens"] = req.params.max_tokens;
  j["temperature"] = req.params.temperature;
  j["top_p"] = req.params.top_p;
  j["frequency_penalty"] = req.params.frequency_penalty;
  j["presence_penalty"] = req.params.presence_penalty;
  j["replicate"] = req.replicate ? nlohmann::ordered_json(*req.replicate) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

std::string cache_key(const GenerationRequest& req) { return sha256_hex(canonical_request(req)); }

namespace {

class RateLimiter {
 public:
  explicit RateLimiter(double per_second) : per_second_(per_second) {}

  void acquire() {
    if (per_second_ <= 0.0) return;
    using clock = std::chrono::steady_clock;
    const auto interval = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / per_second_));
    clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = clock::now();
      if (next_ < now) next_ = now;
      slot = next_;
      next_ += interval;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  double per_second_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

}  // namespace

std::vector<RawCompletion> dispatch(std::span<const GenerationRequest> requests, CompletionBackend& backend,
                                    const DispatchOptions& options) {
  std::vector<RawCompletion> out(requests.size());
  RateLimiter limiter(options.rate_per_second);

  const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(options.in_flight, 1), requests.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      limiter.acquire();
      out[i] = backend.complete(requests[i]);
    }
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto work = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        limiter.acquire();
        out[i] = backend.complete(requests[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace rss
