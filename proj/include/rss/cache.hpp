#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "rss/backend.hpp"

namespace rss {

/// Content-addressed completion store: <dir>/<digest>.json holds one
/// completion, <dir>/index.jsonl lists every stored digest.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<RawCompletion> get(const std::string& digest) const;
  void put(const GenerationRequest& req, const RawCompletion& completion);

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& digest) const;

  std::filesystem::path dir_;
  std::mutex index_mu_;
};

/// Consults the cache before the inner backend and stores every fresh
/// completion.
class CachingBackend final : public CompletionBackend {
 public:
  CachingBackend(CompletionBackend& inner, ResponseCache& cache) : inner_(&inner), cache_(&cache) {}

  RawCompletion complete(const GenerationRequest& req) override;
  std::string identity() const override { return inner_->identity() + "+cache"; }

  std::size_t hits() const noexcept { return hits_; }
  std::size_t misses() const noexcept { return misses_; }

 private:
  CompletionBackend* inner_;
  ResponseCache* cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

}  // namespace rss
