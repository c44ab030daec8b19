#include "rss/cache.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rss/error.hpp"

namespace rss {

namespace fs = std::filesystem;
using nlohmann::json;

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw BackendError(BackendError::Kind::io, "cannot create cache directory " + dir_.string());
}

fs::path ResponseCache::entry_path(const std::string& digest) const { return dir_ / (digest + ".json"); }

std::optional<RawCompletion> ResponseCache::get(const std::string& digest) const {
  std::ifstream in(entry_path(digest));
  if (!in) return std::nullopt;
  try {
    const json j = json::parse(in);
    RawCompletion c;
    c.text = j.at("text").get<std::string>();
    c.finish_reason = j.value("finish_reason", "");
    c.request_digest = digest;
    c.provider = Provider::cache;
    if (j.contains("prompt_tokens")) c.prompt_tokens = j["prompt_tokens"].get<std::int64_t>();
    if (j.contains("completion_tokens")) c.completion_tokens = j["completion_tokens"].get<std::int64_t>();
    return c;
  } catch (const json::exception&) {
    // A torn or foreign file is treated as a miss and overwritten later.
    return std::nullopt;
  }
}

void ResponseCache::put(const GenerationRequest& req, const RawCompletion& completion) {
  const std::string digest = completion.request_digest.empty() ? cache_key(req) : completion.request_digest;
  nlohmann::ordered_json j;
  j["digest"] = digest;
  j["text"] = completion.text;
  j["finish_reason"] = completion.finish_reason;
  j["provider"] = std::string(to_string(completion.provider));
  if (completion.prompt_tokens) j["prompt_tokens"] = *completion.prompt_tokens;
  if (completion.completion_tokens) j["completion_tokens"] = *completion.completion_tokens;

  const auto final_path = entry_path(digest);
  std::ostringstream tmp_name;
  tmp_name << digest << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const auto tmp_path = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp_path, std::ios::trunc);
    if (!out) throw BackendError(BackendError::Kind::io, "cannot write cache entry " + tmp_path.string());
    out << j.dump() << '\n';
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) throw BackendError(BackendError::Kind::io, "cannot commit cache entry " + final_path.string());

  nlohmann::ordered_json idx;
  idx["digest"] = digest;
  idx["model"] = req.model_id;
  idx["question_code"] = req.question_code;
  idx["subject_id"] = req.subject_id;
  std::lock_guard lock(index_mu_);
  std::ofstream index(dir_ / "index.jsonl", std::ios::app);
  index << idx.dump() << '\n';
}

RawCompletion CachingBackend::complete(const GenerationRequest& req) {
  const auto digest = cache_key(req);
  if (auto hit = cache_->get(digest)) {
    ++hits_;
    return *hit;
  }
  ++misses_;
  auto fresh = inner_->complete(req);
  fresh.request_digest = digest;
  cache_->put(req, fresh);
  return fresh;
}

}  // namespace rss
