#include "vulnshot/llmclient.hpp"

#include <ctime>
#include <vector>

#include "vulnshot/errors.hpp"
#include "vulnshot/http.hpp"
#include "vulnshot/io.hpp"

namespace vulnshot {

void CompletionRequest::check() const {
  if (prompt.empty()) throw UsageError("completion prompt is empty");
  if (!(temperature >= 0.0)) throw UsageError("temperature must be >= 0");
  if (max_output_tokens == 0) throw UsageError("max_output_tokens must be positive");
}

nlohmann::json canonical_json(const CompletionRequest& req) {
  // nlohmann::json objects keep keys sorted, which fixes the byte layout.
  return {{"model_id", req.model_id},
          {"prompt", req.prompt},
          {"temperature", req.temperature},
          {"max_output_tokens", req.max_output_tokens}};
}

std::string cache_key(const CompletionRequest& req) { return sha256_hex(canonical_json(req).dump()); }

std::string first_shot_label_line(std::string_view prompt, std::string_view answer_label) {
  std::vector<std::size_t> starts;
  for (std::size_t pos = prompt.find(answer_label); pos != std::string_view::npos;
       pos = prompt.find(answer_label, pos + 1)) {
    if (pos > 0 && prompt[pos - 1] == '\n') starts.push_back(pos);
  }
  // The last occurrence is the empty answer slot for the test code.
  if (starts.size() < 2) throw NoShotError("prompt has no shot to parrot");
  std::size_t begin = starts.front() + answer_label.size();
  std::size_t end = prompt.find('\n', begin);
  if (end == std::string_view::npos) end = prompt.size();
  std::string_view line = prompt.substr(begin, end - begin);
  while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
  while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
  return std::string(line);
}

MockProvider::MockProvider(Mode mode, std::string text) : mode_(mode), text_(std::move(text)) {
  if (mode_ == Mode::kParrot && text_.empty()) text_ = "Vulnerabilities:";
}

std::string MockProvider::name() const {
  switch (mode_) {
    case Mode::kOracle: return "mock:oracle";
    case Mode::kParrot: return "mock:parrot";
    case Mode::kFixed: return "mock:fixed";
  }
  return "mock";
}

void MockProvider::bind_truth(std::string_view prompt, LabelSet truth) {
  std::string key = sha256_hex(prompt);
  std::lock_guard lock(mu_);
  truths_[std::move(key)] = truth;
}

void MockProvider::inject_failure(std::function<bool(const CompletionRequest&)> when,
                                  bool refusal) {
  std::lock_guard lock(mu_);
  fail_when_ = std::move(when);
  fail_refusal_ = refusal;
}

std::string MockProvider::generate(const CompletionRequest& req) {
  ++calls_;
  {
    std::lock_guard lock(mu_);
    if (fail_when_ && fail_when_(req)) {
      if (fail_refusal_) throw RefusalError("SAFETY");
      throw TransportError("injected transport failure");
    }
  }
  switch (mode_) {
    case Mode::kFixed:
      return text_;
    case Mode::kParrot:
      return first_shot_label_line(req.prompt, text_);
    case Mode::kOracle: {
      const std::string key = sha256_hex(req.prompt);
      std::lock_guard lock(mu_);
      auto it = truths_.find(key);
      if (it == truths_.end()) throw ProviderError("oracle mock has no truth bound to this prompt");
      return it->second.to_string();
    }
  }
  return {};
}

RemoteProvider::RemoteProvider(RemoteProviderConfig config)
    : config_(std::move(config)),
      api_key_(http::api_key_from_env(config_.api_key_env)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
  if (config_.endpoint.empty()) throw UsageError("provider endpoint is not configured");
}

std::string RemoteProvider::generate(const CompletionRequest& req) {
  req.check();
  std::string url = config_.endpoint;
  if (auto pos = url.find("{model}"); pos != std::string::npos) url.replace(pos, 7, req.model_id);

  nlohmann::json body = {
      {"contents", {{{"role", "user"}, {"parts", {{{"text", req.prompt}}}}}}},
      {"generationConfig",
       {{"temperature", req.temperature}, {"maxOutputTokens", req.max_output_tokens}}}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!api_key_.empty()) headers.emplace_back("x-goog-api-key", api_key_);
  const std::string payload = body.dump();

  auto response = http::with_retries({config_.retries, config_.backoff}, [&] {
    in_flight_.acquire();
    try {
      auto r = http::post_json(url, headers, payload, config_.timeout);
      in_flight_.release();
      return r;
    } catch (...) {
      in_flight_.release();
      throw;
    }
  });
  if (response.status != 200) {
    throw ProviderError("completion request failed with HTTP " + std::to_string(response.status) +
                        ": " + response.body);
  }

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(response.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProviderError(std::string("malformed completion response: ") + e.what());
  }
  if (auto fb = parsed.find("promptFeedback"); fb != parsed.end() && fb->contains("blockReason")) {
    throw RefusalError(fb->at("blockReason").dump());
  }
  auto candidates = parsed.find("candidates");
  if (candidates == parsed.end() || !candidates->is_array() || candidates->empty()) {
    throw RefusalError("no candidates in response: " + response.body);
  }
  const auto& first = candidates->front();
  std::string text;
  if (auto content = first.find("content"); content != first.end()) {
    for (const auto& part : content->value("parts", nlohmann::json::array())) {
      if (part.contains("text") && part["text"].is_string()) text += part["text"].get<std::string>();
    }
  }
  const std::string finish = first.value("finishReason", "");
  if (finish == "SAFETY" || finish == "RECITATION" || finish == "BLOCKLIST" ||
      finish == "PROHIBITED_CONTENT" || finish == "SPII") {
    throw RefusalError(finish);
  }
  return text;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw CacheError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  const auto path = entry_path(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    auto entry = nlohmann::json::parse(read_file(path));
    return entry.at("response").get<std::string>();
  } catch (const std::exception& e) {
    throw CacheError("corrupt cache entry " + path.string() + ": " + e.what());
  }
}

namespace {

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void ResponseCache::store(const std::string& key, const CompletionRequest& req,
                          const std::string& text) {
  nlohmann::json entry = {
      {"request", canonical_json(req)}, {"response", text}, {"timestamp", utc_timestamp()}};
  try {
    write_file_atomic(entry_path(key), entry.dump(2));
  } catch (const Error& e) {
    throw CacheError(std::string("cache write failed: ") + e.what());
  }
}

CacheStats ResponseCache::stats() const {
  CacheStats s;
  for (const auto& e : std::filesystem::directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".json") {
      ++s.entries;
      s.bytes += e.file_size();
    }
  }
  return s;
}

std::size_t ResponseCache::clear() {
  std::size_t removed = 0;
  std::vector<std::filesystem::path> doomed;
  for (const auto& e : std::filesystem::directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".json") doomed.push_back(e.path());
  }
  for (const auto& p : doomed) removed += std::filesystem::remove(p) ? 1 : 0;
  return removed;
}

CompletionResult complete(const CompletionRequest& req, Provider& provider, ResponseCache* cache) {
  req.check();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now() - start)
                                          .count());
  };
  std::string key;
  if (cache != nullptr) {
    key = cache_key(req);
    if (auto hit = cache->lookup(key)) return {std::move(*hit), true, elapsed_ms()};
  }
  std::string text = provider.generate(req);
  if (cache != nullptr) cache->store(key, req, text);
  return {std::move(text), false, elapsed_ms()};
}

}  // namespace vulnshot
