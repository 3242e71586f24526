#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

#include "vulnshot/cwe.hpp"

namespace vulnshot {

struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.0;
  std::uint32_t max_output_tokens = 128;

  /// Throws UsageError on an empty prompt, negative temperature or zero
  /// token budget.
  void check() const;
};

/// Canonical serialization hashed into the cache key.
nlohmann::json canonical_json(const CompletionRequest& req);
/// Hex SHA-256 of canonical_json(req).dump().
std::string cache_key(const CompletionRequest& req);

struct CompletionResult {
  std::string text;
  bool cached = false;
  std::uint64_t latency_ms = 0;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t max_in_flight() const { return 1; }
  /// Raw model text for the request. Throws ProviderError subtypes.
  virtual std::string generate(const CompletionRequest& req) = 0;
  /// Ground truth for the test sample behind `prompt`. Only the oracle
  /// mock reads it; other providers ignore it.
  virtual void bind_truth(std::string_view /*prompt*/, LabelSet /*truth*/) {}
};

/// Deterministic stand-in for a model.
///  - oracle: replies with the truth bound to the prompt via bind_truth.
///  - parrot: replies with the label line of the first shot in the prompt.
///  - fixed:  replies with a constant.
class MockProvider final : public Provider {
 public:
  enum class Mode { kOracle, kParrot, kFixed };

  /// `text` is the fixed reply, or the answer label the parrot looks for
  /// (defaults to "Vulnerabilities:").
  explicit MockProvider(Mode mode, std::string text = {});

  static MockProvider oracle() { return MockProvider(Mode::kOracle); }
  static MockProvider parrot() { return MockProvider(Mode::kParrot); }
  static MockProvider fixed(std::string text) { return MockProvider(Mode::kFixed, std::move(text)); }

  std::string name() const override;
  std::size_t max_in_flight() const override { return 4; }
  std::string generate(const CompletionRequest& req) override;
  void bind_truth(std::string_view prompt, LabelSet truth) override;

  Mode mode() const { return mode_; }
  /// Number of generate() calls so far, failed ones included.
  std::size_t calls() const { return calls_.load(); }

  /// Makes generate() fail for requests matching `when`: with a
  /// RefusalError if `refusal`, else a TransportError.
  void inject_failure(std::function<bool(const CompletionRequest&)> when, bool refusal = false);

 private:
  Mode mode_;
  std::string text_;  // fixed reply, or the answer label for parrot
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::unordered_map<std::string, LabelSet> truths_;  // prompt hash -> truth
  std::function<bool(const CompletionRequest&)> fail_when_;
  bool fail_refusal_ = false;
};

/// Labels text of the first shot block in a rendered prompt. Throws
/// NoShotError when the prompt has no shot.
std::string first_shot_label_line(std::string_view prompt,
                                  std::string_view answer_label = "Vulnerabilities:");

struct RemoteProviderConfig {
  /// "{model}" is replaced by the model id.
  std::string endpoint =
      "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent";
  std::string api_key_env = "GEMINI_API_KEY";
  std::chrono::seconds timeout{30};
  int retries = 3;
  std::chrono::milliseconds backoff{500};
  std::size_t max_in_flight = 4;
};

/// Chat-completion client speaking the generateContent JSON dialect.
/// Safety blocks and empty candidate lists surface as RefusalError.
class RemoteProvider final : public Provider {
 public:
  explicit RemoteProvider(RemoteProviderConfig config);

  std::string name() const override { return "remote"; }
  std::size_t max_in_flight() const override { return config_.max_in_flight; }
  std::string generate(const CompletionRequest& req) override;

 private:
  RemoteProviderConfig config_;
  std::string api_key_;
  std::counting_semaphore<> in_flight_;
};

struct CacheStats {
  std::size_t entries = 0;
  std::uintmax_t bytes = 0;
};

/// Content-addressed response store: one JSON file per key,
/// {"request", "response", "timestamp"}. Writes go through a temp file
/// and rename, so concurrent writers of the same key are safe.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const CompletionRequest& req, const std::string& text);

  CacheStats stats() const;
  /// Removes every entry; returns how many were removed.
  std::size_t clear();

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const;
  std::filesystem::path dir_;
};

/// Cache-first completion. `cache` may be null.
CompletionResult complete(const CompletionRequest& req, Provider& provider, ResponseCache* cache);

}  // namespace vulnshot
