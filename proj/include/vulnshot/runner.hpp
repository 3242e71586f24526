#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnshot/corpus.hpp"
#include "vulnshot/embedding.hpp"
#include "vulnshot/labeling.hpp"
#include "vulnshot/llmclient.hpp"
#include "vulnshot/metrics.hpp"
#include "vulnshot/prompting.hpp"
#include "vulnshot/vecindex.hpp"

namespace vulnshot {

struct ProviderSettings {
  /// "mock" or "remote".
  std::string kind = "mock";
  /// "oracle", "parrot" or "fixed".
  std::string mock_mode = "oracle";
  std::string fixed_text;
  /// Mock requests whose prompt contains this text fail with a transport
  /// error. Empty disables.
  std::string mock_fail_substring;
  std::string model_id = "gemini-1.5-flash";
  double temperature = 0.0;
  std::uint32_t max_output_tokens = 128;
  RemoteProviderConfig remote;
};

struct EmbeddingSettings {
  /// "offline" or "remote".
  std::string kind = "offline";
  std::size_t dimension = HashedBagOfTokens::kDefaultDimension;
  RemoteEmbeddingConfig remote;
};

struct RunPaths {
  std::filesystem::path corpus;
  /// Optional; built in memory from the train split when empty.
  std::filesystem::path index;
  /// Optional; no caching when empty.
  std::filesystem::path cache;
  std::filesystem::path report_dir;
};

struct ExperimentConfig {
  std::vector<Strategy> strategies = {Strategy::kZeroShot, Strategy::kRandomFewShot,
                                      Strategy::kRetrievalFewShot, Strategy::kRetrievalLabeling};
  std::vector<std::size_t> shot_counts = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20};
  std::uint64_t seed = 42;
  RunPaths paths;
  ProviderSettings provider;
  EmbeddingSettings embedding;
  PromptTemplate prompt_template = PromptTemplate::builtin();
  ShotOrder shot_order = ShotOrder::kSimilarFirst;
  bool include_labels_in_index = true;
  bool strict = false;
  std::size_t max_in_flight = 4;

  /// Relative paths resolve against `base_dir`. Throws UsageError on
  /// unknown keys or bad values.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void check() const;
};

struct PredictionRecord {
  std::string test_id;
  Strategy strategy = Strategy::kZeroShot;
  std::size_t k = 0;
  /// Retrieval strategies only, most similar first.
  std::vector<Neighbor> neighbors;
  /// Random few-shot only: train ids of the drawn shots, in prompt order.
  std::vector<std::string> shot_ids;
  /// SHA-256 of the rendered prompt; empty for retrieval labeling.
  std::string prompt_hash;
  std::string raw_text;
  /// Absent for retrieval labeling.
  std::optional<ParseOutcome> parsed;
  LabelSet pred;
  LabelSet truth;
  bool cached = false;
  /// Provider failure message; the prediction then scores as empty.
  std::optional<std::string> error;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

nlohmann::json to_json(const PredictionRecord& r);
PredictionRecord record_from_json(const nlohmann::json& j);

std::string records_to_jsonl(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> records_from_jsonl(std::string_view text);

struct CellReport {
  Strategy strategy = Strategy::kZeroShot;
  std::size_t k = 0;
  MetricsReport metrics;
  std::size_t failures = 0;

  friend bool operator==(const CellReport&, const CellReport&) = default;
};

struct RunReport {
  std::vector<CellReport> cells;
  nlohmann::json config;
  std::string template_id;
  std::string shot_order;
  // Volatile fields; serialized only by metadata_json().
  std::uint64_t wall_clock_ms = 0;
  std::size_t provider_calls = 0;
  std::size_t cache_hits = 0;
};

/// Deterministic payload: cells, config echo, template id, shot order,
/// decoding and parsing policy.
nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);
/// Wall-clock, provider-call count and cache hits.
nlohmann::json metadata_json(const RunReport& r);

/// One cell per (strategy, k) in first-appearance order.
std::vector<CellReport> cells_from_records(const std::vector<PredictionRecord>& records);

/// Everything `run` needs, already loaded.
struct RunInputs {
  const Corpus* corpus = nullptr;
  /// Built from the train split when null and a retrieval strategy runs.
  const Index* index = nullptr;
  const EmbeddingBackend* embedder = nullptr;
  Provider* provider = nullptr;
  ResponseCache* cache = nullptr;
};

struct RunResult {
  RunReport report;
  std::vector<PredictionRecord> records;
};

/// Raised under strict mode when any completion fails. Carries the records
/// that did complete.
class StrictAbort : public ProviderError {
 public:
  StrictAbort(std::string message, std::vector<PredictionRecord> completed)
      : ProviderError(std::move(message)), completed_(std::move(completed)) {}
  const std::vector<PredictionRecord>& completed() const { return completed_; }

 private:
  std::vector<PredictionRecord> completed_;
};

RunResult run_experiment(const ExperimentConfig& config, const RunInputs& inputs);

/// Embeds the train split and builds the index.
Index build_index(const Corpus& corpus, const EmbeddingBackend& embedder, bool include_labels);

std::unique_ptr<EmbeddingBackend> make_embedder(const EmbeddingSettings& settings);
std::unique_ptr<Provider> make_provider(const ProviderSettings& settings);

/// Model id used in completion requests. Mocks get their own ids so their
/// replies never share cache entries with a real model or with each other.
std::string effective_model_id(const ProviderSettings& settings);

/// Loads everything from config.paths, runs, and writes into report_dir:
/// records.jsonl, report.json, report.csv, curves.json (when at least
/// two shot counts ran) and run_meta.json. Under strict mode a failure
/// writes checkpoint.jsonl and rethrows StrictAbort.
RunResult run(const ExperimentConfig& config);

/// CSV: strategy, k, then the six metrics as percentages with
/// two decimals, then supplementary columns.
std::string emit_table(const RunReport& report);

/// {"<metric>": {"<strategy>": [[k, value], ...]}}. Throws UsageError
/// unless some strategy ran at two or more shot counts.
nlohmann::json emit_curves(const RunReport& report);

/// 0.7405 -> "74.05".
std::string format_percent(double fraction);

}  // namespace vulnshot
