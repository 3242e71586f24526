#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vulnshot/cwe.hpp"

namespace vulnshot {

enum class Split { kTrain, kTest };

struct CodeSample {
  std::string id;
  std::string code;
  LabelSet truth;

  friend bool operator==(const CodeSample&, const CodeSample&) = default;
};

/// Counters gathered while ingesting. retained + dropped() == records.
struct IngestStats {
  std::size_t records = 0;
  std::size_t retained = 0;
  /// Rows whose label list was empty to begin with.
  std::size_t dropped_non_vulnerable = 0;
  /// Rows whose labels were all outside the four scored categories.
  std::size_t dropped_out_of_scope = 0;
  /// Every label string that was filtered out, with its count.
  std::map<std::string, std::size_t> filtered_labels;

  std::size_t dropped() const { return dropped_non_vulnerable + dropped_out_of_scope; }

  friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

/// Train/test split of the labeled pool. Immutable once constructed.
class Corpus {
 public:
  Corpus() = default;
  /// Throws DataError on duplicate ids (within or across splits), empty
  /// code or empty truth.
  Corpus(std::vector<CodeSample> train, std::vector<CodeSample> test, IngestStats stats = {});

  const std::vector<CodeSample>& train() const { return train_; }
  const std::vector<CodeSample>& test() const { return test_; }
  const IngestStats& stats() const { return stats_; }

  /// Sample by id from either split, or nullptr.
  const CodeSample* find(std::string_view id) const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.train_ == b.train_ && a.test_ == b.test_ && a.stats_ == b.stats_;
  }

 private:
  std::vector<CodeSample> train_;
  std::vector<CodeSample> test_;
  IngestStats stats_;
  std::unordered_map<std::string, std::pair<Split, std::size_t>> by_id_;
};

/// Field names of the JSONL rows. Defaults match the documented schema.
struct IngestOptions {
  std::string id_field = "id";
  std::string code_field = "code";
  std::string labels_field = "labels";
  std::string split_field = "split";
};

/// Reads a JSONL corpus. Rows with no admissible label are dropped and
/// counted; out-of-scope labels next to admissible ones are filtered.
/// Throws DataError naming the 1-based line for malformed rows, duplicate
/// ids, unknown split values and empty code.
Corpus ingest(const std::filesystem::path& path, const IngestOptions& options = {});
Corpus ingest_text(std::string_view jsonl, const IngestOptions& options = {});

struct LabelCounts {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct LeakageWarning {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct ValidationReport {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::map<CweLabel, LabelCounts> label_counts;
  std::vector<LeakageWarning> leakage;
  IngestStats ingest;

  /// Sum of all per-label counts; equals the sum of |truth| over samples.
  std::size_t label_total() const;
};

ValidationReport validate(const Corpus& corpus);

nlohmann::json to_json(const ValidationReport& report);

/// Serializes the corpus back into the JSONL ingestion schema, train rows
/// first.
std::string to_jsonl(const Corpus& corpus);

}  // namespace vulnshot
