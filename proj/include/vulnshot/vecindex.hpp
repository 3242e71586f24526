#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vulnshot/cwe.hpp"
#include "vulnshot/embedding.hpp"

namespace vulnshot {

struct IndexEntry {
  std::string sample_id;
  EmbeddingVector vector;
  LabelSet truth;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct Neighbor {
  std::string sample_id;
  double similarity;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact flat cosine-similarity index. Immutable after construction; safe
/// for concurrent queries.
class Index {
 public:
  /// Throws DataError when `entries` is empty, ids repeat, or dimensions
  /// disagree.
  explicit Index(std::vector<IndexEntry> entries);

  std::size_t size() const { return entries_.size(); }
  std::size_t dimension() const { return dimension_; }
  /// Insertion order.
  const std::vector<IndexEntry>& entries() const { return entries_; }

  /// min(k, size()) neighbors, similarity descending, ties by ascending
  /// sample_id. Throws UsageError for k == 0, DataError on dimension
  /// mismatch.
  std::vector<Neighbor> top_k(const EmbeddingVector& query, std::size_t k) const;

  /// One JSONL row per entry: {"id", "vector", "labels"}.
  std::string to_jsonl() const;
  static Index from_jsonl(std::string_view text);

  void save(const std::filesystem::path& path) const;
  static Index load(const std::filesystem::path& path);

 private:
  std::vector<IndexEntry> entries_;
  std::size_t dimension_ = 0;
};

inline Index build(std::vector<IndexEntry> entries) { return Index(std::move(entries)); }

/// Ordering used by top_k: higher similarity first, then smaller id.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.sample_id < b.sample_id;
}

}  // namespace vulnshot
