#pragma once

#include <cstddef>
#include <span>

#include <json.hpp>

#include "vulnshot/cwe.hpp"

namespace vulnshot {

struct LabeledPair {
  LabelSet truth;
  LabelSet pred;
};

/// Micro-aggregated confusion counts over all instance-label slots.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MicroPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
};

struct MetricsReport {
  std::size_t n_instances = 0;
  std::size_t n_labels = kNumLabels;
  double subset_accuracy = 0.0;
  double hamming_accuracy = 0.0;
  /// Mean per-instance Jaccard |pred & truth| / |pred | truth|.
  double partial_match_accuracy = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  ConfusionCounts counts;
  std::size_t exact_matches = 0;
  /// Supplementary reading of partial match: mean |pred & truth| / |truth|.
  double partial_match_truth = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// All functions below throw UsageError on an empty input.
double subset_accuracy(std::span<const LabeledPair> pairs);
double hamming_accuracy(std::span<const LabeledPair> pairs);
/// (empty, empty) counts as 1.
double partial_match_accuracy(std::span<const LabeledPair> pairs);
/// Truth-normalized overlap; an empty truth scores 1 if pred is empty too, else 0.
double partial_match_truth(std::span<const LabeledPair> pairs);
/// Zero denominators give 0 for P, R and F1.
MicroPrf micro_prf(std::span<const LabeledPair> pairs);
MetricsReport report(std::span<const LabeledPair> pairs);

nlohmann::json to_json(const MetricsReport& r);

}  // namespace vulnshot
