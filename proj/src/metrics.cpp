#include "vulnshot/metrics.hpp"

#include "vulnshot/errors.hpp"

namespace vulnshot {

namespace {

// Every per-instance overlap ratio has a denominator in 1..4, so scaling by
// 12 keeps the running sum an exact integer. Order of summation then cannot
// change the result.
constexpr std::size_t kOverlapScale = 12;

void require_nonempty(std::span<const LabeledPair> pairs) {
  if (pairs.empty()) throw UsageError("metrics need at least one (truth, prediction) pair");
}

std::size_t scaled_ratio(std::size_t num, std::size_t den) { return num * kOverlapScale / den; }

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ConfusionCounts tally(std::span<const LabeledPair> pairs) {
  ConfusionCounts c;
  for (const auto& p : pairs) {
    c.tp += (p.pred & p.truth).size();
    c.fp += (p.pred - p.truth).size();
    c.fn += (p.truth - p.pred).size();
  }
  c.tn = pairs.size() * kNumLabels - c.tp - c.fp - c.fn;
  return c;
}

}  // namespace

double subset_accuracy(std::span<const LabeledPair> pairs) {
  require_nonempty(pairs);
  std::size_t exact = 0;
  for (const auto& p : pairs) exact += p.pred == p.truth ? 1 : 0;
  return ratio(exact, pairs.size());
}

double hamming_accuracy(std::span<const LabeledPair> pairs) {
  require_nonempty(pairs);
  const auto c = tally(pairs);
  return 1.0 - ratio(c.fp + c.fn, pairs.size() * kNumLabels);
}

double partial_match_accuracy(std::span<const LabeledPair> pairs) {
  require_nonempty(pairs);
  std::size_t scaled = 0;
  for (const auto& p : pairs) {
    const std::size_t uni = (p.pred | p.truth).size();
    scaled += uni == 0 ? kOverlapScale : scaled_ratio((p.pred & p.truth).size(), uni);
  }
  return ratio(scaled, pairs.size() * kOverlapScale);
}

double partial_match_truth(std::span<const LabeledPair> pairs) {
  require_nonempty(pairs);
  std::size_t scaled = 0;
  for (const auto& p : pairs) {
    if (p.truth.empty()) {
      scaled += p.pred.empty() ? kOverlapScale : 0;
    } else {
      scaled += scaled_ratio((p.pred & p.truth).size(), p.truth.size());
    }
  }
  return ratio(scaled, pairs.size() * kOverlapScale);
}

MicroPrf micro_prf(std::span<const LabeledPair> pairs) {
  require_nonempty(pairs);
  MicroPrf out;
  out.counts = tally(pairs);
  out.precision = ratio(out.counts.tp, out.counts.tp + out.counts.fp);
  out.recall = ratio(out.counts.tp, out.counts.tp + out.counts.fn);
  const double sum = out.precision + out.recall;
  out.f1 = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
  return out;
}

MetricsReport report(std::span<const LabeledPair> pairs) {
  require_nonempty(pairs);
  MetricsReport r;
  r.n_instances = pairs.size();
  for (const auto& p : pairs) r.exact_matches += p.pred == p.truth ? 1 : 0;
  r.subset_accuracy = subset_accuracy(pairs);
  r.hamming_accuracy = hamming_accuracy(pairs);
  r.partial_match_accuracy = partial_match_accuracy(pairs);
  r.partial_match_truth = partial_match_truth(pairs);
  const auto prf = micro_prf(pairs);
  r.micro_precision = prf.precision;
  r.micro_recall = prf.recall;
  r.micro_f1 = prf.f1;
  r.counts = prf.counts;
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"n_instances", r.n_instances},
          {"n_labels", r.n_labels},
          {"subset_accuracy", r.subset_accuracy},
          {"hamming_accuracy", r.hamming_accuracy},
          {"partial_match_accuracy", r.partial_match_accuracy},
          {"partial_match_truth", r.partial_match_truth},
          {"micro_precision", r.micro_precision},
          {"micro_recall", r.micro_recall},
          {"micro_f1", r.micro_f1},
          {"exact_matches", r.exact_matches},
          {"tp", r.counts.tp},
          {"fp", r.counts.fp},
          {"fn", r.counts.fn},
          {"tn", r.counts.tn}};
}

}  // namespace vulnshot
