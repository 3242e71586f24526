#pragma once

// Brute-force reference for the multi-label metrics. Works from a per-label
// 2x2 confusion table and plain boolean vectors; shares no code with the
// library's metric implementation.

#include <array>
#include <cstddef>
#include <vector>

namespace oracle {

using Row = std::array<bool, 4>;

struct OraclePair {
  Row truth{};
  Row pred{};
};

struct OracleMetrics {
  double subset = 0, hamming = 0, partial = 0, partial_truth = 0;
  double precision = 0, recall = 0, f1 = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline OracleMetrics evaluate(const std::vector<OraclePair>& pairs) {
  // table[label][truth][pred]
  std::size_t table[4][2][2] = {};
  std::size_t exact = 0;
  double jaccard_sum = 0.0;
  double truth_overlap_sum = 0.0;
  for (const auto& p : pairs) {
    bool all_agree = true;
    int inter = 0, uni = 0, nt = 0;
    for (int l = 0; l < 4; ++l) {
      ++table[l][p.truth[l] ? 1 : 0][p.pred[l] ? 1 : 0];
      if (p.truth[l] != p.pred[l]) all_agree = false;
      if (p.truth[l] && p.pred[l]) ++inter;
      if (p.truth[l] || p.pred[l]) ++uni;
      if (p.truth[l]) ++nt;
    }
    if (all_agree) ++exact;
    jaccard_sum += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
    bool pred_empty = !(p.pred[0] || p.pred[1] || p.pred[2] || p.pred[3]);
    truth_overlap_sum += nt == 0 ? (pred_empty ? 1.0 : 0.0) : static_cast<double>(inter) / nt;
  }
  OracleMetrics m;
  for (int l = 0; l < 4; ++l) {
    m.tp += table[l][1][1];
    m.fn += table[l][1][0];
    m.fp += table[l][0][1];
    m.tn += table[l][0][0];
  }
  const double n = static_cast<double>(pairs.size());
  m.subset = exact / n;
  m.hamming = 1.0 - static_cast<double>(m.fp + m.fn) / (4.0 * n);
  m.partial = jaccard_sum / n;
  m.partial_truth = truth_overlap_sum / n;
  m.precision = (m.tp + m.fp) == 0 ? 0.0 : static_cast<double>(m.tp) / (m.tp + m.fp);
  m.recall = (m.tp + m.fn) == 0 ? 0.0 : static_cast<double>(m.tp) / (m.tp + m.fn);
  m.f1 = (m.precision + m.recall) == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

}  // namespace oracle
