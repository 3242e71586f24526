#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulnshot/corpus.hpp"
#include "vulnshot/cwe.hpp"
#include "vulnshot/vecindex.hpp"

namespace vulnshot {

struct ParseOutcome {
  LabelSet labels;
  /// Digit groups of CWE mentions outside the scored four, first-seen order.
  std::vector<std::string> unknown_mentions;
  /// No CWE mention of any kind was found.
  bool empty_parse = true;

  friend bool operator==(const ParseOutcome&, const ParseOutcome&) = default;
};

/// Finds every "CWE" (any case) followed by at most one of ' ', '-', '_'
/// and a run of digits. Total: never throws.
ParseOutcome parse_labels(std::string_view text);

/// Union of the neighbors' ground-truth labels. No model involved.
/// Throws UsageError for an empty list, DataError for an id the corpus
/// does not know.
LabelSet retrieval_label(std::span<const Neighbor> neighbors, const Corpus& corpus);

}  // namespace vulnshot
