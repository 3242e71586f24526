#include "vulnshot/labeling.hpp"

#include <algorithm>
#include <cctype>

#include "vulnshot/errors.hpp"

namespace vulnshot {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool matches_cwe(std::string_view text, std::size_t at) {
  if (at + 3 > text.size()) return false;
  auto up = [&](std::size_t i) {
    return static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
  };
  return up(at) == 'C' && up(at + 1) == 'W' && up(at + 2) == 'E';
}

}  // namespace

ParseOutcome parse_labels(std::string_view text) {
  ParseOutcome out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!matches_cwe(text, i)) {
      ++i;
      continue;
    }
    std::size_t j = i + 3;
    if (j < text.size() && (text[j] == ' ' || text[j] == '-' || text[j] == '_')) ++j;
    std::size_t digits_end = j;
    while (digits_end < text.size() && is_digit(text[digits_end])) ++digits_end;
    if (digits_end == j) {
      i += 3;
      continue;
    }
    std::string digits(text.substr(j, digits_end - j));
    out.empty_parse = false;
    // Leading zeros or very long runs never name one of the four.
    std::optional<CweLabel> label;
    if (digits.size() == 3 && digits[0] != '0') label = cwe_from_number(std::stoi(digits));
    if (label) {
      out.labels.insert(*label);
    } else if (std::find(out.unknown_mentions.begin(), out.unknown_mentions.end(), digits) ==
               out.unknown_mentions.end()) {
      out.unknown_mentions.push_back(std::move(digits));
    }
    i = digits_end;
  }
  return out;
}

LabelSet retrieval_label(std::span<const Neighbor> neighbors, const Corpus& corpus) {
  if (neighbors.empty()) throw UsageError("retrieval labeling needs at least one neighbor");
  LabelSet out;
  for (const auto& n : neighbors) {
    const CodeSample* sample = corpus.find(n.sample_id);
    if (sample == nullptr) throw DataError("neighbor id '" + n.sample_id + "' is not in the corpus");
    out |= sample->truth;
  }
  return out;
}

}  // namespace vulnshot
