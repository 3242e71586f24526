#include "vulnshot/prompting.hpp"

#include <algorithm>
#include <numeric>

#include "vulnshot/errors.hpp"
#include "vulnshot/labeling.hpp"
#include "vulnshot/rng.hpp"

namespace vulnshot {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kZeroShot: return "zero_shot";
    case Strategy::kRandomFewShot: return "random_few_shot";
    case Strategy::kRetrievalFewShot: return "retrieval_few_shot";
    case Strategy::kRetrievalLabeling: return "retrieval_labeling";
  }
  return "unknown";
}

std::optional<Strategy> strategy_from_string(std::string_view s) {
  for (Strategy v : {Strategy::kZeroShot, Strategy::kRandomFewShot, Strategy::kRetrievalFewShot,
                     Strategy::kRetrievalLabeling}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string to_string(ShotOrder o) {
  return o == ShotOrder::kSimilarFirst ? "similar-first" : "similar-last";
}

std::optional<ShotOrder> shot_order_from_string(std::string_view s) {
  if (s == "similar-first") return ShotOrder::kSimilarFirst;
  if (s == "similar-last") return ShotOrder::kSimilarLast;
  return std::nullopt;
}

PromptTemplate PromptTemplate::builtin() {
  PromptTemplate t;
  t.id = "cwe4-v1";
  t.preamble =
      "You are a security analyst reviewing C/C++ functions. Identify every vulnerability "
      "category present in the code. Choose only from these labels: CWE-119 (buffer overflow), "
      "CWE-120 (stack-based buffer overflow), CWE-469 (pointer arithmetic error), CWE-476 (null "
      "pointer dereference). A function may have more than one. Reply with the applicable "
      "labels only, as a comma-separated list after \"Vulnerabilities:\".";
  return t;
}

void PromptTemplate::check() const {
  if (id.empty()) throw UsageError("prompt template needs an id");
  if (code_label.empty() || answer_label.empty()) {
    throw UsageError("prompt template labels must be non-empty");
  }
  auto mentions = parse_labels(preamble);
  if (mentions.labels.size() != kNumLabels || !mentions.unknown_mentions.empty()) {
    throw UsageError("prompt template '" + id +
                     "' must name exactly CWE-119, CWE-120, CWE-469 and CWE-476");
  }
}

void PromptSpec::check() const {
  if (strategy == Strategy::kRetrievalLabeling) {
    throw UsageError("retrieval labeling does not render prompts");
  }
  if ((strategy == Strategy::kZeroShot) != (k == 0)) {
    throw UsageError("k must be 0 exactly for zero-shot prompts");
  }
  if (shots.size() != k) {
    throw UsageError("prompt has " + std::to_string(shots.size()) + " shots, expected " +
                     std::to_string(k));
  }
}

std::string render(const PromptSpec& spec, const PromptTemplate& tmpl) {
  spec.check();
  std::string out = tmpl.preamble;
  out += "\n\n";
  for (const Shot& shot : spec.shots) {
    out += tmpl.code_label + " " + shot.code + "\n";
    out += tmpl.answer_label + " " + shot.labels.to_string() + "\n\n";
  }
  out += tmpl.code_label + " " + spec.test_code + "\n";
  out += tmpl.answer_label;
  return out;
}

std::vector<std::size_t> select_random_indices(std::size_t pool_size, std::size_t k,
                                               std::uint64_t seed, std::string_view test_id) {
  if (k > pool_size) {
    throw UsageError("cannot draw " + std::to_string(k) + " shots from a pool of " +
                     std::to_string(pool_size));
  }
  auto gen = rng::keyed(seed, test_id);

  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k slots are the draw.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng::bounded(gen, pool_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<Shot> select_random(std::span<const CodeSample> pool, std::size_t k,
                                std::uint64_t seed, std::string_view test_id) {
  std::vector<Shot> shots;
  for (std::size_t i : select_random_indices(pool.size(), k, seed, test_id)) {
    shots.push_back({pool[i].code, pool[i].truth});
  }
  return shots;
}

std::vector<Shot> shots_from_neighbors(std::span<const Neighbor> neighbors, const Corpus& corpus,
                                       ShotOrder order) {
  std::vector<Shot> shots;
  shots.reserve(neighbors.size());
  for (const auto& n : neighbors) {
    const CodeSample* s = corpus.find(n.sample_id);
    if (s == nullptr) throw DataError("neighbor id '" + n.sample_id + "' is not in the corpus");
    shots.push_back({s->code, s->truth});
  }
  if (order == ShotOrder::kSimilarLast) std::reverse(shots.begin(), shots.end());
  return shots;
}

std::vector<Shot> select_retrieval(const Index& index, const EmbeddingVector& query,
                                   std::size_t k, const Corpus& corpus, ShotOrder order) {
  auto neighbors = index.top_k(query, k);
  return shots_from_neighbors(neighbors, corpus, order);
}

}  // namespace vulnshot
