#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulnshot/corpus.hpp"
#include "vulnshot/cwe.hpp"
#include "vulnshot/vecindex.hpp"

namespace vulnshot {

enum class Strategy {
  kZeroShot,
  kRandomFewShot,
  kRetrievalFewShot,
  /// Union of the neighbors' labels; never prompts a model.
  kRetrievalLabeling,
};

std::string to_string(Strategy s);
/// "zero_shot", "random_few_shot", "retrieval_few_shot", "retrieval_labeling".
std::optional<Strategy> strategy_from_string(std::string_view s);

enum class ShotOrder { kSimilarFirst, kSimilarLast };

std::string to_string(ShotOrder o);
/// "similar-first" or "similar-last".
std::optional<ShotOrder> shot_order_from_string(std::string_view s);

struct Shot {
  std::string code;
  LabelSet labels;

  friend bool operator==(const Shot&, const Shot&) = default;
};

/// Wording of the prompt. The preamble must name exactly the four scored
/// CWE codes.
struct PromptTemplate {
  std::string id;
  std::string preamble;
  std::string code_label = "Code:";
  std::string answer_label = "Vulnerabilities:";

  static PromptTemplate builtin();
  /// Throws UsageError when the preamble does not name exactly the four
  /// scored CWE codes, or a label is empty.
  void check() const;
};

struct PromptSpec {
  Strategy strategy = Strategy::kZeroShot;
  std::size_t k = 0;
  std::vector<Shot> shots;
  std::string test_code;

  /// |shots| == k, zero-shot iff k == 0, and not retrieval labeling.
  void check() const;
};

/// Preamble, one block per shot, then the test code with an empty answer
/// slot:
///
///   <preamble>
///
///   Code: <shot code>
///   Vulnerabilities: CWE-119, CWE-476
///
///   Code: <test code>
///   Vulnerabilities:
std::string render(const PromptSpec& spec, const PromptTemplate& tmpl = PromptTemplate::builtin());

/// Pool positions of k distinct samples, drawn without replacement from
/// a generator keyed by (seed, test_id). Throws UsageError if k > pool size.
std::vector<std::size_t> select_random_indices(std::size_t pool_size, std::size_t k,
                                               std::uint64_t seed, std::string_view test_id);

std::vector<Shot> select_random(std::span<const CodeSample> pool, std::size_t k,
                                std::uint64_t seed, std::string_view test_id);

/// Maps neighbors to shots through the corpus. Neighbors arrive most
/// similar first; kSimilarLast reverses them.
std::vector<Shot> shots_from_neighbors(std::span<const Neighbor> neighbors, const Corpus& corpus,
                                       ShotOrder order = ShotOrder::kSimilarFirst);

std::vector<Shot> select_retrieval(const Index& index, const EmbeddingVector& query,
                                   std::size_t k, const Corpus& corpus,
                                   ShotOrder order = ShotOrder::kSimilarFirst);

}  // namespace vulnshot
