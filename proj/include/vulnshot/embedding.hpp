#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulnshot/cwe.hpp"
#include "vulnshot/errors.hpp"

namespace vulnshot {

/// Unit-norm dense vector. Construction normalizes; a zero vector cannot
/// be represented.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  /// L2-normalizes `raw`. Throws DataError if it is empty, non-finite, or
  /// all zeros.
  static EmbeddingVector normalized(std::vector<double> raw);

  /// Accepts values already on the unit sphere (within 1e-6), as read back
  /// from an index file. Values within 1e-12 of unit norm are kept as-is.
  static EmbeddingVector from_stored(std::vector<double> values);

  std::size_t dimension() const { return values_.size(); }
  std::span<const double> values() const { return values_; }

  /// Dot product; equals cosine similarity for unit vectors.
  double dot(const EmbeddingVector& other) const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

struct EmbeddingInput {
  std::string code;
  /// Present for indexed training examples, absent for queries.
  std::optional<LabelSet> labels;
};

/// Text handed to the backend: the code, followed by the canonical line
/// "LABELS: CWE-a, CWE-b" when labels are present.
std::string embedding_text(const EmbeddingInput& input);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
  /// Concurrent calls embed_batch may issue.
  virtual std::size_t max_in_flight() const { return 1; }
  virtual EmbeddingVector embed(const EmbeddingInput& input) const = 0;
};

/// Signed-hash bag of lexical tokens. Deterministic and dependency-free.
class HashedBagOfTokens final : public EmbeddingBackend {
 public:
  static constexpr std::size_t kDefaultDimension = 256;
  static constexpr std::uint64_t kSeed = 0x9E3779B97F4A7C15ull;

  explicit HashedBagOfTokens(std::size_t dimension = kDefaultDimension);

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return "hashed-bag-of-tokens"; }
  EmbeddingVector embed(const EmbeddingInput& input) const override;

  /// Identifier, number and punctuation-run tokens; whitespace separates.
  static std::vector<std::string_view> tokenize(std::string_view text);

  /// Seeded 64-bit token hash (FNV-1a over the bytes, starting from the
  /// FNV offset basis xor kSeed).
  static std::uint64_t token_hash(std::string_view token);
  /// Coordinate a token lands on, and its sign (+1 or -1).
  std::size_t bucket(std::uint64_t hash) const { return static_cast<std::size_t>(hash % dimension_); }
  static int sign(std::uint64_t hash);

  /// Unnormalized accumulation. Exposed for tests.
  std::vector<double> accumulate(std::string_view text) const;

 private:
  std::size_t dimension_;
};

struct RemoteEmbeddingConfig {
  /// Full endpoint URL, e.g. ".../models/gemini-embedding-001:embedContent".
  std::string endpoint;
  std::string model = "models/gemini-embedding-001";
  std::string api_key_env = "GEMINI_API_KEY";
  /// Requested via outputDimensionality and checked on every response.
  std::size_t dimension = 768;
  std::size_t max_input_bytes = 8192;
  std::chrono::seconds timeout{30};
  int retries = 3;
  std::chrono::milliseconds backoff{500};
  std::size_t max_in_flight = 4;
};

/// HTTPS JSON client for a hosted embedding model. Request body:
/// {"model", "content": {"parts": [{"text"}]}, "outputDimensionality"};
/// response: {"embedding": {"values": [...]}}.
class RemoteEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit RemoteEmbeddingBackend(RemoteEmbeddingConfig config);

  std::size_t dimension() const override { return config_.dimension; }
  std::string name() const override { return "remote:" + config_.model; }
  std::size_t max_in_flight() const override { return config_.max_in_flight; }
  EmbeddingVector embed(const EmbeddingInput& input) const override;

 private:
  RemoteEmbeddingConfig config_;
  std::string api_key_;
  mutable std::counting_semaphore<> in_flight_;
};

/// One failed element of a batch.
struct BatchFailure {
  std::size_t index;
  std::string message;
};

class BatchEmbeddingError : public ProviderError {
 public:
  explicit BatchEmbeddingError(std::vector<BatchFailure> failures);
  const std::vector<BatchFailure>& failures() const { return failures_; }

 private:
  std::vector<BatchFailure> failures_;
};

EmbeddingVector embed(const EmbeddingInput& input, const EmbeddingBackend& backend);

/// Order-preserving. All items are attempted; if any fail, a
/// BatchEmbeddingError lists every failing index and nothing is returned.
std::vector<EmbeddingVector> embed_batch(std::span<const EmbeddingInput> inputs,
                                         const EmbeddingBackend& backend);

}  // namespace vulnshot
