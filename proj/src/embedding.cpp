#include "vulnshot/embedding.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "vulnshot/http.hpp"

namespace vulnshot {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

enum class CharClass { kSpace, kWord, kPunct };

CharClass classify(unsigned char c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
    return CharClass::kSpace;
  }
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
      c >= 0x80) {
    return CharClass::kWord;
  }
  return CharClass::kPunct;
}

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
  if (raw.empty()) throw DataError("cannot normalize an empty vector");
  double sum = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw DataError("vector has non-finite component");
    sum += v * v;
  }
  if (sum == 0.0) throw DataError("cannot normalize a zero vector");
  const double norm = std::sqrt(sum);
  for (double& v : raw) v /= norm;
  EmbeddingVector out;
  out.values_ = std::move(raw);
  return out;
}

EmbeddingVector EmbeddingVector::from_stored(std::vector<double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  if (values.empty() || !std::isfinite(sum) || std::abs(std::sqrt(sum) - 1.0) > 1e-6) {
    throw DataError("stored vector is not unit-normalized");
  }
  // Leave already-normalized values bit-identical.
  if (std::abs(std::sqrt(sum) - 1.0) > 1e-12) return normalized(std::move(values));
  EmbeddingVector out;
  out.values_ = std::move(values);
  return out;
}

double EmbeddingVector::dot(const EmbeddingVector& other) const {
  if (other.dimension() != dimension()) {
    throw DataError("dimension mismatch: " + std::to_string(dimension()) + " vs " +
                    std::to_string(other.dimension()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) acc += values_[i] * other.values_[i];
  return acc;
}

std::string embedding_text(const EmbeddingInput& input) {
  if (!input.labels) return input.code;
  return input.code + "\nLABELS: " + input.labels->to_string();
}

HashedBagOfTokens::HashedBagOfTokens(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw UsageError("embedding dimension must be positive");
}

std::vector<std::string_view> HashedBagOfTokens::tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    CharClass cls = classify(static_cast<unsigned char>(text[i]));
    if (cls == CharClass::kSpace) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && classify(static_cast<unsigned char>(text[j])) == cls) ++j;
    tokens.push_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::uint64_t HashedBagOfTokens::token_hash(std::string_view token) {
  std::uint64_t h = kFnvOffset ^ kSeed;
  for (unsigned char c : token) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

int HashedBagOfTokens::sign(std::uint64_t hash) { return (mix64(hash) >> 63) != 0 ? -1 : 1; }

std::vector<double> HashedBagOfTokens::accumulate(std::string_view text) const {
  std::vector<double> acc(dimension_, 0.0);
  for (std::string_view token : tokenize(text)) {
    const std::uint64_t h = token_hash(token);
    acc[bucket(h)] += sign(h);
  }
  return acc;
}

EmbeddingVector HashedBagOfTokens::embed(const EmbeddingInput& input) const {
  if (input.code.empty()) throw DataError("cannot embed empty code");
  auto acc = accumulate(embedding_text(input));
  bool any = false;
  for (double v : acc) any = any || v != 0.0;
  if (!any) {
    throw DataError("input has no tokens (or they cancel out); cannot normalize");
  }
  return EmbeddingVector::normalized(std::move(acc));
}

RemoteEmbeddingBackend::RemoteEmbeddingBackend(RemoteEmbeddingConfig config)
    : config_(std::move(config)),
      api_key_(http::api_key_from_env(config_.api_key_env)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
  if (config_.endpoint.empty()) throw UsageError("remote embedding endpoint is not configured");
  if (config_.dimension == 0) throw UsageError("remote embedding dimension must be positive");
}

EmbeddingVector RemoteEmbeddingBackend::embed(const EmbeddingInput& input) const {
  if (input.code.empty()) throw DataError("cannot embed empty code");
  const std::string text = embedding_text(input);
  if (text.size() > config_.max_input_bytes) {
    throw OversizeInputError(text.size(), config_.max_input_bytes);
  }
  nlohmann::json body = {{"model", config_.model},
                         {"content", {{"parts", {{{"text", text}}}}}}};
  body["outputDimensionality"] = config_.dimension;
  std::vector<std::pair<std::string, std::string>> headers;
  if (!api_key_.empty()) headers.emplace_back("x-goog-api-key", api_key_);

  const std::string payload = body.dump();
  auto response = http::with_retries({config_.retries, config_.backoff}, [&] {
    in_flight_.acquire();
    try {
      auto r = http::post_json(config_.endpoint, headers, payload, config_.timeout);
      in_flight_.release();
      return r;
    } catch (...) {
      in_flight_.release();
      throw;
    }
  });
  if (response.status == 413) throw OversizeInputError(text.size(), config_.max_input_bytes);
  if (response.status != 200) {
    throw ProviderError("embedding request failed with HTTP " + std::to_string(response.status) +
                        ": " + response.body);
  }
  std::vector<double> values;
  try {
    auto parsed = nlohmann::json::parse(response.body);
    values = parsed.at("embedding").at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed embedding response: ") + e.what());
  }
  if (values.size() != config_.dimension) {
    throw ProviderError("embedding has dimension " + std::to_string(values.size()) +
                        ", expected " + std::to_string(config_.dimension));
  }
  return EmbeddingVector::normalized(std::move(values));
}

namespace {

std::string describe(const std::vector<BatchFailure>& failures) {
  std::string msg = "embedding failed for " + std::to_string(failures.size()) + " input(s):";
  for (const auto& f : failures) msg += " [index " + std::to_string(f.index) + "] " + f.message;
  return msg;
}

}  // namespace

BatchEmbeddingError::BatchEmbeddingError(std::vector<BatchFailure> failures)
    : ProviderError(describe(failures)), failures_(std::move(failures)) {}

EmbeddingVector embed(const EmbeddingInput& input, const EmbeddingBackend& backend) {
  return backend.embed(input);
}

std::vector<EmbeddingVector> embed_batch(std::span<const EmbeddingInput> inputs,
                                         const EmbeddingBackend& backend) {
  std::vector<EmbeddingVector> out(inputs.size());
  std::vector<std::optional<std::string>> errors(inputs.size());

  auto work = [&](std::size_t i) {
    try {
      out[i] = backend.embed(inputs[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };

  const std::size_t workers = std::min(backend.max_in_flight(), inputs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) work(i);
      });
    }
  }

  std::vector<BatchFailure> failures;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) failures.push_back({i, *errors[i]});
  }
  if (!failures.empty()) throw BatchEmbeddingError(std::move(failures));
  return out;
}

}  // namespace vulnshot
