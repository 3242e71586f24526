#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vulnshot/embedding.hpp"
#include "vulnshot/errors.hpp"

using namespace vulnshot;

namespace {

// Test-side restatement of the documented hashing rule.
std::uint64_t ref_hash(const std::string& token) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ 0x9E3779B97F4A7C15ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

int ref_sign(std::uint64_t h) {
  std::uint64_t z = h + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return (z >> 63) ? -1 : 1;
}

std::map<std::size_t, int> ref_accumulate(const std::vector<std::string>& tokens, std::size_t dim) {
  std::map<std::size_t, int> coords;
  for (const auto& t : tokens) {
    const auto h = ref_hash(t);
    coords[h % dim] += ref_sign(h);
  }
  return coords;
}

double norm(const EmbeddingVector& v) {
  double s = 0;
  for (double x : v.values()) s += x * x;
  return std::sqrt(s);
}

class FailingBackend final : public EmbeddingBackend {
 public:
  std::size_t dimension() const override { return inner_.dimension(); }
  std::string name() const override { return "failing"; }
  std::size_t max_in_flight() const override { return 3; }
  EmbeddingVector embed(const EmbeddingInput& input) const override {
    if (input.code.size() > 64) throw OversizeInputError(input.code.size(), 64);
    return inner_.embed(input);
  }

 private:
  HashedBagOfTokens inner_;
};

}  // namespace

TEST_CASE("tokenizer splits words and punctuation runs") {
  const auto toks = HashedBagOfTokens::tokenize("if (p->next == NULL) x_1 += 0x1f;");
  const std::vector<std::string_view> expected = {"if", "(", "p",  "->", "next", "==",
                                                  "NULL", ")", "x_1", "+=", "0x1f", ";"};
  CHECK(toks == expected);
  CHECK(HashedBagOfTokens::tokenize(" \t\n").empty());
}

TEST_CASE("offline embedding is deterministic and unit norm") {
  HashedBagOfTokens b;
  const EmbeddingInput in{"int x;", std::nullopt};
  const auto v1 = embed(in, b);
  const auto v2 = embed(in, b);
  CHECK(v1 == v2);
  CHECK(v1.dimension() == 256);
  CHECK(std::abs(norm(v1) - 1.0) < 1e-9);
  CHECK(std::abs(v1.dot(v1) - 1.0) < 1e-9);
}

TEST_CASE("label suffix changes the vector (hand-hashed 3-token snippet)") {
  HashedBagOfTokens b;
  // "int x;" -> int, x, ;   suffix adds LABELS, :, CWE, -, 119
  const auto plain = ref_accumulate({"int", "x", ";"}, 256);
  const auto labeled =
      ref_accumulate({"int", "x", ";", "LABELS", ":", "CWE", "-", "119"}, 256);
  CHECK(plain != labeled);

  const auto lib_plain = b.accumulate("int x;");
  const auto lib_labeled = b.accumulate(embedding_text({"int x;", LabelSet{CweLabel::kCwe119}}));
  for (std::size_t d = 0; d < 256; ++d) {
    const double want_plain = plain.count(d) ? plain.at(d) : 0;
    const double want_labeled = labeled.count(d) ? labeled.at(d) : 0;
    CHECK(lib_plain[d] == want_plain);
    CHECK(lib_labeled[d] == want_labeled);
  }

  const auto a = embed({"int x;", std::nullopt}, b);
  const auto c = embed({"int x;", LabelSet{CweLabel::kCwe119}}, b);
  CHECK(a.dot(c) < 1.0);
}

TEST_CASE("embedding text uses the canonical label line") {
  CHECK(embedding_text({"f();", LabelSet{CweLabel::kCwe476, CweLabel::kCwe119}}) ==
        "f();\nLABELS: CWE-119, CWE-476");
  CHECK(embedding_text({"f();", std::nullopt}) == "f();");
}

TEST_CASE("token-multiset-equal inputs embed identically") {
  HashedBagOfTokens b;
  CHECK(embed({"a = b + c ;", std::nullopt}, b) == embed({"c + b = a;", std::nullopt}, b));
  CHECK(embed({"x  y\n\tz", std::nullopt}, b) == embed({"z y x", std::nullopt}, b));
}

TEST_CASE("embedding rejects empty input") {
  HashedBagOfTokens b;
  CHECK_THROWS_AS(embed({"", std::nullopt}, b), DataError);
  CHECK_THROWS_AS(embed({"   ", std::nullopt}, b), DataError);
  CHECK_THROWS_AS(HashedBagOfTokens(0), UsageError);
}

TEST_CASE("embedding vector construction") {
  CHECK_THROWS_AS(EmbeddingVector::normalized({0.0, 0.0}), DataError);
  CHECK_THROWS_AS(EmbeddingVector::normalized({}), DataError);
  CHECK_THROWS_AS(EmbeddingVector::from_stored({0.5, 0.5}), DataError);
  const auto v = EmbeddingVector::normalized({3.0, 4.0});
  CHECK(v.values()[0] == doctest::Approx(0.6));
  CHECK_THROWS_AS(v.dot(EmbeddingVector::normalized({1.0, 0.0, 0.0})), DataError);
}

TEST_CASE("batch equals elementwise embed") {
  HashedBagOfTokens b;
  const std::vector<EmbeddingInput> inputs = {
      {"char buf[8]; buf[i] = 0;", std::nullopt},
      {"p->q = 1;", LabelSet{CweLabel::kCwe476}},
      {"strcpy(a, b);", std::nullopt}};
  const auto out = embed_batch(inputs, b);
  REQUIRE(out.size() == inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) CHECK(out[i] == embed(inputs[i], b));
  CHECK(embed_batch(std::span<const EmbeddingInput>{}, b).empty());
}

TEST_CASE("batch failure names every failing index") {
  FailingBackend b;
  const std::vector<EmbeddingInput> inputs = {{"ok;", std::nullopt},
                                              {std::string(100, 'a'), std::nullopt},
                                              {"fine;", std::nullopt},
                                              {std::string(65, 'b'), std::nullopt}};
  try {
    embed_batch(inputs, b);
    FAIL("expected BatchEmbeddingError");
  } catch (const BatchEmbeddingError& e) {
    REQUIRE(e.failures().size() == 2);
    CHECK(e.failures()[0].index == 1);
    CHECK(e.failures()[1].index == 3);
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}
