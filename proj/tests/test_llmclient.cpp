#include <doctest.h>

#include <filesystem>
#include <string>

#include "support.hpp"
#include "vulnshot/errors.hpp"
#include "vulnshot/io.hpp"
#include "vulnshot/llmclient.hpp"
#include "vulnshot/prompting.hpp"

using namespace vulnshot;

namespace {

CompletionRequest request(std::string prompt, double temperature = 0.0) {
  return {"mock:fixed", std::move(prompt), temperature, 128};
}

}  // namespace

TEST_CASE("request defaults and checks") {
  CompletionRequest r;
  CHECK(r.temperature == 0.0);
  CHECK(r.max_output_tokens == 128);
  r.prompt = "";
  CHECK_THROWS_AS(r.check(), UsageError);
  r.prompt = "p";
  r.temperature = -1;
  CHECK_THROWS_AS(r.check(), UsageError);
  r.temperature = 0;
  r.max_output_tokens = 0;
  CHECK_THROWS_AS(r.check(), UsageError);
}

TEST_CASE("cache key depends on every request field") {
  const auto base = request("hello");
  CHECK(cache_key(base) == cache_key(request("hello")));
  CHECK(cache_key(base) != cache_key(request("hello", 0.7)));
  CHECK(cache_key(base) != cache_key(request("hello!")));
  auto other_model = base;
  other_model.model_id = "mock:parrot";
  CHECK(cache_key(base) != cache_key(other_model));
  auto other_budget = base;
  other_budget.max_output_tokens = 64;
  CHECK(cache_key(base) != cache_key(other_budget));
  CHECK(cache_key(base) == sha256_hex(canonical_json(base).dump()));
  CHECK(cache_key(base).size() == 64);
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("second identical request is served from the cache") {
  test_support::TempDir dir("cache");
  ResponseCache cache(dir.path());
  auto mock = MockProvider::fixed("CWE-119");
  const auto req = request("prompt text");
  const auto first = complete(req, mock, &cache);
  CHECK(first.text == "CWE-119");
  CHECK_FALSE(first.cached);
  const auto second = complete(req, mock, &cache);
  CHECK(second.cached);
  CHECK(second.text == first.text);
  CHECK(mock.calls() == 1);
  CHECK(cache.stats().entries == 1);

  const auto entry = nlohmann::json::parse(read_file(dir / (cache_key(req) + ".json")));
  CHECK(entry["response"] == "CWE-119");
  CHECK(entry["request"] == canonical_json(req));
  CHECK(entry.contains("timestamp"));

  CHECK(cache.clear() == 1);
  CHECK(cache.stats().entries == 0);
  CHECK_FALSE(complete(req, mock, &cache).cached);
}

TEST_CASE("cache returns stored text byte-identical") {
  test_support::TempDir dir("cache-bytes");
  ResponseCache cache(dir.path());
  const std::string text = "line1\nCWE-476 \xe2\x9c\x93 \"quoted\"\t\r\n";
  cache.store("k", request("p"), text);
  CHECK(cache.lookup("k") == text);
  CHECK_FALSE(cache.lookup("missing").has_value());
  write_file_atomic(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(cache.lookup("bad"), CacheError);
}

TEST_CASE("mock modes") {
  auto fixed = MockProvider::fixed("none");
  CHECK(fixed.generate(request("a")) == "none");
  CHECK(fixed.generate(request("b")) == "none");

  auto oracle = MockProvider::oracle();
  const std::string p = render({Strategy::kZeroShot, 0, {}, "x;"});
  oracle.bind_truth(p, {CweLabel::kCwe476, CweLabel::kCwe119});
  CHECK(oracle.generate(request(p)) == "CWE-119, CWE-476");
  CHECK_THROWS_AS(oracle.generate(request("unbound")), ProviderError);

  auto parrot = MockProvider::parrot();
  const std::string three = render({Strategy::kRandomFewShot,
                                    3,
                                    {{"a;", {CweLabel::kCwe469}},
                                     {"b;", {CweLabel::kCwe119}},
                                     {"c;", {CweLabel::kCwe120}}},
                                    "t;"});
  CHECK(parrot.generate(request(three)) == "CWE-469");
  CHECK_THROWS_AS(parrot.generate(request(p)), NoShotError);
}

TEST_CASE("injected failures") {
  auto mock = MockProvider::fixed("CWE-119");
  mock.inject_failure([](const CompletionRequest& r) { return r.prompt == "bad"; });
  CHECK_THROWS_AS(mock.generate(request("bad")), TransportError);
  CHECK(mock.generate(request("good")) == "CWE-119");
  mock.inject_failure([](const CompletionRequest&) { return true; }, true);
  CHECK_THROWS_AS(mock.generate(request("good")), RefusalError);
  CHECK(mock.calls() == 3);
}

TEST_CASE("failed completions are not cached") {
  test_support::TempDir dir("cache-fail");
  ResponseCache cache(dir.path());
  auto mock = MockProvider::parrot();
  CHECK_THROWS_AS(complete(request("no shots here"), mock, &cache), NoShotError);
  CHECK(cache.stats().entries == 0);
}
