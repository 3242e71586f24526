#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "vulnshot/embedding.hpp"
#include "vulnshot/errors.hpp"
#include "vulnshot/http.hpp"
#include "vulnshot/llmclient.hpp"

using namespace vulnshot;

namespace {

/// Local HTTP server on an ephemeral port, stopped on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteEmbeddingConfig embedding_config(const LocalServer& s, std::size_t dim) {
  RemoteEmbeddingConfig c;
  c.endpoint = s.url("/embed");
  c.api_key_env = "VULNSHOT_TEST_KEY";
  c.dimension = dim;
  c.max_input_bytes = 64;
  c.timeout = std::chrono::seconds(5);
  c.retries = 2;
  c.backoff = std::chrono::milliseconds(1);
  return c;
}

RemoteProviderConfig provider_config(const LocalServer& s) {
  RemoteProviderConfig c;
  c.endpoint = s.url("/models/{model}:generateContent");
  c.api_key_env = "";
  c.timeout = std::chrono::seconds(5);
  c.retries = 2;
  c.backoff = std::chrono::milliseconds(1);
  return c;
}

nlohmann::json candidate_reply(const std::string& text, const std::string& finish = "STOP") {
  return {{"candidates",
           {{{"content", {{"parts", {{{"text", text}}}}}}, {"finishReason", finish}}}}};
}

}  // namespace

TEST_CASE("remote embedding request shape, key header and normalization") {
  ::setenv("VULNSHOT_TEST_KEY", "secret", 1);
  LocalServer s;
  std::string seen_key;
  nlohmann::json seen_body;
  s.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    seen_key = req.get_header_value("x-goog-api-key");
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(R"({"embedding":{"values":[3.0,4.0]}})", "application/json");
  });
  RemoteEmbeddingBackend backend(embedding_config(s, 2));
  const auto v = backend.embed({"int x;", LabelSet{CweLabel::kCwe119}});
  CHECK(seen_key == "secret");
  CHECK(seen_body["outputDimensionality"] == 2);
  CHECK(seen_body["content"]["parts"][0]["text"] == "int x;\nLABELS: CWE-119");
  CHECK(v.values()[0] == doctest::Approx(0.6));
  CHECK(v.values()[1] == doctest::Approx(0.8));

  RemoteEmbeddingBackend wrong_dim(embedding_config(s, 3));
  CHECK_THROWS_AS(wrong_dim.embed({"int x;", std::nullopt}), ProviderError);
}

TEST_CASE("remote embedding rejects oversize input and reports the batch index") {
  ::setenv("VULNSHOT_TEST_KEY", "secret", 1);
  LocalServer s;
  std::atomic<int> calls{0};
  s.server().Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.set_content(R"({"embedding":{"values":[1.0,0.0]}})", "application/json");
  });
  RemoteEmbeddingBackend backend(embedding_config(s, 2));
  CHECK_THROWS_AS(backend.embed({std::string(65, 'a'), std::nullopt}), OversizeInputError);
  CHECK(calls == 0);
  const std::vector<EmbeddingInput> batch = {
      {"a;", std::nullopt}, {std::string(200, 'b'), std::nullopt}, {"c;", std::nullopt}};
  try {
    embed_batch(batch, backend);
    FAIL("expected BatchEmbeddingError");
  } catch (const BatchEmbeddingError& e) {
    REQUIRE(e.failures().size() == 1);
    CHECK(e.failures()[0].index == 1);
  }
}

TEST_CASE("transport errors are retried, then surface") {
  ::setenv("VULNSHOT_TEST_KEY", "secret", 1);
  LocalServer s;
  std::atomic<int> calls{0};
  s.server().Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"embedding":{"values":[0.0,2.0]}})", "application/json");
  });
  RemoteEmbeddingBackend backend(embedding_config(s, 2));
  CHECK(backend.embed({"x;", std::nullopt}).values()[1] == doctest::Approx(1.0));
  CHECK(calls == 3);

  calls = -100;
  CHECK_THROWS_AS(backend.embed({"x;", std::nullopt}), TransportError);
  CHECK(calls == -97);
}

TEST_CASE("missing api key variable is a usage error") {
  ::unsetenv("VULNSHOT_UNSET_KEY");
  RemoteEmbeddingConfig c;
  c.endpoint = "http://127.0.0.1:1/embed";
  c.api_key_env = "VULNSHOT_UNSET_KEY";
  CHECK_THROWS_AS(RemoteEmbeddingBackend{c}, UsageError);
}

TEST_CASE("remote provider returns candidate text") {
  LocalServer s;
  nlohmann::json seen;
  std::string seen_path;
  s.server().Post(R"(/models/(.+))", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    seen_path = req.path;
    res.set_content(candidate_reply("CWE-476").dump(), "application/json");
  });
  RemoteProvider p(provider_config(s));
  CompletionRequest req{"gemini-test", "Code: x\nVulnerabilities:", 0.0, 128};
  CHECK(p.generate(req) == "CWE-476");
  CHECK(seen_path == "/models/gemini-test:generateContent");
  CHECK(seen["contents"][0]["parts"][0]["text"] == req.prompt);
  CHECK(seen["generationConfig"]["temperature"] == 0.0);
  CHECK(seen["generationConfig"]["maxOutputTokens"] == 128);
}

TEST_CASE("remote provider refusals are typed and not retried") {
  LocalServer s;
  std::atomic<int> calls{0};
  std::atomic<int> mode{0};  // 0 block, 1 finish reason, 2 no candidates
  s.server().Post(R"(/models/(.+))", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    if (mode == 0) {
      res.set_content(R"({"promptFeedback":{"blockReason":"SAFETY"}})", "application/json");
    } else if (mode == 1) {
      res.set_content(candidate_reply("", "SAFETY").dump(), "application/json");
    } else {
      res.set_content(R"({"candidates":[]})", "application/json");
    }
  });
  RemoteProvider p(provider_config(s));
  CompletionRequest req{"m", "prompt", 0.0, 128};
  CHECK_THROWS_AS(p.generate(req), RefusalError);
  CHECK(calls == 1);
  mode = 1;
  try {
    p.generate(req);
    FAIL("expected RefusalError");
  } catch (const RefusalError& e) {
    CHECK(e.reason() == "SAFETY");
  }
  mode = 2;
  CHECK_THROWS_AS(p.generate(req), RefusalError);
  CHECK(calls == 3);
}

TEST_CASE("unreachable endpoint is a transport error") {
  RemoteProviderConfig c;
  c.endpoint = "http://127.0.0.1:1/models/{model}:generateContent";
  c.api_key_env = "";
  c.timeout = std::chrono::seconds(1);
  c.retries = 1;
  c.backoff = std::chrono::milliseconds(1);
  RemoteProvider p(c);
  CHECK_THROWS_AS(p.generate({"m", "prompt", 0.0, 128}), TransportError);
}
