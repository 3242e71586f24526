#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "vulnshot/http.hpp"

#include <cstdlib>

#include "vulnshot/errors.hpp"

namespace vulnshot::http {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // /path?query
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("URL without scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Response post_json(const std::string& url,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   const std::string& body, std::chrono::seconds timeout) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  auto result = client.Post(path, h, body, "application/json");
  if (!result) {
    throw TransportError("POST " + origin + path + " failed: " + httplib::to_string(result.error()));
  }
  if (result->status == 429 || result->status >= 500) {
    throw TransportError("POST " + origin + " returned HTTP " + std::to_string(result->status));
  }
  return Response{result->status, result->body};
}

std::string api_key_from_env(const std::string& var) {
  if (var.empty()) return {};
  const char* value = std::getenv(var.c_str());
  if (value == nullptr || *value == '\0') {
    throw UsageError("environment variable " + var + " is not set");
  }
  return value;
}

}  // namespace vulnshot::http
