#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace vulnshot::http {

struct Response {
  int status = 0;
  std::string body;
};

/// POSTs a JSON body. Connection-level failures and 429/5xx statuses raise
/// TransportError; other statuses are returned to the caller.
Response post_json(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                   const std::string& body, std::chrono::seconds timeout);

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds base_backoff{500};
};

/// Runs `fn`, retrying on retryable ProviderErrors with exponential
/// backoff (base, 2*base, 4*base, ...). Other exceptions propagate at once.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn());

/// Reads the named environment variable; throws UsageError if unset.
std::string api_key_from_env(const std::string& var);

}  // namespace vulnshot::http

#include "vulnshot/http_inl.hpp"
