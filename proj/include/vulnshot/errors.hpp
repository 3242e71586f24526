#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vulnshot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed corpus or index rows, duplicate ids,
/// dimension mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Anything raised while talking to an embedding or completion provider.
class ProviderError : public Error {
 public:
  using Error::Error;
  virtual bool retryable() const { return false; }
};

/// Network-level failure. Retried with backoff.
class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
  bool retryable() const override { return true; }
};

/// The provider answered but declined (safety block, refusal). The reason
/// is kept verbatim.
class RefusalError : public ProviderError {
 public:
  explicit RefusalError(std::string reason)
      : ProviderError("provider refused: " + reason), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

class OversizeInputError : public ProviderError {
 public:
  OversizeInputError(std::size_t size, std::size_t limit)
      : ProviderError("input of " + std::to_string(size) + " bytes exceeds limit of " +
                      std::to_string(limit)),
        size_(size),
        limit_(limit) {}
  std::size_t size() const { return size_; }
  std::size_t limit() const { return limit_; }

 private:
  std::size_t size_;
  std::size_t limit_;
};

/// Parrot mock asked to echo a prompt that has no shot block.
class NoShotError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class CacheError : public Error {
 public:
  using Error::Error;
};

}  // namespace vulnshot
