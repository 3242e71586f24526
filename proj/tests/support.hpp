#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

#include "vulnshot/cwe.hpp"
#include "vulnshot/metrics.hpp"

namespace test_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vulnshot-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline vulnshot::LabelSet random_label_set(std::mt19937_64& gen) {
  return vulnshot::LabelSet::from_bits(static_cast<std::uint8_t>(gen() & 0x0F));
}

/// 1..max_n pairs of uniformly random subsets (empty sets included).
inline std::vector<vulnshot::LabeledPair> random_pairs(std::mt19937_64& gen, std::size_t max_n) {
  const std::size_t n = 1 + gen() % max_n;
  std::vector<vulnshot::LabeledPair> pairs(n);
  for (auto& p : pairs) {
    p.truth = random_label_set(gen);
    p.pred = random_label_set(gen);
  }
  return pairs;
}

}  // namespace test_support
