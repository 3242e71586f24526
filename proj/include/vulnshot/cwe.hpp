#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vulnshot {

/// The four weakness categories that are scored. Enumerator order is the
/// canonical ascending numeric order used everywhere labels are printed.
enum class CweLabel : std::uint8_t {
  kCwe119 = 0,  // buffer overflow
  kCwe120 = 1,  // stack-based buffer overflow
  kCwe469 = 2,  // pointer arithmetic error
  kCwe476 = 3,  // null pointer dereference
};

inline constexpr std::size_t kNumLabels = 4;

inline constexpr std::array<CweLabel, kNumLabels> kAllLabels = {
    CweLabel::kCwe119, CweLabel::kCwe120, CweLabel::kCwe469, CweLabel::kCwe476};

/// Numeric CWE id, e.g. 119.
int cwe_number(CweLabel label);

/// "CWE-119" style name.
std::string cwe_name(CweLabel label);

std::optional<CweLabel> cwe_from_number(int number);

/// Accepts "CWE-119" (case-insensitive). Anything outside the four
/// admissible codes yields nullopt.
std::optional<CweLabel> cwe_from_name(std::string_view name);

/// Unordered, deduplicated subset of the four admissible labels.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  LabelSet(std::initializer_list<CweLabel> labels) {
    for (CweLabel l : labels) insert(l);
  }

  static constexpr LabelSet from_bits(std::uint8_t bits) {
    LabelSet s;
    s.bits_ = static_cast<std::uint8_t>(bits & 0x0F);
    return s;
  }

  void insert(CweLabel l) { bits_ |= bit(l); }
  void erase(CweLabel l) { bits_ &= static_cast<std::uint8_t>(~bit(l)); }
  bool contains(CweLabel l) const { return (bits_ & bit(l)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const;
  std::uint8_t bits() const { return bits_; }

  /// Labels in ascending numeric order.
  std::vector<CweLabel> sorted() const;

  /// "CWE-119, CWE-476"; empty set renders as "".
  std::string to_string() const;

  /// Names in ascending order, for JSON arrays.
  std::vector<std::string> names() const;

  bool is_subset_of(const LabelSet& other) const {
    return (bits_ & ~other.bits_) == 0;
  }

  friend LabelSet operator|(LabelSet a, LabelSet b) {
    return from_bits(a.bits_ | b.bits_);
  }
  friend LabelSet operator&(LabelSet a, LabelSet b) {
    return from_bits(a.bits_ & b.bits_);
  }
  /// Set difference a \ b.
  friend LabelSet operator-(LabelSet a, LabelSet b) {
    return from_bits(static_cast<std::uint8_t>(a.bits_ & ~b.bits_));
  }
  LabelSet& operator|=(LabelSet o) {
    bits_ |= o.bits_;
    return *this;
  }
  friend bool operator==(LabelSet a, LabelSet b) = default;

 private:
  static constexpr std::uint8_t bit(CweLabel l) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l));
  }
  std::uint8_t bits_ = 0;
};

}  // namespace vulnshot
