#include "vulnshot/cwe.hpp"

#include <bit>
#include <cctype>
#include <charconv>

namespace vulnshot {

int cwe_number(CweLabel label) {
  switch (label) {
    case CweLabel::kCwe119: return 119;
    case CweLabel::kCwe120: return 120;
    case CweLabel::kCwe469: return 469;
    case CweLabel::kCwe476: return 476;
  }
  return 0;
}

std::string cwe_name(CweLabel label) {
  return "CWE-" + std::to_string(cwe_number(label));
}

std::optional<CweLabel> cwe_from_number(int number) {
  for (CweLabel l : kAllLabels) {
    if (cwe_number(l) == number) return l;
  }
  return std::nullopt;
}

std::optional<CweLabel> cwe_from_name(std::string_view name) {
  if (name.size() < 5) return std::nullopt;
  auto upper = [](char c) {
    return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  };
  if (upper(name[0]) != 'C' || upper(name[1]) != 'W' || upper(name[2]) != 'E' ||
      name[3] != '-') {
    return std::nullopt;
  }
  std::string_view digits = name.substr(4);
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return cwe_from_number(value);
}

std::size_t LabelSet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<CweLabel> LabelSet::sorted() const {
  std::vector<CweLabel> out;
  for (CweLabel l : kAllLabels) {
    if (contains(l)) out.push_back(l);
  }
  return out;
}

std::string LabelSet::to_string() const {
  std::string out;
  for (CweLabel l : sorted()) {
    if (!out.empty()) out += ", ";
    out += cwe_name(l);
  }
  return out;
}

std::vector<std::string> LabelSet::names() const {
  std::vector<std::string> out;
  for (CweLabel l : sorted()) out.push_back(cwe_name(l));
  return out;
}

}  // namespace vulnshot
