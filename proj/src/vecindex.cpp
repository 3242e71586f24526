#include "vulnshot/vecindex.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

#include "vulnshot/errors.hpp"
#include "vulnshot/io.hpp"

namespace vulnshot {

Index::Index(std::vector<IndexEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw DataError("cannot build an index from zero entries");
  dimension_ = entries_.front().vector.dimension();
  std::unordered_set<std::string_view> ids;
  for (const auto& e : entries_) {
    if (!ids.insert(e.sample_id).second) {
      throw DataError("duplicate index id '" + e.sample_id + "'");
    }
    if (e.vector.dimension() != dimension_) {
      throw DataError("dimension mismatch in index: entry '" + e.sample_id + "' has " +
                      std::to_string(e.vector.dimension()) + ", expected " +
                      std::to_string(dimension_));
    }
  }
}

std::vector<Neighbor> Index::top_k(const EmbeddingVector& query, std::size_t k) const {
  if (k == 0) throw UsageError("top_k requires k >= 1");
  if (query.dimension() != dimension_) {
    throw DataError("query dimension " + std::to_string(query.dimension()) +
                    " does not match index dimension " + std::to_string(dimension_));
  }
  std::vector<Neighbor> all;
  all.reserve(entries_.size());
  for (const auto& e : entries_) all.push_back({e.sample_id, e.vector.dot(query)});

  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    ranks_before);
  all.resize(n);
  return all;
}

std::string Index::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    nlohmann::json row = {{"id", e.sample_id},
                          {"vector", std::vector<double>(e.vector.values().begin(),
                                                         e.vector.values().end())},
                          {"labels", e.truth.names()}};
    out += row.dump();
    out += '\n';
  }
  return out;
}

Index Index::from_jsonl(std::string_view text) {
  std::vector<IndexEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto row = nlohmann::json::parse(line);
      IndexEntry entry;
      entry.sample_id = row.at("id").get<std::string>();
      entry.vector = EmbeddingVector::from_stored(row.at("vector").get<std::vector<double>>());
      for (const auto& name : row.at("labels").get<std::vector<std::string>>()) {
        auto label = cwe_from_name(name);
        if (!label) throw DataError("unknown label '" + name + "'");
        entry.truth.insert(*label);
      }
      entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("index line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("index line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Index(std::move(entries));
}

void Index::save(const std::filesystem::path& path) const { write_file_atomic(path, to_jsonl()); }

Index Index::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("index file not found: " + path.string());
  return from_jsonl(read_file(path));
}

}  // namespace vulnshot
