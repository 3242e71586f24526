#include "vulnshot/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "vulnshot/errors.hpp"
#include "vulnshot/io.hpp"

namespace vulnshot {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string line_prefix(std::size_t line_no) {
  return "line " + std::to_string(line_no) + ": ";
}

}  // namespace

Corpus::Corpus(std::vector<CodeSample> train, std::vector<CodeSample> test, IngestStats stats)
    : train_(std::move(train)), test_(std::move(test)), stats_(std::move(stats)) {
  auto add = [this](Split split, const std::vector<CodeSample>& samples) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const CodeSample& s = samples[i];
      if (is_blank(s.code)) throw DataError("sample '" + s.id + "' has empty code");
      if (s.truth.empty()) throw DataError("sample '" + s.id + "' has no label");
      if (!by_id_.emplace(s.id, std::make_pair(split, i)).second) {
        throw DataError("duplicate sample id '" + s.id + "'");
      }
    }
  };
  add(Split::kTrain, train_);
  add(Split::kTest, test_);
}

const CodeSample* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return nullptr;
  const auto& [split, idx] = it->second;
  return split == Split::kTrain ? &train_[idx] : &test_[idx];
}

Corpus ingest_text(std::string_view jsonl, const IngestOptions& options) {
  std::vector<CodeSample> train;
  std::vector<CodeSample> test;
  IngestStats stats;
  std::unordered_map<std::string, std::size_t> seen_ids;  // id -> line

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (is_blank(line)) continue;

    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(line_prefix(line_no) + "malformed JSON: " + e.what());
    }
    if (!row.is_object()) throw DataError(line_prefix(line_no) + "expected a JSON object");

    auto string_field = [&](const std::string& name) -> std::string {
      auto it = row.find(name);
      if (it == row.end() || !it->is_string()) {
        throw DataError(line_prefix(line_no) + "missing or non-string field '" + name + "'");
      }
      return it->get<std::string>();
    };

    std::string id = string_field(options.id_field);
    std::string code = string_field(options.code_field);
    std::string split = string_field(options.split_field);
    auto labels_it = row.find(options.labels_field);
    if (labels_it == row.end() || !labels_it->is_array()) {
      throw DataError(line_prefix(line_no) + "missing or non-array field '" +
                      options.labels_field + "'");
    }

    if (split != "train" && split != "test") {
      throw DataError(line_prefix(line_no) + "unknown split '" + split + "'");
    }
    if (is_blank(code)) throw DataError(line_prefix(line_no) + "empty code for id '" + id + "'");
    if (auto [it, inserted] = seen_ids.emplace(id, line_no); !inserted) {
      throw DataError(line_prefix(line_no) + "duplicate id '" + id + "' (first seen on line " +
                      std::to_string(it->second) + ")");
    }

    ++stats.records;
    LabelSet truth;
    for (const auto& label : *labels_it) {
      if (!label.is_string()) {
        throw DataError(line_prefix(line_no) + "label entries must be strings");
      }
      const auto name = label.get<std::string>();
      if (auto cwe = cwe_from_name(name)) {
        truth.insert(*cwe);
      } else {
        ++stats.filtered_labels[name];
      }
    }
    if (labels_it->empty()) {
      ++stats.dropped_non_vulnerable;
      continue;
    }
    if (truth.empty()) {
      ++stats.dropped_out_of_scope;
      continue;
    }
    ++stats.retained;
    auto& dest = split == "train" ? train : test;
    dest.push_back(CodeSample{std::move(id), std::move(code), truth});
  }
  return Corpus(std::move(train), std::move(test), std::move(stats));
}

Corpus ingest(const std::filesystem::path& path, const IngestOptions& options) {
  if (!std::filesystem::exists(path)) throw DataError("corpus file not found: " + path.string());
  return ingest_text(read_file(path), options);
}

std::size_t ValidationReport::label_total() const {
  std::size_t total = 0;
  for (const auto& [label, counts] : label_counts) total += counts.train + counts.test;
  return total;
}

ValidationReport validate(const Corpus& corpus) {
  ValidationReport report;
  report.train_size = corpus.train().size();
  report.test_size = corpus.test().size();
  report.ingest = corpus.stats();
  for (CweLabel l : kAllLabels) report.label_counts[l] = {};

  std::map<std::string_view, LeakageWarning> by_code;
  for (const auto& s : corpus.train()) {
    for (CweLabel l : s.truth.sorted()) ++report.label_counts[l].train;
    by_code[s.code].train_ids.push_back(s.id);
  }
  for (const auto& s : corpus.test()) {
    for (CweLabel l : s.truth.sorted()) ++report.label_counts[l].test;
    auto it = by_code.find(s.code);
    if (it != by_code.end()) it->second.test_ids.push_back(s.id);
  }
  // Train ingestion order.
  for (const auto& s : corpus.train()) {
    auto it = by_code.find(s.code);
    if (it == by_code.end()) continue;
    if (!it->second.test_ids.empty()) report.leakage.push_back(std::move(it->second));
    by_code.erase(it);
  }
  return report;
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [label, counts] : report.label_counts) {
    labels[cwe_name(label)] = {{"train", counts.train}, {"test", counts.test}};
  }
  nlohmann::json leakage = nlohmann::json::array();
  for (const auto& w : report.leakage) {
    leakage.push_back({{"train_ids", w.train_ids}, {"test_ids", w.test_ids}});
  }
  nlohmann::json filtered = nlohmann::json::object();
  for (const auto& [name, n] : report.ingest.filtered_labels) filtered[name] = n;
  return {
      {"train_size", report.train_size},
      {"test_size", report.test_size},
      {"label_counts", labels},
      {"label_total", report.label_total()},
      {"leakage_warnings", leakage},
      {"ingest",
       {{"records", report.ingest.records},
        {"retained", report.ingest.retained},
        {"dropped_non_vulnerable", report.ingest.dropped_non_vulnerable},
        {"dropped_out_of_scope", report.ingest.dropped_out_of_scope},
        {"filtered_labels", filtered}}},
  };
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  auto emit = [&out](const CodeSample& s, const char* split) {
    nlohmann::json row = {
        {"id", s.id}, {"code", s.code}, {"labels", s.truth.names()}, {"split", split}};
    out += row.dump();
    out += '\n';
  };
  for (const auto& s : corpus.train()) emit(s, "train");
  for (const auto& s : corpus.test()) emit(s, "test");
  return out;
}

}  // namespace vulnshot
