#include "vulnshot/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "vulnshot/errors.hpp"
#include "vulnshot/io.hpp"

namespace vulnshot {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  if (!j.is_object()) throw UsageError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UsageError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

json labels_json(const LabelSet& s) { return s.names(); }

LabelSet labels_from_json(const json& j) {
  LabelSet out;
  for (const auto& name : j.get<std::vector<std::string>>()) {
    auto l = cwe_from_name(name);
    if (!l) throw DataError("unknown label '" + name + "' in record");
    out.insert(*l);
  }
  return out;
}

Strategy parse_strategy(const std::string& s) {
  auto v = strategy_from_string(s);
  if (!v) throw UsageError("unknown strategy '" + s + "'");
  return *v;
}

bool uses_provider(Strategy s) { return s != Strategy::kRetrievalLabeling; }
bool uses_retrieval(Strategy s) {
  return s == Strategy::kRetrievalFewShot || s == Strategy::kRetrievalLabeling;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown_keys(j,
                      {"strategies", "shot_counts", "seed", "paths", "provider", "embedding",
                       "template", "shot_order", "include_labels_in_index", "strict",
                       "max_in_flight"},
                      "config");
  ExperimentConfig c;
  if (auto it = j.find("strategies"); it != j.end()) {
    c.strategies.clear();
    for (const auto& s : it->get<std::vector<std::string>>()) c.strategies.push_back(parse_strategy(s));
  }
  read_opt(j, "shot_counts", c.shot_counts);
  read_opt(j, "seed", c.seed);
  read_opt(j, "include_labels_in_index", c.include_labels_in_index);
  read_opt(j, "strict", c.strict);
  read_opt(j, "max_in_flight", c.max_in_flight);
  if (auto it = j.find("shot_order"); it != j.end()) {
    auto o = shot_order_from_string(it->get<std::string>());
    if (!o) throw UsageError("shot_order must be similar-first or similar-last");
    c.shot_order = *o;
  }

  if (auto it = j.find("paths"); it != j.end()) {
    reject_unknown_keys(*it, {"corpus", "index", "cache", "report_dir"}, "paths");
    std::string corpus, index, cache, report_dir;
    read_opt(*it, "corpus", corpus);
    read_opt(*it, "index", index);
    read_opt(*it, "cache", cache);
    read_opt(*it, "report_dir", report_dir);
    c.paths = {resolve(base_dir, corpus), resolve(base_dir, index), resolve(base_dir, cache),
               resolve(base_dir, report_dir)};
  }

  if (auto it = j.find("provider"); it != j.end()) {
    reject_unknown_keys(*it,
                        {"kind", "mock_mode", "fixed_text", "mock_fail_substring", "model_id",
                         "temperature", "max_output_tokens", "endpoint", "api_key_env",
                         "timeout_s", "retries", "backoff_ms", "max_in_flight"},
                        "provider");
    auto& p = c.provider;
    read_opt(*it, "kind", p.kind);
    read_opt(*it, "mock_mode", p.mock_mode);
    read_opt(*it, "fixed_text", p.fixed_text);
    read_opt(*it, "mock_fail_substring", p.mock_fail_substring);
    read_opt(*it, "model_id", p.model_id);
    read_opt(*it, "temperature", p.temperature);
    read_opt(*it, "max_output_tokens", p.max_output_tokens);
    read_opt(*it, "endpoint", p.remote.endpoint);
    read_opt(*it, "api_key_env", p.remote.api_key_env);
    read_opt(*it, "retries", p.remote.retries);
    read_opt(*it, "max_in_flight", p.remote.max_in_flight);
    long long timeout = p.remote.timeout.count(), backoff = p.remote.backoff.count();
    read_opt(*it, "timeout_s", timeout);
    read_opt(*it, "backoff_ms", backoff);
    p.remote.timeout = std::chrono::seconds(timeout);
    p.remote.backoff = std::chrono::milliseconds(backoff);
  }

  if (auto it = j.find("embedding"); it != j.end()) {
    reject_unknown_keys(*it,
                        {"kind", "dimension", "endpoint", "model", "api_key_env",
                         "max_input_bytes", "timeout_s", "retries", "backoff_ms",
                         "max_in_flight"},
                        "embedding");
    auto& e = c.embedding;
    read_opt(*it, "kind", e.kind);
    read_opt(*it, "dimension", e.dimension);
    read_opt(*it, "endpoint", e.remote.endpoint);
    read_opt(*it, "model", e.remote.model);
    read_opt(*it, "api_key_env", e.remote.api_key_env);
    read_opt(*it, "max_input_bytes", e.remote.max_input_bytes);
    read_opt(*it, "retries", e.remote.retries);
    read_opt(*it, "max_in_flight", e.remote.max_in_flight);
    long long timeout = e.remote.timeout.count(), backoff = e.remote.backoff.count();
    read_opt(*it, "timeout_s", timeout);
    read_opt(*it, "backoff_ms", backoff);
    e.remote.timeout = std::chrono::seconds(timeout);
    e.remote.backoff = std::chrono::milliseconds(backoff);
    e.remote.dimension = e.dimension;
  }

  if (auto it = j.find("template"); it != j.end()) {
    reject_unknown_keys(*it, {"id", "preamble", "code_label", "answer_label"}, "template");
    auto& t = c.prompt_template;
    read_opt(*it, "id", t.id);
    read_opt(*it, "preamble", t.preamble);
    read_opt(*it, "code_label", t.code_label);
    read_opt(*it, "answer_label", t.answer_label);
  }
  c.check();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return from_json(j, path.parent_path());
}

json ExperimentConfig::to_json() const {
  json strategies_j = json::array();
  for (Strategy s : strategies) strategies_j.push_back(to_string(s));
  return {
      {"strategies", strategies_j},
      {"shot_counts", shot_counts},
      {"seed", seed},
      {"paths",
       {{"corpus", paths.corpus.string()},
        {"index", paths.index.string()},
        {"cache", paths.cache.string()},
        {"report_dir", paths.report_dir.string()}}},
      {"provider",
       {{"kind", provider.kind},
        {"mock_mode", provider.mock_mode},
        {"fixed_text", provider.fixed_text},
        {"mock_fail_substring", provider.mock_fail_substring},
        {"model_id", provider.model_id},
        {"temperature", provider.temperature},
        {"max_output_tokens", provider.max_output_tokens},
        {"endpoint", provider.remote.endpoint},
        {"api_key_env", provider.remote.api_key_env},
        {"timeout_s", provider.remote.timeout.count()},
        {"retries", provider.remote.retries},
        {"backoff_ms", provider.remote.backoff.count()},
        {"max_in_flight", provider.remote.max_in_flight}}},
      {"embedding",
       {{"kind", embedding.kind},
        {"dimension", embedding.dimension},
        {"endpoint", embedding.remote.endpoint},
        {"model", embedding.remote.model},
        {"api_key_env", embedding.remote.api_key_env},
        {"max_input_bytes", embedding.remote.max_input_bytes},
        {"timeout_s", embedding.remote.timeout.count()},
        {"retries", embedding.remote.retries},
        {"backoff_ms", embedding.remote.backoff.count()},
        {"max_in_flight", embedding.remote.max_in_flight}}},
      {"template",
       {{"id", prompt_template.id},
        {"preamble", prompt_template.preamble},
        {"code_label", prompt_template.code_label},
        {"answer_label", prompt_template.answer_label}}},
      {"shot_order", to_string(shot_order)},
      {"include_labels_in_index", include_labels_in_index},
      {"strict", strict},
      {"max_in_flight", max_in_flight},
  };
}

void ExperimentConfig::check() const {
  if (strategies.empty()) throw UsageError("config names no strategies");
  const bool needs_k = std::any_of(strategies.begin(), strategies.end(),
                                   [](Strategy s) { return s != Strategy::kZeroShot; });
  if (needs_k && shot_counts.empty()) throw UsageError("few-shot strategies need shot_counts");
  for (std::size_t k : shot_counts) {
    if (k == 0) throw UsageError("shot counts must be >= 1");
  }
  if (std::set<std::size_t>(shot_counts.begin(), shot_counts.end()).size() != shot_counts.size()) {
    throw UsageError("shot counts must be distinct");
  }
  if (std::set<Strategy>(strategies.begin(), strategies.end()).size() != strategies.size()) {
    throw UsageError("strategies must be distinct");
  }
  if (provider.kind != "mock" && provider.kind != "remote") {
    throw UsageError("provider.kind must be mock or remote");
  }
  if (provider.kind == "mock" && provider.mock_mode != "oracle" && provider.mock_mode != "parrot" &&
      provider.mock_mode != "fixed") {
    throw UsageError("provider.mock_mode must be oracle, parrot or fixed");
  }
  if (embedding.kind != "offline" && embedding.kind != "remote") {
    throw UsageError("embedding.kind must be offline or remote");
  }
  if (embedding.dimension == 0) throw UsageError("embedding.dimension must be positive");
  if (max_in_flight == 0) throw UsageError("max_in_flight must be positive");
  CompletionRequest probe{provider.model_id, "x", provider.temperature, provider.max_output_tokens};
  probe.check();
  prompt_template.check();
}

// ---------------------------------------------------------------------------
// Records and reports

json to_json(const PredictionRecord& r) {
  json neighbors = json::array();
  for (const auto& n : r.neighbors) neighbors.push_back({{"id", n.sample_id}, {"similarity", n.similarity}});
  json parsed = nullptr;
  if (r.parsed) {
    parsed = {{"labels", labels_json(r.parsed->labels)},
              {"unknown_mentions", r.parsed->unknown_mentions},
              {"empty_parse", r.parsed->empty_parse}};
  }
  return {{"test_id", r.test_id},
          {"strategy", to_string(r.strategy)},
          {"k", r.k},
          {"neighbors", neighbors},
          {"shot_ids", r.shot_ids},
          {"prompt_hash", r.prompt_hash},
          {"raw_text", r.raw_text},
          {"parsed", parsed},
          {"pred", labels_json(r.pred)},
          {"truth", labels_json(r.truth)},
          {"cached", r.cached},
          {"error", r.error ? json(*r.error) : json(nullptr)}};
}

PredictionRecord record_from_json(const json& j) {
  PredictionRecord r;
  r.test_id = j.at("test_id").get<std::string>();
  r.strategy = parse_strategy(j.at("strategy").get<std::string>());
  r.k = j.at("k").get<std::size_t>();
  for (const auto& n : j.at("neighbors")) {
    r.neighbors.push_back({n.at("id").get<std::string>(), n.at("similarity").get<double>()});
  }
  r.shot_ids = j.at("shot_ids").get<std::vector<std::string>>();
  r.prompt_hash = j.at("prompt_hash").get<std::string>();
  r.raw_text = j.at("raw_text").get<std::string>();
  if (const auto& p = j.at("parsed"); !p.is_null()) {
    ParseOutcome po;
    po.labels = labels_from_json(p.at("labels"));
    po.unknown_mentions = p.at("unknown_mentions").get<std::vector<std::string>>();
    po.empty_parse = p.at("empty_parse").get<bool>();
    r.parsed = po;
  }
  r.pred = labels_from_json(j.at("pred"));
  r.truth = labels_from_json(j.at("truth"));
  r.cached = j.at("cached").get<bool>();
  if (const auto& e = j.at("error"); !e.is_null()) r.error = e.get<std::string>();
  return r;
}

std::string records_to_jsonl(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> records_from_jsonl(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CellReport> cells_from_records(const std::vector<PredictionRecord>& records) {
  std::vector<std::pair<Strategy, std::size_t>> order;
  std::map<std::pair<Strategy, std::size_t>, std::vector<LabeledPair>> pairs;
  std::map<std::pair<Strategy, std::size_t>, std::size_t> failures;
  for (const auto& r : records) {
    auto key = std::make_pair(r.strategy, r.k);
    auto [it, inserted] = pairs.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back({r.truth, r.pred});
    if (r.error) ++failures[key];
  }
  std::vector<CellReport> cells;
  for (const auto& key : order) {
    cells.push_back({key.first, key.second, report(pairs[key]), failures[key]});
  }
  return cells;
}

namespace {

MetricsReport metrics_from_json(const json& m) {
  MetricsReport r;
  r.n_instances = m.at("n_instances").get<std::size_t>();
  r.n_labels = m.at("n_labels").get<std::size_t>();
  r.subset_accuracy = m.at("subset_accuracy").get<double>();
  r.hamming_accuracy = m.at("hamming_accuracy").get<double>();
  r.partial_match_accuracy = m.at("partial_match_accuracy").get<double>();
  r.partial_match_truth = m.at("partial_match_truth").get<double>();
  r.micro_precision = m.at("micro_precision").get<double>();
  r.micro_recall = m.at("micro_recall").get<double>();
  r.micro_f1 = m.at("micro_f1").get<double>();
  r.exact_matches = m.at("exact_matches").get<std::size_t>();
  r.counts = {m.at("tp").get<std::size_t>(), m.at("fp").get<std::size_t>(),
              m.at("fn").get<std::size_t>(), m.at("tn").get<std::size_t>()};
  return r;
}

}  // namespace

json to_json(const RunReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"strategy", to_string(c.strategy)},
                     {"k", c.k},
                     {"failures", c.failures},
                     {"metrics", to_json(c.metrics)}});
  }
  const auto& cfg = r.config;
  json decoding = nullptr;
  if (cfg.contains("provider")) {
    decoding = {{"temperature", cfg["provider"].value("temperature", 0.0)},
                {"max_output_tokens", cfg["provider"].value("max_output_tokens", 0)}};
  }
  return {{"template_id", r.template_id},
          {"shot_order", r.shot_order},
          {"decoding", decoding},
          {"partial_match", "mean per-instance |pred & truth| / |pred | truth|; "
                            "partial_match_truth uses |truth| as denominator"},
          {"parse_policy", "case-insensitive CWE[ -_]?<digits>; out-of-scope ids logged, not "
                           "scored; unparseable and failed replies score as empty sets"},
          {"config", r.config},
          {"cells", cells}};
}

RunReport report_from_json(const json& j) {
  RunReport r;
  try {
    r.template_id = j.at("template_id").get<std::string>();
    r.shot_order = j.at("shot_order").get<std::string>();
    r.config = j.at("config");
    for (const auto& c : j.at("cells")) {
      r.cells.push_back({parse_strategy(c.at("strategy").get<std::string>()),
                         c.at("k").get<std::size_t>(),
                         metrics_from_json(c.at("metrics")),
                         c.at("failures").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

json metadata_json(const RunReport& r) {
  return {{"wall_clock_ms", r.wall_clock_ms},
          {"provider_calls", r.provider_calls},
          {"cache_hits", r.cache_hits}};
}

// ---------------------------------------------------------------------------
// Running

Index build_index(const Corpus& corpus, const EmbeddingBackend& embedder, bool include_labels) {
  std::vector<EmbeddingInput> inputs;
  inputs.reserve(corpus.train().size());
  for (const auto& s : corpus.train()) {
    inputs.push_back({s.code, include_labels ? std::optional<LabelSet>(s.truth) : std::nullopt});
  }
  auto vectors = embed_batch(inputs, embedder);
  std::vector<IndexEntry> entries;
  entries.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    entries.push_back({corpus.train()[i].id, std::move(vectors[i]), corpus.train()[i].truth});
  }
  return Index(std::move(entries));
}

std::unique_ptr<EmbeddingBackend> make_embedder(const EmbeddingSettings& settings) {
  if (settings.kind == "offline") return std::make_unique<HashedBagOfTokens>(settings.dimension);
  if (settings.kind == "remote") {
    auto cfg = settings.remote;
    cfg.dimension = settings.dimension;
    return std::make_unique<RemoteEmbeddingBackend>(cfg);
  }
  throw UsageError("unknown embedding kind '" + settings.kind + "'");
}

std::unique_ptr<Provider> make_provider(const ProviderSettings& settings) {
  if (settings.kind == "remote") return std::make_unique<RemoteProvider>(settings.remote);
  if (settings.kind != "mock") throw UsageError("unknown provider kind '" + settings.kind + "'");
  std::unique_ptr<MockProvider> mock;
  if (settings.mock_mode == "oracle") {
    mock = std::make_unique<MockProvider>(MockProvider::Mode::kOracle);
  } else if (settings.mock_mode == "parrot") {
    mock = std::make_unique<MockProvider>(MockProvider::Mode::kParrot);
  } else if (settings.mock_mode == "fixed") {
    mock = std::make_unique<MockProvider>(MockProvider::Mode::kFixed, settings.fixed_text);
  } else {
    throw UsageError("unknown mock mode '" + settings.mock_mode + "'");
  }
  if (!settings.mock_fail_substring.empty()) {
    mock->inject_failure([needle = settings.mock_fail_substring](const CompletionRequest& r) {
      return r.prompt.find(needle) != std::string::npos;
    });
  }
  return mock;
}

std::string effective_model_id(const ProviderSettings& settings) {
  if (settings.kind != "mock") return settings.model_id;
  std::string id = "mock:" + settings.mock_mode;
  if (settings.mock_mode == "fixed") id += ":" + sha256_hex(settings.fixed_text).substr(0, 16);
  return id;
}

RunResult run_experiment(const ExperimentConfig& config, const RunInputs& inputs) {
  config.check();
  if (inputs.corpus == nullptr) throw UsageError("run needs a corpus");
  const Corpus& corpus = *inputs.corpus;
  const auto& test = corpus.test();
  const auto& train = corpus.train();
  if (test.empty()) throw DataError("corpus has no test samples");
  const auto wall_start = std::chrono::steady_clock::now();

  const bool needs_retrieval =
      std::any_of(config.strategies.begin(), config.strategies.end(), uses_retrieval);
  const bool needs_provider =
      std::any_of(config.strategies.begin(), config.strategies.end(), uses_provider);
  if (needs_provider && inputs.provider == nullptr) throw UsageError("run needs a provider");

  std::vector<std::pair<Strategy, std::size_t>> cells;
  for (Strategy s : config.strategies) {
    if (s == Strategy::kZeroShot) {
      cells.emplace_back(s, 0);
      continue;
    }
    for (std::size_t k : config.shot_counts) {
      if (s == Strategy::kRandomFewShot && k > train.size()) {
        throw UsageError("cannot draw " + std::to_string(k) + " random shots from " +
                         std::to_string(train.size()) + " training samples");
      }
      cells.emplace_back(s, k);
    }
  }
  const std::size_t max_k =
      config.shot_counts.empty()
          ? 0
          : *std::max_element(config.shot_counts.begin(), config.shot_counts.end());

  // Retrieval: one top-max_k query per test sample; every k uses a prefix.
  std::optional<Index> built;
  const Index* index = inputs.index;
  std::vector<std::vector<Neighbor>> neighbors(test.size());
  if (needs_retrieval) {
    if (inputs.embedder == nullptr) throw UsageError("retrieval strategies need an embedder");
    if (index == nullptr) {
      built.emplace(build_index(corpus, *inputs.embedder, config.include_labels_in_index));
      index = &*built;
    }
    for (const auto& e : index->entries()) {
      if (corpus.find(e.sample_id) == nullptr) {
        throw DataError("index entry '" + e.sample_id + "' is not in the corpus");
      }
    }
    std::vector<EmbeddingInput> queries;
    queries.reserve(test.size());
    for (const auto& s : test) queries.push_back({s.code, std::nullopt});
    auto qvecs = embed_batch(queries, *inputs.embedder);
    for (std::size_t t = 0; t < test.size(); ++t) neighbors[t] = index->top_k(qvecs[t], max_k);
  }

  const std::string model_id = effective_model_id(config.provider);
  std::vector<std::optional<PredictionRecord>> slots(cells.size() * test.size());
  std::atomic<std::size_t> provider_calls{0};
  std::atomic<std::size_t> cache_hits{0};
  std::atomic<bool> abort{false};
  std::mutex error_mu;
  std::exception_ptr fatal;
  std::string first_failure;

  auto run_job = [&](std::size_t slot) {
    const auto& [strategy, k] = cells[slot / test.size()];
    const CodeSample& sample = test[slot % test.size()];
    PredictionRecord rec;
    rec.test_id = sample.id;
    rec.strategy = strategy;
    rec.k = k;
    rec.truth = sample.truth;

    std::vector<Shot> shots;
    if (uses_retrieval(strategy)) {
      const auto& all = neighbors[slot % test.size()];
      rec.neighbors.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(k, all.size())));
      if (strategy == Strategy::kRetrievalLabeling) {
        rec.pred = retrieval_label(rec.neighbors, corpus);
        return rec;
      }
      shots = shots_from_neighbors(rec.neighbors, corpus, config.shot_order);
    } else if (strategy == Strategy::kRandomFewShot) {
      for (std::size_t i : select_random_indices(train.size(), k, config.seed, sample.id)) {
        rec.shot_ids.push_back(train[i].id);
        shots.push_back({train[i].code, train[i].truth});
      }
    }

    PromptSpec spec{strategy, shots.size(), std::move(shots), sample.code};
    const std::string prompt = render(spec, config.prompt_template);
    rec.prompt_hash = sha256_hex(prompt);
    inputs.provider->bind_truth(prompt, sample.truth);
    CompletionRequest req{model_id, prompt, config.provider.temperature,
                          config.provider.max_output_tokens};
    try {
      auto result = complete(req, *inputs.provider, inputs.cache);
      (result.cached ? cache_hits : provider_calls)++;
      rec.raw_text = std::move(result.text);
      rec.cached = result.cached;
      rec.parsed = parse_labels(rec.raw_text);
      rec.pred = rec.parsed->labels;
    } catch (const ProviderError& e) {
      ++provider_calls;
      rec.error = e.what();
    }
    return rec;
  };

  std::vector<std::size_t> model_jobs;
  for (std::size_t slot = 0; slot < slots.size(); ++slot) {
    if (cells[slot / test.size()].first == Strategy::kRetrievalLabeling) {
      slots[slot] = run_job(slot);
    } else {
      model_jobs.push_back(slot);
    }
  }

  auto worker = [&](std::atomic<std::size_t>& next) {
    for (std::size_t i = next++; i < model_jobs.size() && !abort; i = next++) {
      try {
        auto rec = run_job(model_jobs[i]);
        if (rec.error && config.strict) {
          std::lock_guard lock(error_mu);
          if (first_failure.empty()) first_failure = rec.test_id + ": " + *rec.error;
          abort = true;
          continue;
        }
        slots[model_jobs[i]] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      }
    }
  };

  std::size_t workers = config.max_in_flight;
  if (inputs.provider != nullptr) workers = std::min(workers, inputs.provider->max_in_flight());
  workers = std::max<std::size_t>(1, std::min(workers, model_jobs.size()));
  {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back([&] { worker(next); });
  }
  if (fatal) std::rethrow_exception(fatal);

  if (abort) {
    std::vector<PredictionRecord> done;
    for (auto& s : slots) {
      if (s) done.push_back(std::move(*s));
    }
    throw StrictAbort("provider failure under --strict (" + first_failure + ")", std::move(done));
  }

  RunResult result;
  result.records.reserve(slots.size());
  for (auto& s : slots) result.records.push_back(std::move(*s));
  result.report.cells = cells_from_records(result.records);
  result.report.config = config.to_json();
  result.report.template_id = config.prompt_template.id;
  result.report.shot_order = to_string(config.shot_order);
  result.report.provider_calls = provider_calls;
  result.report.cache_hits = cache_hits;
  result.report.wall_clock_ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                            wall_start)
          .count());
  return result;
}

RunResult run(const ExperimentConfig& config) {
  config.check();
  if (config.paths.corpus.empty()) throw UsageError("paths.corpus is not set");
  if (config.paths.report_dir.empty()) throw UsageError("paths.report_dir is not set");

  const Corpus corpus = ingest(config.paths.corpus);
  std::optional<Index> index;
  if (!config.paths.index.empty()) index.emplace(Index::load(config.paths.index));

  const bool needs_retrieval =
      std::any_of(config.strategies.begin(), config.strategies.end(), uses_retrieval);
  const bool needs_provider =
      std::any_of(config.strategies.begin(), config.strategies.end(), uses_provider);
  std::unique_ptr<EmbeddingBackend> embedder;
  if (needs_retrieval) embedder = make_embedder(config.embedding);
  std::unique_ptr<Provider> provider;
  if (needs_provider) provider = make_provider(config.provider);
  std::optional<ResponseCache> cache;
  if (!config.paths.cache.empty()) cache.emplace(config.paths.cache);

  RunInputs inputs{&corpus, index ? &*index : nullptr, embedder.get(), provider.get(),
                   cache ? &*cache : nullptr};
  std::filesystem::create_directories(config.paths.report_dir);
  const auto& dir = config.paths.report_dir;

  RunResult result;
  try {
    result = run_experiment(config, inputs);
  } catch (const StrictAbort& e) {
    write_file_atomic(dir / "checkpoint.jsonl", records_to_jsonl(e.completed()));
    throw;
  }

  write_file_atomic(dir / "records.jsonl", records_to_jsonl(result.records));
  write_file_atomic(dir / "report.json", to_json(result.report).dump(2) + "\n");
  write_file_atomic(dir / "report.csv", emit_table(result.report));
  write_file_atomic(dir / "run_meta.json", metadata_json(result.report).dump(2) + "\n");
  try {
    write_file_atomic(dir / "curves.json", emit_curves(result.report).dump(2) + "\n");
  } catch (const UsageError&) {
    // Fewer than two shot counts: nothing to plot.
  }
  std::error_code ec;
  std::filesystem::remove(dir / "checkpoint.jsonl", ec);
  return result;
}

// ---------------------------------------------------------------------------
// Emission

std::string format_percent(double fraction) {
  const long long hundredths = std::llround(fraction * 10000.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", hundredths / 100, hundredths % 100);
  return buf;
}

std::string emit_table(const RunReport& report) {
  std::string out =
      "Method,k,Subset Acc.,Hamm. Acc.,Partial Match,Precision,Recall,F1,"
      "Partial Match (truth),N,Failures\n";
  for (const auto& c : report.cells) {
    const auto& m = c.metrics;
    out += to_string(c.strategy) + "," + std::to_string(c.k) + ",";
    for (double v : {m.subset_accuracy, m.hamming_accuracy, m.partial_match_accuracy,
                     m.micro_precision, m.micro_recall, m.micro_f1, m.partial_match_truth}) {
      out += format_percent(v) + ",";
    }
    out += std::to_string(m.n_instances) + "," + std::to_string(c.failures) + "\n";
  }
  return out;
}

json emit_curves(const RunReport& report) {
  std::map<Strategy, std::size_t> points_per_strategy;
  for (const auto& c : report.cells) ++points_per_strategy[c.strategy];
  const bool any_curve = std::any_of(points_per_strategy.begin(), points_per_strategy.end(),
                                     [](const auto& kv) { return kv.second >= 2; });
  if (!any_curve) throw UsageError("curves need some strategy evaluated at two or more shot counts");

  struct Metric {
    const char* name;
    double MetricsReport::*field;
  };
  const Metric metrics[] = {{"subset_accuracy", &MetricsReport::subset_accuracy},
                            {"hamming_accuracy", &MetricsReport::hamming_accuracy},
                            {"partial_match_accuracy", &MetricsReport::partial_match_accuracy},
                            {"micro_precision", &MetricsReport::micro_precision},
                            {"micro_recall", &MetricsReport::micro_recall},
                            {"micro_f1", &MetricsReport::micro_f1}};
  json out = json::object();
  for (const auto& metric : metrics) {
    json series = json::object();
    for (const auto& c : report.cells) {
      auto& points = series[to_string(c.strategy)];
      if (points.is_null()) points = json::array();
      points.push_back(json::array({c.k, c.metrics.*(metric.field)}));
    }
    out[metric.name] = series;
  }
  return out;
}

}  // namespace vulnshot
