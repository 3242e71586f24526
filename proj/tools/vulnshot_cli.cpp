// Command-line front end: ingest, index, run, report, synth, cache.
//
// Exit codes: 0 success, 1 usage error, 2 provider failure (including a
// --strict abort), 3 data validation failure.

#include <cstdint>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vulnshot/corpus.hpp"
#include "vulnshot/errors.hpp"
#include "vulnshot/io.hpp"
#include "vulnshot/runner.hpp"
#include "vulnshot/synthetic.hpp"
#include "vulnshot/vecindex.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitProvider = 2;
constexpr int kExitData = 3;

using namespace vulnshot;

void write_or_print(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out_path, text);
  }
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot and retrieval-augmented CWE vulnerability labeling experiments"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a JSONL corpus and write a report");
  std::string ingest_input, ingest_report;
  ingest_cmd->add_option("--input", ingest_input, "JSONL corpus")->required();
  ingest_cmd->add_option("--report", ingest_report, "Validation report (JSON)")->required();

  // index build / query
  auto* index_cmd = app.add_subcommand("index", "Build or query the retrieval index");
  index_cmd->require_subcommand(1);
  auto* index_build = index_cmd->add_subcommand("build", "Embed the train split into an index");
  std::string build_corpus, build_out, build_config;
  index_build->add_option("--corpus", build_corpus, "JSONL corpus")->required();
  index_build->add_option("--out", build_out, "Index file (JSONL)")->required();
  index_build->add_option("--config", build_config, "Run config (embedding settings)");
  auto* index_query = index_cmd->add_subcommand("query", "Nearest training samples for a snippet");
  std::string query_index, query_config, query_code_file;
  std::size_t query_k = 5;
  index_query->add_option("--index", query_index, "Index file")->required();
  index_query->add_option("--k", query_k, "Number of neighbors")->required()->check(CLI::PositiveNumber);
  index_query->add_option("--code-file", query_code_file, "Query code (default: stdin)");
  index_query->add_option("--config", query_config, "Run config (embedding settings)");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run an experiment sweep");
  std::string run_config;
  bool run_strict = false;
  run_cmd->add_option("--config", run_config, "Run config (JSON)")->required();
  run_cmd->add_flag("--strict", run_strict, "Abort on the first provider failure");

  // report table / curves
  auto* report_cmd = app.add_subcommand("report", "Render a finished run");
  report_cmd->require_subcommand(1);
  std::string report_path, report_out;
  auto* report_table = report_cmd->add_subcommand("table", "Metrics table as CSV");
  auto* report_curves = report_cmd->add_subcommand("curves", "Per-metric series over k (JSON)");
  for (auto* sub : {report_table, report_curves}) {
    sub->add_option("--report", report_path, "report.json from a run")->required();
    sub->add_option("--out", report_out, "Output file (default: stdout)");
  }

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic corpus as JSONL");
  std::uint64_t synth_seed = 7;
  std::size_t synth_n = 25;
  std::string synth_out;
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--n-per-label", synth_n, "Single-label samples per CWE")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth_out, "Output JSONL (default: stdout)");

  // cache stats / clear
  auto* cache_cmd = app.add_subcommand("cache", "Inspect or clear the response cache");
  cache_cmd->require_subcommand(1);
  std::string cache_dir, cache_config;
  auto* cache_stats = cache_cmd->add_subcommand("stats", "Entry count and size");
  auto* cache_clear = cache_cmd->add_subcommand("clear", "Delete every entry");
  for (auto* sub : {cache_stats, cache_clear}) {
    auto* dir_opt = sub->add_option("--dir", cache_dir, "Cache directory");
    sub->add_option("--config", cache_config, "Run config naming paths.cache")->excludes(dir_opt);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest_cmd) {
      const Corpus corpus = ingest(ingest_input);
      const auto report = validate(corpus);
      write_file_atomic(ingest_report, to_json(report).dump(2) + "\n");
      for (const auto& w : report.leakage) {
        std::cerr << "warning: identical code in train and test:";
        for (const auto& id : w.train_ids) std::cerr << " " << id;
        std::cerr << " |";
        for (const auto& id : w.test_ids) std::cerr << " " << id;
        std::cerr << "\n";
      }
      std::cout << "retained " << corpus.stats().retained << " of " << corpus.stats().records
                << " records (train " << report.train_size << ", test " << report.test_size
                << ")\n";
    } else if (*index_build) {
      const auto config = config_or_default(build_config);
      const Corpus corpus = ingest(build_corpus);
      auto embedder = make_embedder(config.embedding);
      const Index index = build_index(corpus, *embedder, config.include_labels_in_index);
      index.save(build_out);
      std::cout << "indexed " << index.size() << " training samples (dimension "
                << index.dimension() << ")\n";
    } else if (*index_query) {
      auto config = config_or_default(query_config);
      const Index index = Index::load(query_index);
      if (query_config.empty()) config.embedding.dimension = index.dimension();
      std::string code;
      if (query_code_file.empty()) {
        code.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
      } else {
        code = read_file(query_code_file);
      }
      auto embedder = make_embedder(config.embedding);
      const auto query = embedder->embed({code, std::nullopt});
      nlohmann::json out = nlohmann::json::array();
      for (const auto& n : index.top_k(query, query_k)) {
        out.push_back({{"id", n.sample_id}, {"similarity", n.similarity}});
      }
      std::cout << out.dump(2) << "\n";
    } else if (*run_cmd) {
      auto config = ExperimentConfig::load(run_config);
      config.strict = config.strict || run_strict;
      const auto result = run(config);
      std::cout << emit_table(result.report);
      std::cerr << "provider calls: " << result.report.provider_calls
                << ", cache hits: " << result.report.cache_hits << ", wall clock: "
                << result.report.wall_clock_ms << " ms\n";
    } else if (*report_table || *report_curves) {
      const auto report = report_from_json(nlohmann::json::parse(read_file(report_path)));
      if (*report_table) {
        write_or_print(report_out, emit_table(report));
      } else {
        write_or_print(report_out, emit_curves(report).dump(2) + "\n");
      }
    } else if (*synth_cmd) {
      write_or_print(synth_out, to_jsonl(make_synthetic_corpus(synth_seed, synth_n)));
    } else if (*cache_stats || *cache_clear) {
      std::string dir = cache_dir;
      if (dir.empty() && !cache_config.empty()) {
        dir = ExperimentConfig::load(cache_config).paths.cache.string();
      }
      if (dir.empty()) throw UsageError("give --dir or a --config with paths.cache");
      ResponseCache cache(dir);
      if (*cache_stats) {
        const auto s = cache.stats();
        std::cout << nlohmann::json{{"dir", dir}, {"entries", s.entries}, {"bytes", s.bytes}}.dump(2)
                  << "\n";
      } else {
        std::cout << "removed " << cache.clear() << " entries\n";
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const StrictAbort& e) {
    std::cerr << "aborted: " << e.what() << "\n"
              << "completed records were checkpointed; rerun with a warm cache to resume\n";
    return kExitProvider;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return 0;
}
