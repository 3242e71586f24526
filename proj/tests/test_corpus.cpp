#include <doctest.h>

#include <string>

#include "support.hpp"
#include "vulnshot/corpus.hpp"
#include "vulnshot/errors.hpp"
#include "vulnshot/io.hpp"
#include "vulnshot/synthetic.hpp"

using namespace vulnshot;

namespace {

const char* kSmallCorpus =
    R"({"id":"a","code":"int f(){ return *p; }","labels":["CWE-119","CWE-476"],"split":"train"})"
    "\n"
    R"({"id":"b","code":"void g(){ strcpy(d, s); }","labels":["CWE-other"],"split":"train"})"
    "\n"
    R"({"id":"c","code":"void h(){}","labels":[],"split":"test"})"
    "\n"
    "\n"
    R"({"id":"d","code":"int q(){ return e - b; }","labels":["CWE-469","CWE-other"],"split":"test"})"
    "\n"
    R"({"id":"e","code":"void z(){ gets(l); }","labels":["CWE-120"],"split":"train"})"
    "\n";

std::string error_of(std::string_view text) {
  try {
    ingest_text(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("cwe names and numbers round trip") {
  for (CweLabel l : kAllLabels) {
    CHECK(cwe_from_number(cwe_number(l)) == l);
    CHECK(cwe_from_name(cwe_name(l)) == l);
  }
  CHECK(cwe_from_name("cwe-476") == CweLabel::kCwe476);
  CHECK_FALSE(cwe_from_name("CWE-787").has_value());
  CHECK_FALSE(cwe_from_name("CWE-other").has_value());
  CHECK_FALSE(cwe_from_number(121).has_value());
}

TEST_CASE("label set is deduplicated and prints in ascending order") {
  LabelSet s{CweLabel::kCwe476, CweLabel::kCwe119, CweLabel::kCwe476};
  CHECK(s.size() == 2);
  CHECK(s.to_string() == "CWE-119, CWE-476");
  CHECK(LabelSet{}.to_string().empty());
  CHECK((s - LabelSet{CweLabel::kCwe119}) == LabelSet{CweLabel::kCwe476});
  CHECK(LabelSet{CweLabel::kCwe119}.is_subset_of(s));
  CHECK_FALSE(s.is_subset_of(LabelSet{CweLabel::kCwe119}));
}

TEST_CASE("ingest keeps in-scope rows and counts drops") {
  const Corpus c = ingest_text(kSmallCorpus);
  REQUIRE(c.train().size() == 2);
  REQUIRE(c.test().size() == 1);
  CHECK(c.train()[0].id == "a");
  CHECK(c.train()[0].truth == LabelSet{CweLabel::kCwe119, CweLabel::kCwe476});
  CHECK(c.train()[1].id == "e");
  CHECK(c.test()[0].id == "d");
  CHECK(c.test()[0].truth == LabelSet{CweLabel::kCwe469});

  const auto& st = c.stats();
  CHECK(st.records == 5);
  CHECK(st.retained == 3);
  CHECK(st.dropped_out_of_scope == 1);
  CHECK(st.dropped_non_vulnerable == 1);
  CHECK(st.retained + st.dropped() == st.records);
  CHECK(st.filtered_labels.at("CWE-other") == 2);

  CHECK(c.find("a") != nullptr);
  CHECK(c.find("b") == nullptr);
}

TEST_CASE("ingest errors name the offending line") {
  CHECK(error_of("{\"id\":\"a\"\n").find("line 1") != std::string::npos);
  const std::string dup =
      R"({"id":"a","code":"x","labels":["CWE-119"],"split":"train"})"
      "\n"
      R"({"id":"a","code":"y","labels":["CWE-119"],"split":"test"})";
  const auto dup_err = error_of(dup);
  CHECK(dup_err.find("line 2") != std::string::npos);
  CHECK(dup_err.find("duplicate") != std::string::npos);
  const auto split_err =
      error_of(R"({"id":"a","code":"x","labels":["CWE-119"],"split":"dev"})");
  CHECK(split_err.find("unknown split") != std::string::npos);
  const auto code_err = error_of(
      "\n" R"({"id":"a","code":"  \n ","labels":["CWE-119"],"split":"train"})");
  CHECK(code_err.find("line 2") != std::string::npos);
  CHECK(code_err.find("empty code") != std::string::npos);
  CHECK_THROWS_AS(ingest("/nonexistent/corpus.jsonl"), DataError);
}

TEST_CASE("ingest is idempotent") {
  test_support::TempDir dir("corpus");
  write_file_atomic(dir / "c.jsonl", kSmallCorpus);
  CHECK(ingest(dir / "c.jsonl") == ingest(dir / "c.jsonl"));
}

TEST_CASE("retained truths are non-empty subsets of the four labels") {
  const Corpus c = make_synthetic_corpus(3, 10);
  for (const auto* split : {&c.train(), &c.test()}) {
    for (const auto& s : *split) {
      CHECK_FALSE(s.truth.empty());
      CHECK(s.truth.bits() <= 0x0F);
    }
  }
}

TEST_CASE("validate reports sizes, histogram and leakage") {
  const std::string text =
      R"({"id":"t1","code":"int a;","labels":["CWE-119","CWE-120"],"split":"train"})"
      "\n"
      R"({"id":"t2","code":"int b;","labels":["CWE-476"],"split":"train"})"
      "\n"
      R"({"id":"s1","code":"int a;","labels":["CWE-119"],"split":"test"})"
      "\n";
  const auto report = validate(ingest_text(text));
  CHECK(report.train_size == 2);
  CHECK(report.test_size == 1);
  CHECK(report.label_counts.at(CweLabel::kCwe119).train == 1);
  CHECK(report.label_counts.at(CweLabel::kCwe119).test == 1);
  CHECK(report.label_counts.at(CweLabel::kCwe469).train == 0);
  CHECK(report.label_total() == 4);
  REQUIRE(report.leakage.size() == 1);
  CHECK(report.leakage[0].train_ids == std::vector<std::string>{"t1"});
  CHECK(report.leakage[0].test_ids == std::vector<std::string>{"s1"});
  const auto j = to_json(report);
  CHECK(j["label_total"] == 4);
  CHECK(j["leakage_warnings"].size() == 1);
}

TEST_CASE("histogram sums to total truth cardinality") {
  const Corpus c = make_synthetic_corpus(11, 15);
  std::size_t total = 0;
  for (const auto& s : c.train()) total += s.truth.size();
  for (const auto& s : c.test()) total += s.truth.size();
  CHECK(validate(c).label_total() == total);
}

TEST_CASE("corpus jsonl round trip") {
  const Corpus c = make_synthetic_corpus(7, 5);
  const Corpus back = ingest_text(to_jsonl(c));
  CHECK(back.train() == c.train());
  CHECK(back.test() == c.test());
}

TEST_CASE("synthetic corpus shape and determinism") {
  const Corpus a = make_synthetic_corpus(7, 5);
  CHECK(a == make_synthetic_corpus(7, 5));
  CHECK_FALSE(a == make_synthetic_corpus(8, 5));
  // 4 groups of 5 plus 4 pair groups of max(1, 5/5) = 1.
  CHECK(a.train().size() + a.test().size() == 24);
  CHECK(a.test().size() == 4);

  const Corpus b = make_synthetic_corpus(7, 25);
  CHECK(b.train().size() == 96);
  CHECK(b.test().size() == 24);
  std::size_t multi = 0;
  for (const auto& s : b.train()) multi += s.truth.size() > 1 ? 1 : 0;
  for (const auto& s : b.test()) multi += s.truth.size() > 1 ? 1 : 0;
  CHECK(multi == 20);
  CHECK_THROWS_AS(make_synthetic_corpus(7, 0), UsageError);
}

TEST_CASE("corpus constructor rejects bad samples") {
  CHECK_THROWS_AS(Corpus({{"a", "x", {CweLabel::kCwe119}}}, {{"a", "y", {CweLabel::kCwe119}}}),
                  DataError);
  CHECK_THROWS_AS(Corpus({{"a", "x", {}}}, {}), DataError);
  CHECK_THROWS_AS(Corpus({{"a", " ", {CweLabel::kCwe119}}}, {}), DataError);
}
