#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "corpus.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

using namespace semspace;
using testing::doc;
using testing::error_code;

TEST_CASE("parse a three line corpus") {
  std::istringstream in(
      R"({"id":"a","caption":"Red car","tags":["car"],"split":"train"})"
      "\n"
      R"({"id":"b","caption":"Snow","tags":["snow","winter"],"features":[1,2],"labels":["snow"],"split":"val"})"
      "\n\n"
      R"({"id":"c","caption":"","tags":[],"features":[3,4],"split":"test"})"
      "\n");
  const Corpus c = parse_corpus(in, "mem");
  REQUIRE(c.size() == 3);
  CHECK(c[1].tags == std::vector<std::string>{"snow", "winter"});
  CHECK(c[1].labels == std::vector<std::string>{"snow"});
  CHECK_FALSE(c[0].features.has_value());
  CHECK(c.feature_dim() == 2);
  CHECK(c[2].split == Split::kTest);
  CHECK(c.find("b") == &c[1]);
  CHECK(c.find("zz") == nullptr);
  CHECK(c.split(Split::kVal).size() == 1);
}

TEST_CASE("duplicate id is a validation error naming the id") {
  std::istringstream in(R"({"id":"a","caption":"x","tags":[],"split":"train"})"
                        "\n"
                        R"({"id":"a","caption":"y","tags":[],"split":"train"})"
                        "\n");
  const auto msg = testing::error_message([&] { parse_corpus(in, "mem"); });
  CHECK(msg.find("'a'") != std::string::npos);
  std::istringstream again(R"({"id":"a","caption":"x","tags":[],"split":"train"})"
                           "\n"
                           R"({"id":"a","caption":"y","tags":[],"split":"train"})");
  CHECK(error_code([&] { parse_corpus(again, "mem"); }) == ErrorCode::kValidation);
}

TEST_CASE("malformed lines report the line number") {
  std::istringstream in(R"({"id":"a","caption":"x","tags":[],"split":"train"})"
                        "\n{not json\n");
  const auto msg = testing::error_message([&] { parse_corpus(in, "file.jsonl"); });
  CHECK(msg.find("file.jsonl:2") != std::string::npos);
  std::istringstream bad_split(R"({"id":"a","caption":"x","tags":[],"split":"dev"})");
  CHECK(error_code([&] { parse_corpus(bad_split, "m"); }) == ErrorCode::kParse);
  std::istringstream missing(R"({"caption":"x","tags":[],"split":"train"})");
  CHECK(error_code([&] { parse_corpus(missing, "m"); }) == ErrorCode::kParse);
}

TEST_CASE("ragged feature lengths are rejected") {
  auto a = doc("a", "x");
  a.features = std::vector<double>{1, 2};
  auto b = doc("b", "y");
  b.features = std::vector<double>{1, 2, 3};
  CHECK(error_code([&] { Corpus({a, b}); }) == ErrorCode::kValidation);
}

TEST_CASE("missing corpus file is an io error") {
  CHECK(error_code([] { load_corpus("/nonexistent/corpus.jsonl"); }) ==
        ErrorCode::kIo);
}

TEST_CASE("synthetic corpus round-trips through the file format") {
  SyntheticParams p;
  p.n_docs = 1000;
  const Corpus c = generate_synthetic_corpus(p);
  testing::TempDir dir;
  save_corpus(c, dir.file("c.jsonl"));
  CHECK(load_corpus(dir.file("c.jsonl")) == c);
}

TEST_CASE("tokenize") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("Sunrise at the #beach!") ==
        std::vector<std::string>{"sunrise", "at", "the", "beach"});
  CHECK(tokenize("ice-cream") == std::vector<std::string>{"ice", "cream"});
  CHECK(tokenize("Caf\xc3\xa9 NOW") == std::vector<std::string>{"caf\xc3\xa9", "now"});
}

TEST_CASE("tokenize is idempotent on its joined output") {
  std::mt19937 rng(7);
  const std::string alphabet = "abcXYZ019 -_#!.,\t\n\xc3\xa9";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 40);
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    for (int j = len(rng); j > 0; --j) s += alphabet[pick(rng)];
    const auto once = tokenize(s);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    CHECK(tokenize(joined) == once);
  }
}

TEST_CASE("document stream is caption then tags") {
  auto d = doc("a", "Blue Sky", {"city", "night"});
  CHECK(document_tokens(d) ==
        std::vector<std::string>{"blue", "sky", "city", "night"});
}

TEST_CASE("vocabulary frequency threshold") {
  std::vector<std::vector<std::string>> streams = {{"a", "a", "b"}};
  auto v = Vocabulary::build(streams, 2);
  CHECK(v.tokens() == std::vector<std::string>{"a"});
  auto all = Vocabulary::build(streams, 1);
  CHECK(all.tokens() == std::vector<std::string>{"a", "b"});
  CHECK(all.frequency(0) == 2);
  CHECK(all.document_frequency(0) == 1);
  CHECK(all.id("b") == 1);
  CHECK(all.id("zzz") == Vocabulary::kMissing);
  std::vector<std::string> text = {"b", "q", "a"};
  CHECK(all.encode(text) == std::vector<std::int32_t>{1, 0});
}

TEST_CASE("vocabulary ties break lexicographically") {
  std::vector<std::vector<std::string>> streams = {{"d", "c", "b", "b", "a"}};
  auto v = Vocabulary::build(streams, 1);
  CHECK(v.tokens() == std::vector<std::string>{"b", "a", "c", "d"});
}

TEST_CASE("vocabulary matches a brute-force count filter") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> word(0, 30);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<std::string>> streams(10);
    std::map<std::string, std::int64_t> counts;
    for (auto& s : streams) {
      for (int i = 0; i < 20; ++i) {
        s.push_back("w" + std::to_string(word(rng)));
        ++counts[s.back()];
      }
    }
    const std::int64_t min_count = 1 + trial % 8;
    std::set<std::string> expected;
    for (const auto& [w, c] : counts) {
      if (c >= min_count) expected.insert(w);
    }
    if (expected.empty()) continue;
    auto v = Vocabulary::build(streams, min_count);
    std::set<std::string> got(v.tokens().begin(), v.tokens().end());
    CHECK(got == expected);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(v.size()); ++i) {
      CHECK(v.id(v.token(i)) == i);
      CHECK(v.frequency(i) == counts[v.token(i)]);
      CHECK(v.document_frequency(i) <= v.document_count());
    }
  }
}

TEST_CASE("empty surviving vocabulary is an error") {
  std::vector<std::vector<std::string>> streams = {{"a"}};
  CHECK(error_code([&] { Vocabulary::build(streams, 2); }).has_value());
}

TEST_CASE("idf values") {
  CHECK(TfIdfStats::idf_value(1, 1) == doctest::Approx(std::log(0.5) + 1).epsilon(1e-15));
  CHECK(TfIdfStats::idf_value(1, 1) == doctest::Approx(0.3069).epsilon(1e-4));
  Corpus c({doc("x", "a b"), doc("y", "a")});
  auto v = build_vocabulary(c, 1);
  auto stats = compute_tfidf_stats(c, v);
  REQUIRE(stats.idf.size() == 2);
  CHECK(stats.idf[v.id("a")] == doctest::Approx(std::log(2.0 / 3.0) + 1));
  CHECK(stats.idf[v.id("b")] == doctest::Approx(1.0));
  CHECK(stats.term_frequency[0].at(v.id("a")) == 1);
  for (double x : stats.idf) CHECK(x >= 0.0);
}

TEST_CASE("statistics use the train split only") {
  Corpus c({doc("x", "a b"), doc("y", "zzz", {}, Split::kTest)});
  auto v = build_vocabulary(c, 1);
  CHECK(v.id("zzz") == Vocabulary::kMissing);
  CHECK(v.document_count() == 1);
}

TEST_CASE("tag filter boundary at threshold 20") {
  std::vector<Document> docs;
  for (int i = 0; i < 19; ++i) docs.push_back(doc("x" + std::to_string(i), "", {"x", "y"}));
  docs.push_back(doc("y19", "", {"y"}));
  const Corpus out = filter_low_frequency_tags(Corpus(docs), 20);
  REQUIRE(out.size() == 20);
  for (const auto& d : out.documents()) {
    CHECK(d.tags == std::vector<std::string>{"y"});
  }
  docs.pop_back();
  CHECK(filter_low_frequency_tags(Corpus(docs), 20).empty());
}

TEST_CASE("threshold 1 keeps everything except untagged or unlabelled documents") {
  auto untagged = doc("u", "cap");
  auto unlabelled = doc("l", "cap", {"t"});
  unlabelled.labels = std::vector<std::string>{};
  auto labelled = doc("k", "cap", {"t"});
  labelled.labels = std::vector<std::string>{"t"};
  auto plain = doc("p", "cap", {"s"});
  const Corpus out =
      filter_low_frequency_tags(Corpus({untagged, unlabelled, labelled, plain}), 1);
  REQUIRE(out.size() == 2);
  CHECK(out[0].id == "k");
  CHECK(out[1].id == "p");
}

TEST_CASE("tag filter matches a brute-force oracle") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> tag(0, 15);
  std::uniform_int_distribution<int> ntags(0, 4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Document> docs;
    for (int i = 0; i < 60; ++i) {
      std::vector<std::string> tags;
      for (int j = ntags(rng); j > 0; --j) tags.push_back("t" + std::to_string(tag(rng)));
      docs.push_back(doc("d" + std::to_string(i), "", tags));
      if (i % 17 == 0) docs.back().labels = std::vector<std::string>{};
    }
    const Corpus input(docs);
    const std::int64_t threshold = 3 + trial % 10;
    const Corpus out = filter_low_frequency_tags(input, threshold);

    // Oracle: fixed point of "drop rare tags, drop empty documents".
    std::vector<Document> cur = input.documents();
    while (true) {
      std::map<std::string, int> counts;
      for (const auto& d : cur) {
        for (const auto& t : d.tags) ++counts[t];
      }
      std::vector<Document> next;
      for (auto d : cur) {
        std::vector<std::string> keep;
        for (const auto& t : d.tags) {
          if (counts[t] >= threshold) keep.push_back(t);
        }
        d.tags = keep;
        if (!d.tags.empty() && !(d.labels && d.labels->empty())) next.push_back(d);
      }
      if (next == cur) break;
      cur = next;
    }
    CHECK(out.documents() == cur);
    std::map<std::string, int> counts;
    for (const auto& d : out.documents()) {
      CHECK_FALSE(d.tags.empty());
      for (const auto& t : d.tags) ++counts[t];
    }
    for (const auto& [t, c] : counts) CHECK(c >= threshold);
  }
}

TEST_CASE("noiseless synthetic features are basis vectors") {
  SyntheticParams p;
  p.n_docs = 200;
  p.noise_sigma = 0.0;
  p.max_concepts_per_doc = 1;
  const Corpus c = generate_synthetic_corpus(p);
  for (const auto& d : c.documents()) {
    REQUIRE(d.features);
    REQUIRE(d.labels);
    REQUIRE(d.labels->size() == 1);
    int ones = 0;
    for (double x : *d.features) {
      CHECK((x == 0.0 || x == 1.0));
      ones += x == 1.0;
    }
    CHECK(ones == 1);
    CHECK(d.tags == *d.labels);
  }
}

TEST_CASE("synthetic generator is deterministic") {
  SyntheticParams p;
  p.n_docs = 300;
  std::ostringstream a, b;
  write_corpus(generate_synthetic_corpus(p), a);
  write_corpus(generate_synthetic_corpus(p), b);
  CHECK(a.str() == b.str());
  p.seed = 2;
  std::ostringstream c;
  write_corpus(generate_synthetic_corpus(p), c);
  CHECK(a.str() != c.str());
}

TEST_CASE("synthetic concepts are roughly uniform") {
  SyntheticParams p;
  const Corpus c = generate_synthetic_corpus(p);
  std::map<std::string, int> per_concept;
  for (const auto& d : c.documents()) {
    for (const auto& l : *d.labels) ++per_concept[l];
  }
  REQUIRE(per_concept.size() == 10);
  int total = 0;
  for (const auto& [name, n] : per_concept) total += n;
  const double uniform = total / 10.0;
  for (const auto& [name, n] : per_concept) {
    CHECK(std::abs(n - uniform) <= 0.2 * uniform);
  }
  CHECK(c.split(Split::kTest).size() > 350);
  CHECK(c.split(Split::kTrain).size() > 3800);
}

TEST_CASE("synthetic generator rejects too few feature dimensions") {
  SyntheticParams p;
  p.feature_dim = 5;
  CHECK(error_code([&] { generate_synthetic_corpus(p); }) == ErrorCode::kConfig);
  CHECK(synthetic_concept_name(0) == "car");
  CHECK(synthetic_concept_name(30) == "concept30");
  CHECK(synthetic_concept_word(2, 7) == "bike7");
}
