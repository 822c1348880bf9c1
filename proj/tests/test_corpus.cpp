#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "wecmatch/corpus.hpp"

using namespace wecmatch;

namespace {

Document make_doc(std::string id, std::string cat, std::string q,
                  std::vector<std::pair<std::string, bool>> answers) {
  Document d;
  d.id = std::move(id);
  d.category = std::move(cat);
  d.question_text = std::move(q);
  for (auto& [text, best] : answers) d.answers.push_back({text, best});
  return d;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("wecmatch_corpus_test_" + std::to_string(++counter));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

template <typename F>
std::string thrown_message(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// 600 well-formed single-category docs with distinct answers.
std::vector<Document> fixture_docs(int n, const std::string& cat = "travel") {
  std::vector<Document> docs;
  for (int i = 0; i < n; ++i) {
    docs.push_back(make_doc("d" + std::to_string(i), cat,
                            "how do i reach place" + std::to_string(i),
                            {{"go to place" + std::to_string(i) + " by bus then walk", true}}));
  }
  return docs;
}

std::vector<std::string> ids_of(const std::vector<Document>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.id);
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases, strips punctuation, splits on whitespace") {
  CHECK(tokenize("What is the fastest car in the world?") ==
        std::vector<std::string>{"what", "is", "the", "fastest", "car", "in", "the", "world"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("U.S.A.  trip!") == std::vector<std::string>{"usa", "trip"});
  CHECK(tokenize(" \t spaced\nout \n") == std::vector<std::string>{"spaced", "out"});
  CHECK(tokenize("?!;,.") == std::vector<std::string>{});
  CHECK(tokenize("route 66") == std::vector<std::string>{"route", "66"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"dont", "stop"});
}

TEST_CASE("build_vocabulary counts term and document frequencies") {
  std::vector<Document> docs = {make_doc("d1", "c", "a b", {{"a c", true}})};

  Vocabulary v = build_vocabulary(docs, 1);
  CHECK(v.words == std::vector<std::string>{"a", "b", "c"});
  CHECK(v.term_freq == std::vector<int64_t>{2, 1, 1});
  CHECK(v.doc_freq == std::vector<int64_t>{1, 1, 1});
  CHECK(v.total_tokens == 4);
  for (size_t i = 0; i < v.words.size(); ++i) {
    CHECK(v.index.at(v.words[i]) == static_cast<int32_t>(i));
  }

  Vocabulary v2 = build_vocabulary(docs, 2);
  CHECK(v2.words == std::vector<std::string>{"a"});
  CHECK(v2.total_tokens == 2);

  CHECK(contains(thrown_message([&] { build_vocabulary({}, 1); }), "empty corpus"));
}

TEST_CASE("build_vocabulary document frequency spans documents") {
  std::vector<Document> docs = {make_doc("d1", "c", "a b", {{"a c", true}}),
                                make_doc("d2", "c", "a", {{"d d e", true}})};
  Vocabulary v = build_vocabulary(docs, 1);
  CHECK(v.term_freq[v.index.at("a")] == 3);
  CHECK(v.doc_freq[v.index.at("a")] == 2);
  CHECK(v.term_freq[v.index.at("d")] == 2);
  CHECK(v.doc_freq[v.index.at("d")] == 1);
  int64_t sum = 0;
  for (int64_t tf : v.term_freq) sum += tf;
  CHECK(v.total_tokens == sum);
}

TEST_CASE("to_ids maps tokens and skips out-of-vocabulary words") {
  std::vector<Document> docs = {make_doc("d1", "c", "a b", {{"a c", true}})};
  Vocabulary v = build_vocabulary(docs, 1);
  CHECK(to_ids({"a", "zzz", "c"}, v) == TokenSeq{0, 2});
  CHECK(to_ids({}, v) == TokenSeq{});
}

TEST_CASE("filter_and_split applies 4:1:1 ratios") {
  SplitSpec spec;
  spec.rng_seed = 7;
  Splits s = filter_and_split(fixture_docs(600), spec);
  CHECK(s.train.size() == 400);
  CHECK(s.valid.size() == 100);
  CHECK(s.test.size() == 100);
}

TEST_CASE("filter_and_split removes out-of-range documents") {
  SplitSpec spec;
  std::vector<Document> docs = fixture_docs(10);

  docs.push_back(make_doc("short_ans", "travel", "where to go",
                          {{"one two three four", true}}));

  std::string long_q = "w";
  for (int i = 0; i < 50; ++i) long_q += " w";
  docs.push_back(make_doc("long_q", "travel", long_q,
                          {{"a fine answer with five words", true}}));

  std::string long_a = "w";
  for (int i = 0; i < 100; ++i) long_a += " w";
  docs.push_back(make_doc("long_ans", "travel", "where to go", {{long_a, true}}));

  Splits s = filter_and_split(docs, spec);
  std::vector<std::string> all;
  for (const auto* part : {&s.train, &s.valid, &s.test}) {
    for (const auto& d : *part) all.push_back(d.id);
  }
  CHECK(all.size() == 10);
  CHECK(std::find(all.begin(), all.end(), "short_ans") == all.end());
  CHECK(std::find(all.begin(), all.end(), "long_q") == all.end());
  CHECK(std::find(all.begin(), all.end(), "long_ans") == all.end());
}

TEST_CASE("filter_and_split partitions the survivors deterministically") {
  SplitSpec spec;
  spec.rng_seed = 42;
  std::vector<Document> docs = fixture_docs(60);

  Splits a = filter_and_split(docs, spec);
  Splits b = filter_and_split(docs, spec);
  CHECK(ids_of(a.train) == ids_of(b.train));
  CHECK(ids_of(a.valid) == ids_of(b.valid));
  CHECK(ids_of(a.test) == ids_of(b.test));

  std::multiset<std::string> all;
  for (const auto* part : {&a.train, &a.valid, &a.test}) {
    for (const auto& d : *part) all.insert(d.id);
  }
  std::multiset<std::string> expected;
  for (const auto& d : docs) expected.insert(d.id);
  CHECK(all == expected);

  spec.rng_seed = 43;
  Splits c = filter_and_split(docs, spec);
  CHECK(ids_of(a.train) != ids_of(c.train));
}

TEST_CASE("generate_triples draws distinct same-category negatives") {
  std::vector<Document> docs = {
      make_doc("d1", "c", "what is it", {{"answer one alpha beta gamma", true}}),
      make_doc("d2", "c", "where is it", {{"answer two alpha beta gamma", true}}),
      make_doc("d3", "c", "when is it", {{"answer three alpha beta gamma", true}})};
  Vocabulary v = build_vocabulary(docs, 1);

  auto triples = generate_triples(docs, v, 2, 5);
  CHECK(triples.size() == 6);
  for (const auto& d : docs) {
    std::set<std::string> negs;
    for (const auto& t : triples) {
      if (t.question_id != d.id) continue;
      CHECK(t.pos_id == d.id);
      CHECK(t.pos_answer == to_ids(tokenize(d.best_answer_text()), v));
      CHECK(t.question == to_ids(tokenize(d.question_text), v));
      negs.insert(t.neg_id);
    }
    std::set<std::string> expected;
    for (const auto& other : docs) {
      if (other.id != d.id) expected.insert(other.id);
    }
    CHECK(negs == expected);
  }
}

TEST_CASE("generate_triples rejects single-question categories") {
  std::vector<Document> docs = fixture_docs(4);
  docs.push_back(make_doc("lone", "solo", "why is it", {{"only answer here for this", true}}));
  Vocabulary v = build_vocabulary(docs, 1);
  CHECK(contains(thrown_message([&] { generate_triples(docs, v, 2, 1); }), "solo"));
}

TEST_CASE("generate_triples never picks a negative equal to the question's answers") {
  std::vector<Document> docs = {
      make_doc("a", "c", "first question here", {{"x y z w v", true}}),
      make_doc("b", "c", "second question here", {{"x y z w v", true}}),
      make_doc("c", "c", "third question here", {{"p q r s t", true}})};
  Vocabulary v = build_vocabulary(docs, 1);

  auto triples = generate_triples(docs, v, 2, 11);
  CHECK(triples.size() == 6);
  for (const auto& t : triples) {
    const Document* qd = nullptr;
    for (const auto& d : docs) {
      if (d.id == t.question_id) qd = &d;
    }
    REQUIRE(qd != nullptr);
    for (const auto& a : qd->answers) {
      CHECK(t.neg_answer != to_ids(tokenize(a.text), v));
    }
  }
  // doc a's only usable negative is c, so the fallback repeats it
  std::vector<std::string> a_negs;
  for (const auto& t : triples) {
    if (t.question_id == "a") a_negs.push_back(t.neg_id);
  }
  CHECK(a_negs == std::vector<std::string>{"c", "c"});
}

TEST_CASE("generate_triples is deterministic per seed") {
  std::vector<Document> docs = fixture_docs(40);
  Vocabulary v = build_vocabulary(docs, 1);

  auto collect = [&](uint64_t seed) {
    std::vector<std::string> out;
    for (const auto& t : generate_triples(docs, v, 10, seed)) {
      out.push_back(t.question_id + "/" + t.neg_id);
    }
    return out;
  };
  CHECK(generate_triples(docs, v, 10, 3).size() == 400);
  CHECK(collect(3) == collect(3));
  CHECK(collect(3) != collect(4));
}

TEST_CASE("build_candidate_sets produces one positive and shuffled negatives") {
  std::vector<Document> docs = fixture_docs(30);
  Vocabulary v = build_vocabulary(docs, 1);

  auto sets = build_candidate_sets(docs, v, 5, 9);
  REQUIRE(sets.size() == 30);
  std::set<size_t> positive_positions;
  for (const auto& s : sets) {
    CHECK(s.candidates.size() == 6);
    int rel_sum = 0;
    std::set<std::string> dids;
    for (size_t i = 0; i < s.candidates.size(); ++i) {
      const auto& c = s.candidates[i];
      rel_sum += c.rel;
      dids.insert(c.doc_id);
      if (c.rel == 1) {
        CHECK(c.doc_id == s.question_id);
        positive_positions.insert(i);
      }
    }
    CHECK(rel_sum == 1);
    CHECK(dids.size() == 6);
  }
  // the shuffle must not pin the positive to one slot
  CHECK(positive_positions.size() > 1);

  auto again = build_candidate_sets(docs, v, 5, 9);
  for (size_t i = 0; i < sets.size(); ++i) {
    for (size_t j = 0; j < sets[i].candidates.size(); ++j) {
      CHECK(sets[i].candidates[j].doc_id == again[i].candidates[j].doc_id);
    }
  }
}

TEST_CASE("build_candidate_sets with two documents") {
  std::vector<Document> docs = fixture_docs(2);
  Vocabulary v = build_vocabulary(docs, 1);
  auto sets = build_candidate_sets(docs, v, 1, 1);
  REQUIRE(sets.size() == 2);
  for (const auto& s : sets) {
    REQUIRE(s.candidates.size() == 2);
    std::set<std::string> dids = {s.candidates[0].doc_id, s.candidates[1].doc_id};
    CHECK(dids == std::set<std::string>{"d0", "d1"});
  }
}

TEST_CASE("build_candidate_sets rejects an insufficient pool") {
  std::vector<Document> docs = fixture_docs(3);
  Vocabulary v = build_vocabulary(docs, 1);
  CHECK(contains(thrown_message([&] { build_candidate_sets(docs, v, 5, 1); }), "insufficient"));
}

TEST_CASE("corpus jsonl round trip preserves documents") {
  TempDir tmp;
  std::vector<Document> docs = {
      make_doc("d1", "travel", "how far is it", {{"not far at all really", true},
                                                 {"quite far away", false}}),
      make_doc("d2", "health", "is it healthy", {{"yes it is very healthy", true}})};
  save_corpus_jsonl(docs, tmp.file("corpus.jsonl"));
  auto loaded = load_corpus_jsonl(tmp.file("corpus.jsonl"));
  REQUIRE(loaded.size() == 2);
  for (size_t i = 0; i < docs.size(); ++i) {
    CHECK(loaded[i].id == docs[i].id);
    CHECK(loaded[i].category == docs[i].category);
    CHECK(loaded[i].question_text == docs[i].question_text);
    REQUIRE(loaded[i].answers.size() == docs[i].answers.size());
    for (size_t j = 0; j < docs[i].answers.size(); ++j) {
      CHECK(loaded[i].answers[j].text == docs[i].answers[j].text);
      CHECK(loaded[i].answers[j].best == docs[i].answers[j].best);
    }
  }
}

TEST_CASE("corpus jsonl loader reports malformed lines and invalid documents") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.jsonl"));
    out << R"({"id":"d1","category":"c","question":"q words","answers":[{"text":"a","best":true}]})"
        << "\n";
    out << "{oops\n";
  }
  CHECK(contains(thrown_message([&] { load_corpus_jsonl(tmp.file("bad.jsonl")); }), ":2"));

  {
    std::ofstream out(tmp.file("nobest.jsonl"));
    out << R"({"id":"d1","category":"c","question":"q","answers":[{"text":"a","best":false}]})"
        << "\n";
  }
  CHECK(contains(thrown_message([&] { load_corpus_jsonl(tmp.file("nobest.jsonl")); }),
                 "exactly one best"));

  {
    std::ofstream out(tmp.file("dup.jsonl"));
    out << R"({"id":"d1","category":"c","question":"q","answers":[{"text":"a","best":true}]})"
        << "\n";
    out << R"({"id":"d1","category":"c","question":"q","answers":[{"text":"a","best":true}]})"
        << "\n";
  }
  CHECK(contains(thrown_message([&] { load_corpus_jsonl(tmp.file("dup.jsonl")); }), "duplicate"));

  CHECK(contains(thrown_message([&] { load_corpus_jsonl(tmp.file("missing.jsonl")); }),
                 "cannot open"));
}

TEST_CASE("vocabulary file round trip") {
  TempDir tmp;
  std::vector<Document> docs = {make_doc("d1", "c", "a b a", {{"c c d", true}})};
  Vocabulary v = build_vocabulary(docs, 1);
  save_vocabulary(v, tmp.file("vocab.txt"));
  Vocabulary w = load_vocabulary(tmp.file("vocab.txt"));
  CHECK(w.words == v.words);
  CHECK(w.term_freq == v.term_freq);
  CHECK(w.doc_freq == v.doc_freq);
  CHECK(w.total_tokens == v.total_tokens);
  CHECK(w.index == v.index);
}

TEST_CASE("vocabulary loader validates the header") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.txt"));
    out << "NOTVOCAB 1 1\n";
  }
  CHECK(contains(thrown_message([&] { load_vocabulary(tmp.file("bad.txt")); }), "VOCAB"));

  {
    std::ofstream out(tmp.file("short.txt"));
    out << "VOCAB 2 3\n";
    out << "a\t3\t1\n";
  }
  CHECK(contains(thrown_message([&] { load_vocabulary(tmp.file("short.txt")); }), "declares"));
}

TEST_CASE("triples tsv round trip and materialization") {
  TempDir tmp;
  std::vector<Document> docs = fixture_docs(6);
  Vocabulary v = build_vocabulary(docs, 1);
  auto triples = generate_triples(docs, v, 3, 2);
  save_triples_tsv(triples, tmp.file("triples.tsv"));

  auto ids = load_triples_tsv(tmp.file("triples.tsv"));
  REQUIRE(ids.size() == triples.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    CHECK(ids[i].question_id == triples[i].question_id);
    CHECK(ids[i].pos_id == triples[i].pos_id);
    CHECK(ids[i].neg_id == triples[i].neg_id);
  }

  auto rebuilt = materialize_triples(ids, docs, v);
  REQUIRE(rebuilt.size() == triples.size());
  for (size_t i = 0; i < rebuilt.size(); ++i) {
    CHECK(rebuilt[i].question == triples[i].question);
    CHECK(rebuilt[i].pos_answer == triples[i].pos_answer);
    CHECK(rebuilt[i].neg_answer == triples[i].neg_answer);
  }

  std::vector<TripleIds> bogus = {{"nope", "nope", "nope"}};
  CHECK(contains(thrown_message([&] { materialize_triples(bogus, docs, v); }), "unknown"));
}

TEST_CASE("candidate sets file round trip") {
  TempDir tmp;
  std::vector<Document> docs = fixture_docs(8);
  Vocabulary v = build_vocabulary(docs, 1);
  auto sets = build_candidate_sets(docs, v, 5, 4);
  save_candidate_sets(sets, v, tmp.file("cands.jsonl"));
  auto loaded = load_candidate_sets(tmp.file("cands.jsonl"), v);
  REQUIRE(loaded.size() == sets.size());
  for (size_t i = 0; i < sets.size(); ++i) {
    CHECK(loaded[i].question_id == sets[i].question_id);
    CHECK(loaded[i].question == sets[i].question);
    REQUIRE(loaded[i].candidates.size() == sets[i].candidates.size());
    for (size_t j = 0; j < sets[i].candidates.size(); ++j) {
      CHECK(loaded[i].candidates[j].doc_id == sets[i].candidates[j].doc_id);
      CHECK(loaded[i].candidates[j].tokens == sets[i].candidates[j].tokens);
      CHECK(loaded[i].candidates[j].rel == sets[i].candidates[j].rel);
    }
  }
}
