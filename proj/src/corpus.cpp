#include "wecmatch/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "wecmatch/rng.hpp"

namespace wecmatch {

using nlohmann::json;

const std::string& Document::best_answer_text() const {
  for (const auto& a : answers) {
    if (a.best) return a.text;
  }
  throw std::runtime_error("document '" + id + "' has no best answer");
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else if (std::ispunct(c)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

TokenSeq to_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  TokenSeq ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    int32_t id = vocab.id_of(t);
    if (id >= 0) ids.push_back(id);
  }
  return ids;
}

Vocabulary build_vocabulary(const std::vector<Document>& docs, int min_count) {
  if (docs.empty()) throw std::runtime_error("empty corpus");
  if (min_count < 1) throw std::runtime_error("min_count must be >= 1");

  std::vector<std::string> order;
  std::unordered_map<std::string, int64_t> tf;
  std::unordered_map<std::string, int64_t> df;
  std::unordered_map<std::string, size_t> last_doc;

  for (size_t di = 0; di < docs.size(); ++di) {
    auto count_text = [&](const std::string& text) {
      for (auto& w : tokenize(text)) {
        auto [it, first_ever] = tf.try_emplace(w, 0);
        if (first_ever) order.push_back(w);
        ++it->second;
        auto [dit, first_in_doc] = last_doc.try_emplace(w, di);
        if (first_ever || dit->second != di) {
          dit->second = di;
          ++df[w];
        }
      }
    };
    count_text(docs[di].question_text);
    for (const auto& a : docs[di].answers) count_text(a.text);
  }

  Vocabulary vocab;
  for (const auto& w : order) {
    if (tf[w] < min_count) continue;
    vocab.index.emplace(w, static_cast<int32_t>(vocab.words.size()));
    vocab.words.push_back(w);
    vocab.term_freq.push_back(tf[w]);
    vocab.doc_freq.push_back(df[w]);
    vocab.total_tokens += tf[w];
  }
  if (vocab.words.empty()) throw std::runtime_error("empty vocabulary after min_count filter");
  return vocab;
}

Splits filter_and_split(const std::vector<Document>& docs, const SplitSpec& spec) {
  double rsum = spec.train_ratio + spec.valid_ratio + spec.test_ratio;
  if (spec.train_ratio < 0 || spec.valid_ratio < 0 || spec.test_ratio < 0 || !(rsum > 0)) {
    throw std::runtime_error("invalid split ratios");
  }

  std::vector<Document> kept;
  for (const auto& d : docs) {
    int qlen = static_cast<int>(tokenize(d.question_text).size());
    if (qlen > spec.max_question_len) continue;
    int alen = static_cast<int>(tokenize(d.best_answer_text()).size());
    if (alen > spec.max_answer_len || alen < spec.min_answer_len) continue;
    kept.push_back(d);
  }

  Rng rng(substream(spec.rng_seed, "split"));
  rng.shuffle(kept);

  size_t n = kept.size();
  auto share = [&](double ratio) {
    return static_cast<size_t>(std::llround(static_cast<double>(n) * ratio / rsum));
  };
  size_t n_train = std::min(share(spec.train_ratio), n);
  size_t n_valid = std::min(share(spec.valid_ratio), n - n_train);

  Splits out;
  out.train.assign(kept.begin(), kept.begin() + n_train);
  out.valid.assign(kept.begin() + n_train, kept.begin() + n_train + n_valid);
  out.test.assign(kept.begin() + n_train + n_valid, kept.end());
  return out;
}

namespace {

struct CategoryGroups {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<size_t>> members;
};

CategoryGroups group_by_category(const std::vector<Document>& docs) {
  CategoryGroups g;
  for (size_t i = 0; i < docs.size(); ++i) {
    auto [it, fresh] = g.members.try_emplace(docs[i].category);
    if (fresh) g.order.push_back(docs[i].category);
    it->second.push_back(i);
  }
  return g;
}

}  // namespace

std::vector<TrainingTriple> generate_triples(const std::vector<Document>& docs,
                                             const Vocabulary& vocab,
                                             int negatives_per_question,
                                             uint64_t rng_seed) {
  if (negatives_per_question < 1) throw std::runtime_error("negatives_per_question must be >= 1");

  CategoryGroups groups = group_by_category(docs);
  for (const auto& c : groups.order) {
    if (groups.members[c].size() < 2) {
      throw std::runtime_error("category '" + c +
                               "' has a single question; no negatives available");
    }
  }

  std::vector<TokenSeq> q_tokens(docs.size());
  std::vector<TokenSeq> best_tokens(docs.size());
  std::vector<std::vector<TokenSeq>> answer_tokens(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    q_tokens[i] = to_ids(tokenize(docs[i].question_text), vocab);
    best_tokens[i] = to_ids(tokenize(docs[i].best_answer_text()), vocab);
    for (const auto& a : docs[i].answers) {
      answer_tokens[i].push_back(to_ids(tokenize(a.text), vocab));
    }
  }

  std::unordered_map<std::string, Rng> cat_rng;
  auto rng_for = [&](const std::string& cat) -> Rng& {
    auto it = cat_rng.find(cat);
    if (it == cat_rng.end()) {
      it = cat_rng.emplace(cat, Rng(substream(rng_seed, "triples:" + cat))).first;
    }
    return it->second;
  };

  std::vector<TrainingTriple> triples;
  triples.reserve(docs.size() * static_cast<size_t>(negatives_per_question));
  for (size_t i = 0; i < docs.size(); ++i) {
    const auto& cat = docs[i].category;

    // Negatives must not textually match any answer of this question.
    std::vector<size_t> pool;
    for (size_t j : groups.members[cat]) {
      if (j == i) continue;
      bool clashes = false;
      for (const auto& own : answer_tokens[i]) {
        if (best_tokens[j] == own) {
          clashes = true;
          break;
        }
      }
      if (!clashes) pool.push_back(j);
    }
    if (pool.empty()) {
      throw std::runtime_error("no usable negatives for question '" + docs[i].id +
                               "' in category '" + cat + "'");
    }

    Rng& rng = rng_for(cat);
    size_t k = static_cast<size_t>(negatives_per_question);
    std::vector<size_t> chosen;
    if (pool.size() >= k) {
      for (size_t idx : rng.sample_without_replacement(pool.size(), k)) {
        chosen.push_back(pool[idx]);
      }
    } else {
      for (size_t t = 0; t < k; ++t) chosen.push_back(pool[rng.below(pool.size())]);
    }

    for (size_t j : chosen) {
      TrainingTriple tr;
      tr.question = q_tokens[i];
      tr.pos_answer = best_tokens[i];
      tr.neg_answer = best_tokens[j];
      tr.question_id = docs[i].id;
      tr.pos_id = docs[i].id;
      tr.neg_id = docs[j].id;
      triples.push_back(std::move(tr));
    }
  }
  return triples;
}

std::vector<CandidateSet> build_candidate_sets(const std::vector<Document>& docs,
                                               const Vocabulary& vocab,
                                               int negatives,
                                               uint64_t rng_seed) {
  if (negatives < 1) throw std::runtime_error("negatives must be >= 1");

  CategoryGroups groups = group_by_category(docs);

  std::vector<TokenSeq> best_tokens(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    best_tokens[i] = to_ids(tokenize(docs[i].best_answer_text()), vocab);
  }

  std::unordered_map<std::string, Rng> cat_rng;
  auto rng_for = [&](const std::string& cat) -> Rng& {
    auto it = cat_rng.find(cat);
    if (it == cat_rng.end()) {
      it = cat_rng.emplace(cat, Rng(substream(rng_seed, "candidates:" + cat))).first;
    }
    return it->second;
  };

  std::vector<CandidateSet> sets;
  sets.reserve(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    const auto& cat = docs[i].category;

    std::vector<size_t> pool;
    for (size_t j : groups.members[cat]) {
      if (j != i && best_tokens[j] != best_tokens[i]) pool.push_back(j);
    }
    if (pool.size() < static_cast<size_t>(negatives)) {
      throw std::runtime_error("insufficient negative pool for question '" + docs[i].id +
                               "' (have " + std::to_string(pool.size()) + ", need " +
                               std::to_string(negatives) + ")");
    }

    Rng& rng = rng_for(cat);

    CandidateSet set;
    set.question_id = docs[i].id;
    set.question = to_ids(tokenize(docs[i].question_text), vocab);
    set.candidates.push_back({best_tokens[i], docs[i].id, 1});
    for (size_t idx : rng.sample_without_replacement(pool.size(), negatives)) {
      set.candidates.push_back({best_tokens[pool[idx]], docs[pool[idx]].id, 0});
    }
    rng.shuffle(set.candidates);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<Document> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);

  std::vector<Document> docs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Document d;
    try {
      json j = json::parse(line);
      d.id = j.at("id").get<std::string>();
      d.category = j.at("category").get<std::string>();
      d.question_text = j.at("question").get<std::string>();
      for (const auto& ja : j.at("answers")) {
        Answer a;
        a.text = ja.at("text").get<std::string>();
        a.best = ja.value("best", false);
        d.answers.push_back(std::move(a));
      }
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    int best_count = 0;
    for (const auto& a : d.answers) best_count += a.best ? 1 : 0;
    if (best_count != 1) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": document '" + d.id +
                               "' must have exactly one best answer, found " +
                               std::to_string(best_count));
    }
    if (!seen_ids.insert(d.id).second) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate document id '" +
                               d.id + "'");
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

void save_corpus_jsonl(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& d : docs) {
    json answers = json::array();
    for (const auto& a : d.answers) {
      answers.push_back({{"text", a.text}, {"best", a.best}});
    }
    json j = {{"id", d.id}, {"category", d.category}, {"question", d.question_text},
              {"answers", answers}};
    out << j.dump() << '\n';
  }
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  out << "VOCAB " << vocab.words.size() << ' ' << vocab.total_tokens << '\n';
  for (size_t i = 0; i < vocab.words.size(); ++i) {
    out << vocab.words[i] << '\t' << vocab.term_freq[i] << '\t' << vocab.doc_freq[i] << '\n';
  }
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty vocabulary file");
  std::istringstream header(line);
  std::string magic;
  size_t size = 0;
  int64_t total = 0;
  if (!(header >> magic >> size >> total) || magic != "VOCAB") {
    throw std::runtime_error(path + ":1: expected header 'VOCAB <size> <total_tokens>'");
  }

  Vocabulary vocab;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string word;
    int64_t tf = 0, df = 0;
    if (!std::getline(row, word, '\t') || !(row >> tf >> df)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'word<TAB>term_freq<TAB>doc_freq'");
    }
    vocab.index.emplace(word, static_cast<int32_t>(vocab.words.size()));
    vocab.words.push_back(word);
    vocab.term_freq.push_back(tf);
    vocab.doc_freq.push_back(df);
    vocab.total_tokens += tf;
  }
  if (vocab.words.size() != size) {
    throw std::runtime_error(path + ": header declares " + std::to_string(size) +
                             " words, file has " + std::to_string(vocab.words.size()));
  }
  if (vocab.total_tokens != total) {
    throw std::runtime_error(path + ": header declares " + std::to_string(total) +
                             " tokens, rows sum to " + std::to_string(vocab.total_tokens));
  }
  return vocab;
}

void save_triples_tsv(const std::vector<TrainingTriple>& triples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write triples file: " + path);
  for (const auto& t : triples) {
    out << t.question_id << '\t' << t.pos_id << '\t' << t.neg_id << '\n';
  }
}

std::vector<TripleIds> load_triples_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open triples file: " + path);
  std::vector<TripleIds> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    TripleIds t;
    if (!std::getline(row, t.question_id, '\t') || !std::getline(row, t.pos_id, '\t') ||
        !std::getline(row, t.neg_id)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 3 tab-separated ids");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TrainingTriple> materialize_triples(const std::vector<TripleIds>& ids,
                                                const std::vector<Document>& docs,
                                                const Vocabulary& vocab) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, &d);
  auto find = [&](const std::string& id) -> const Document& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("unknown document id '" + id + "'");
    return *it->second;
  };

  std::vector<TrainingTriple> out;
  out.reserve(ids.size());
  for (const auto& t : ids) {
    const Document& qd = find(t.question_id);
    const Document& pd = find(t.pos_id);
    const Document& nd = find(t.neg_id);
    TrainingTriple tr;
    tr.question = to_ids(tokenize(qd.question_text), vocab);
    tr.pos_answer = to_ids(tokenize(pd.best_answer_text()), vocab);
    tr.neg_answer = to_ids(tokenize(nd.best_answer_text()), vocab);
    tr.question_id = t.question_id;
    tr.pos_id = t.pos_id;
    tr.neg_id = t.neg_id;
    out.push_back(std::move(tr));
  }
  return out;
}

namespace {

std::string join_words(const TokenSeq& ids, const Vocabulary& vocab) {
  std::string s;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ' ';
    s += vocab.words.at(static_cast<size_t>(ids[i]));
  }
  return s;
}

TokenSeq split_to_ids(const std::string& text, const Vocabulary& vocab) {
  TokenSeq ids;
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    int32_t id = vocab.id_of(w);
    if (id >= 0) ids.push_back(id);
  }
  return ids;
}

}  // namespace

void save_candidate_sets(const std::vector<CandidateSet>& sets, const Vocabulary& vocab,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write candidate sets file: " + path);
  for (const auto& s : sets) {
    json cands = json::array();
    for (const auto& c : s.candidates) {
      cands.push_back(
          {{"doc_id", c.doc_id}, {"text", join_words(c.tokens, vocab)}, {"rel", c.rel}});
    }
    json j = {{"question_id", s.question_id}, {"question", join_words(s.question, vocab)},
              {"candidates", cands}};
    out << j.dump() << '\n';
  }
}

std::vector<CandidateSet> load_candidate_sets(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open candidate sets file: " + path);
  std::vector<CandidateSet> sets;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      CandidateSet s;
      s.question_id = j.at("question_id").get<std::string>();
      s.question = split_to_ids(j.at("question").get<std::string>(), vocab);
      for (const auto& jc : j.at("candidates")) {
        Candidate c;
        c.doc_id = jc.at("doc_id").get<std::string>();
        c.tokens = split_to_ids(jc.at("text").get<std::string>(), vocab);
        c.rel = jc.at("rel").get<int>();
        s.candidates.push_back(std::move(c));
      }
      sets.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return sets;
}

}  // namespace wecmatch
