#ifndef WECMATCH_CORPUS_HPP_
#define WECMATCH_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace wecmatch {

// Token-id sequence; ids index into a Vocabulary.
using TokenSeq = std::vector<int32_t>;

struct Answer {
  std::string text;
  bool best = false;
};

struct Document {
  std::string id;
  std::string category;
  std::string question_text;
  std::vector<Answer> answers;

  const std::string& best_answer_text() const;
};

struct Vocabulary {
  std::vector<std::string> words;  // first-seen order
  std::unordered_map<std::string, int32_t> index;
  std::vector<int64_t> term_freq;
  std::vector<int64_t> doc_freq;
  int64_t total_tokens = 0;

  int32_t id_of(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? -1 : it->second;
  }
  size_t size() const { return words.size(); }
};

struct SplitSpec {
  double train_ratio = 4;
  double valid_ratio = 1;
  double test_ratio = 1;
  int negatives_per_question = 10;
  int min_answer_len = 5;
  int max_question_len = 50;
  int max_answer_len = 100;
  uint64_t rng_seed = 1;
};

struct Splits {
  std::vector<Document> train;
  std::vector<Document> valid;
  std::vector<Document> test;
};

struct TrainingTriple {
  TokenSeq question;
  TokenSeq pos_answer;
  TokenSeq neg_answer;
  std::string question_id;
  std::string pos_id;
  std::string neg_id;
};

struct TripleIds {
  std::string question_id;
  std::string pos_id;
  std::string neg_id;
};

struct Candidate {
  TokenSeq tokens;
  std::string doc_id;
  int rel = 0;
};

struct CandidateSet {
  std::string question_id;
  TokenSeq question;
  std::vector<Candidate> candidates;
};

// Lowercases, removes punctuation characters, splits on whitespace.
std::vector<std::string> tokenize(const std::string& text);

// Maps tokens to vocabulary ids, skipping out-of-vocabulary tokens.
TokenSeq to_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab);

Vocabulary build_vocabulary(const std::vector<Document>& docs, int min_count = 1);

Splits filter_and_split(const std::vector<Document>& docs, const SplitSpec& spec);

// For each document: negatives_per_question triples whose negatives are best
// answers of other same-category documents, distinct when the pool allows.
std::vector<TrainingTriple> generate_triples(const std::vector<Document>& docs,
                                             const Vocabulary& vocab,
                                             int negatives_per_question,
                                             uint64_t rng_seed);

// One set per document: its best answer (rel=1) plus `negatives` best answers
// of other same-category documents (rel=0), in shuffled order.
std::vector<CandidateSet> build_candidate_sets(const std::vector<Document>& docs,
                                               const Vocabulary& vocab,
                                               int negatives,
                                               uint64_t rng_seed);

std::vector<Document> load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const std::vector<Document>& docs, const std::string& path);

void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

void save_triples_tsv(const std::vector<TrainingTriple>& triples, const std::string& path);
std::vector<TripleIds> load_triples_tsv(const std::string& path);
std::vector<TrainingTriple> materialize_triples(const std::vector<TripleIds>& ids,
                                                const std::vector<Document>& docs,
                                                const Vocabulary& vocab);

void save_candidate_sets(const std::vector<CandidateSet>& sets, const Vocabulary& vocab,
                         const std::string& path);
std::vector<CandidateSet> load_candidate_sets(const std::string& path, const Vocabulary& vocab);

}  // namespace wecmatch

#endif  // WECMATCH_CORPUS_HPP_
