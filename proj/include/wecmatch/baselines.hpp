#ifndef WECMATCH_BASELINES_HPP_
#define WECMATCH_BASELINES_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "wecmatch/corpus.hpp"
#include "wecmatch/embeddings.hpp"

namespace wecmatch {

// Source token standing in for "no aligned word" in IBM model 1.
inline constexpr int32_t kNullToken = -1;

struct TranslationTable {
  // p[source][target] = P(target | source); rows sum to 1
  std::unordered_map<int32_t, std::unordered_map<int32_t, double>> p;

  double prob(int32_t target, int32_t source) const {
    auto row = p.find(source);
    if (row == p.end()) return 0.0;
    auto it = row->second.find(target);
    return it == row->second.end() ? 0.0 : it->second;
  }
};

struct BaselineConfig {
  double lambda = 0.2;
  double beta = 0.8;
  double bm25_k1 = 1.2;
  double bm25_b = 0.75;
  int ibm1_iters = 5;
  int cos_top_k = 100;
};

struct CollectionStats {
  std::vector<int64_t> term_freq;
  std::vector<int64_t> doc_freq;
  int64_t total_tokens = 0;
  int64_t doc_count = 0;
  double avg_doc_len = 0.0;

  double p_coll(int32_t t) const {
    if (t < 0 || static_cast<size_t>(t) >= term_freq.size() || total_tokens <= 0) return 0.0;
    return static_cast<double>(term_freq[t]) / static_cast<double>(total_tokens);
  }
};

CollectionStats collection_stats(const Vocabulary& vocab, int64_t doc_count, double avg_doc_len);

// One (answer, question) sentence pair; answers are the translation source.
struct AlignedPair {
  TokenSeq source;
  TokenSeq target;
};

struct Ibm1Result {
  TranslationTable table;
  std::vector<double> log_likelihood;  // one entry per EM iteration
};

Ibm1Result train_ibm1(const std::vector<AlignedPair>& pairs, int iters);

// Top-k cosine neighbours as translation probabilities: negatives clamped to
// zero, rows renormalized, uniform fallback when a row clamps to nothing.
TranslationTable cosine_table(const EmbeddingMatrix& L, const Vocabulary& vocab, int top_k);

double score_lm(const TokenSeq& q, const TokenSeq& a, const CollectionStats& stats,
                double lambda);
double score_okapi(const TokenSeq& q, const TokenSeq& a, const CollectionStats& stats, double k1,
                   double b);
double score_tm(const TokenSeq& q, const TokenSeq& a, const TranslationTable& table,
                const CollectionStats& stats, double lambda, int* floored_terms = nullptr);
double score_trlm(const TokenSeq& q, const TokenSeq& a, const TranslationTable& table,
                  const CollectionStats& stats, double lambda, double beta,
                  int* floored_terms = nullptr);

void save_translation_table(const TranslationTable& table, const Vocabulary& vocab,
                            const std::string& path);
TranslationTable load_translation_table(const std::string& path, const Vocabulary& vocab);

}  // namespace wecmatch

#endif  // WECMATCH_BASELINES_HPP_
