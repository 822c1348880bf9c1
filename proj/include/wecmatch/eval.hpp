#ifndef WECMATCH_EVAL_HPP_
#define WECMATCH_EVAL_HPP_

#include <functional>
#include <string>
#include <vector>

#include "wecmatch/baselines.hpp"
#include "wecmatch/corpus.hpp"
#include "wecmatch/embeddings.hpp"
#include "wecmatch/wec.hpp"

namespace wecmatch {

using Scorer = std::function<double(const TokenSeq& question, const TokenSeq& answer)>;

// Embedding-based scorers return this when one side has no embeddable token;
// real correlations live in [-1, 1], so such candidates sink to the bottom.
constexpr double kUnscorable = -2.0;

struct RankedEntry {
  int candidate_index = 0;
  double score = 0.0;
  int rel = 0;
};

struct RankedCandidates {
  std::string question_id;
  std::vector<RankedEntry> ordering;  // non-increasing scores, ties keep input order
};

struct PerQuestionEval {
  std::string question_id;
  int rank_of_best = 0;  // 1-based
  double dcg1 = 0.0;
  double dcg6 = 0.0;
};

struct EvalReport {
  int64_t n_questions = 0;
  double dcg1 = 0.0;
  double dcg6 = 0.0;
  std::vector<PerQuestionEval> per_question;
};

// rel_1 + sum_{i=2..p} rel_i / log2(i); ranks past the end contribute 0
double dcg_at_p(const std::vector<int>& rels, int p);

RankedCandidates rank_candidates(const Scorer& scorer, const CandidateSet& set);

// Means of per-question DCG@1 / DCG@6; parallel across sets, deterministic.
EvalReport evaluate(const Scorer& scorer, const std::vector<CandidateSet>& sets,
                    int threads = 1);

struct WordScore {
  std::string word;
  double score = 0.0;
};

// Top-k answer-side words for a question word, by cos(v_word, M v_w).
std::vector<WordScore> explain_translations_wec(const std::string& word,
                                                const EmbeddingMatrix& L,
                                                const TranslationMatrix& M, int k);
std::vector<WordScore> explain_translations_cosine(const std::string& word,
                                                   const EmbeddingMatrix& L, int k);
// Ranks answer words w by P(word | w); zero-probability rows are omitted.
std::vector<WordScore> explain_translations_table(const std::string& word,
                                                  const TranslationTable& table,
                                                  const Vocabulary& vocab, int k);

struct RenderedLink {
  std::string answer_word;
  std::string question_word;
  double score = 0.0;
};

struct RenderedBreakdown {
  std::vector<RenderedLink> links;  // one per embeddable answer word
  double sentence_score = 0.0;
};

RenderedBreakdown explain_links(const std::vector<std::string>& question_words,
                                const std::vector<std::string>& answer_words,
                                const EmbeddingMatrix& L, const TranslationMatrix& M);

// Scorer factories. Translation tables and collection stats are copied; the
// embedder's underlying EmbeddingMatrix must outlive the returned scorer.
Scorer make_wec_scorer(const TokenEmbedder& embedder, const TranslationMatrix& M);
Scorer make_cosine_scorer(const TokenEmbedder& embedder);
Scorer make_lm_scorer(const CollectionStats& stats, double lambda);
Scorer make_okapi_scorer(const CollectionStats& stats, double k1, double b);
Scorer make_tm_scorer(const TranslationTable& table, const CollectionStats& stats, double lambda);
Scorer make_trlm_scorer(const TranslationTable& table, const CollectionStats& stats,
                        double lambda, double beta);

void save_eval_report(const EvalReport& report, const std::string& scorer_name,
                      const std::string& config_hash, const std::string& path);
void save_per_question_csv(const EvalReport& report, const std::string& path);

}  // namespace wecmatch

#endif  // WECMATCH_EVAL_HPP_
