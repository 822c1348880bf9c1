#include "wecmatch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace wecmatch {

namespace {

std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

double dcg_at_p(const std::vector<int>& rels, int p) {
  if (p < 1) throw std::invalid_argument("dcg_at_p: p must be >= 1");
  double dcg = 0.0;
  size_t limit = std::min(rels.size(), static_cast<size_t>(p));
  for (size_t i = 0; i < limit; ++i) {
    int rel = rels[i];
    if (rel != 0 && rel != 1) throw std::invalid_argument("dcg_at_p: rel values must be 0 or 1");
    if (i == 0) {
      dcg += rel;
    } else {
      dcg += rel / std::log2(static_cast<double>(i + 1));
    }
  }
  return dcg;
}

RankedCandidates rank_candidates(const Scorer& scorer, const CandidateSet& set) {
  RankedCandidates ranked;
  ranked.question_id = set.question_id;
  ranked.ordering.reserve(set.candidates.size());
  for (size_t i = 0; i < set.candidates.size(); ++i) {
    const Candidate& cand = set.candidates[i];
    double score;
    try {
      score = scorer(set.question, cand.tokens);
    } catch (const std::exception& e) {
      throw std::runtime_error("question " + set.question_id + ": " + e.what());
    }
    ranked.ordering.push_back({static_cast<int>(i), score, cand.rel});
  }
  std::stable_sort(ranked.ordering.begin(), ranked.ordering.end(),
                   [](const RankedEntry& x, const RankedEntry& y) { return x.score > y.score; });
  return ranked;
}

namespace {

PerQuestionEval evaluate_one(const Scorer& scorer, const CandidateSet& set) {
  RankedCandidates ranked = rank_candidates(scorer, set);
  PerQuestionEval row;
  row.question_id = set.question_id;
  std::vector<int> rels;
  rels.reserve(ranked.ordering.size());
  for (size_t i = 0; i < ranked.ordering.size(); ++i) {
    rels.push_back(ranked.ordering[i].rel);
    if (ranked.ordering[i].rel == 1) row.rank_of_best = static_cast<int>(i) + 1;
  }
  row.dcg1 = dcg_at_p(rels, 1);
  row.dcg6 = dcg_at_p(rels, 6);
  return row;
}

}  // namespace

EvalReport evaluate(const Scorer& scorer, const std::vector<CandidateSet>& sets, int threads) {
  for (const auto& set : sets) {
    int best = 0;
    for (const auto& cand : set.candidates) best += cand.rel;
    if (best != 1) {
      throw std::invalid_argument("question " + set.question_id +
                                  ": candidate set must contain exactly one best answer");
    }
  }

  std::vector<PerQuestionEval> rows(sets.size());
  size_t n = sets.size();
  size_t workers = std::min<size_t>(std::max(threads, 1), std::max<size_t>(n, 1));

  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) rows[i] = evaluate_one(scorer, sets[i]);
  } else {
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
      size_t lo = w * chunk;
      size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        try {
          for (size_t i = lo; i < hi; ++i) rows[i] = evaluate_one(scorer, sets[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  EvalReport report;
  report.n_questions = static_cast<int64_t>(n);
  for (const auto& row : rows) {
    report.dcg1 += row.dcg1;
    report.dcg6 += row.dcg6;
  }
  if (n > 0) {
    report.dcg1 /= static_cast<double>(n);
    report.dcg6 /= static_cast<double>(n);
  }
  report.per_question = std::move(rows);
  return report;
}

namespace {

std::vector<WordScore> top_k(std::vector<WordScore> scored, int k) {
  std::stable_sort(scored.begin(), scored.end(),
                   [](const WordScore& x, const WordScore& y) { return x.score > y.score; });
  if (static_cast<size_t>(k) < scored.size()) scored.resize(static_cast<size_t>(k));
  return scored;
}

Eigen::VectorXd probe_vector(const std::string& word, const EmbeddingMatrix& L) {
  auto v = L.lookup(word);
  if (!v) throw std::invalid_argument("word '" + word + "' is not in the embedding vocabulary");
  return *v;
}

}  // namespace

std::vector<WordScore> explain_translations_wec(const std::string& word,
                                                const EmbeddingMatrix& L,
                                                const TranslationMatrix& M, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  Eigen::VectorXd vq = probe_vector(word, L);
  std::vector<WordScore> scored;
  scored.reserve(L.size());
  for (size_t i = 0; i < L.size(); ++i) {
    scored.push_back({L.words[i], word_correlation(vq, L.vectors.row(i).transpose(), M)});
  }
  return top_k(std::move(scored), k);
}

std::vector<WordScore> explain_translations_cosine(const std::string& word,
                                                   const EmbeddingMatrix& L, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  Eigen::VectorXd vq = probe_vector(word, L);
  double qn = vq.norm();
  if (qn == 0.0) throw std::invalid_argument("word '" + word + "' has a zero vector");
  std::vector<WordScore> scored;
  scored.reserve(L.size());
  for (size_t i = 0; i < L.size(); ++i) {
    double wn = L.vectors.row(i).norm();
    double sim = wn == 0.0 ? 0.0 : vq.dot(L.vectors.row(i).transpose()) / (qn * wn);
    scored.push_back({L.words[i], std::clamp(sim, -1.0, 1.0)});
  }
  return top_k(std::move(scored), k);
}

std::vector<WordScore> explain_translations_table(const std::string& word,
                                                  const TranslationTable& table,
                                                  const Vocabulary& vocab, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  int32_t target = vocab.id_of(word);
  if (target < 0) throw std::invalid_argument("word '" + word + "' is not in the vocabulary");
  std::vector<WordScore> scored;
  for (int32_t src = 0; src < static_cast<int32_t>(vocab.size()); ++src) {
    double p = table.prob(target, src);
    if (p > 0.0) scored.push_back({vocab.words[src], p});
  }
  return top_k(std::move(scored), k);
}

RenderedBreakdown explain_links(const std::vector<std::string>& question_words,
                                const std::vector<std::string>& answer_words,
                                const EmbeddingMatrix& L, const TranslationMatrix& M) {
  std::vector<std::string> q_found, a_found;
  std::vector<Eigen::VectorXd> q_vecs, a_vecs;
  for (const auto& w : question_words) {
    if (auto v = L.lookup(w)) {
      q_found.push_back(w);
      q_vecs.push_back(*v);
    }
  }
  for (const auto& w : answer_words) {
    if (auto v = L.lookup(w)) {
      a_found.push_back(w);
      a_vecs.push_back(*v);
    }
  }
  if (q_vecs.empty()) throw std::invalid_argument("no question word has an embedding");
  if (a_vecs.empty()) throw std::invalid_argument("no answer word has an embedding");

  Eigen::MatrixXd q(q_vecs.size(), L.dim), a(a_vecs.size(), L.dim);
  for (size_t i = 0; i < q_vecs.size(); ++i) q.row(static_cast<Eigen::Index>(i)) = q_vecs[i];
  for (size_t i = 0; i < a_vecs.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = a_vecs[i];

  ScoreBreakdown breakdown = score_breakdown(q, a, M);
  RenderedBreakdown out;
  out.sentence_score = breakdown.sentence_score;
  out.links.reserve(breakdown.per_answer_word.size());
  for (const auto& link : breakdown.per_answer_word) {
    out.links.push_back({a_found[static_cast<size_t>(link.answer_pos)],
                         q_found[static_cast<size_t>(link.best_question_pos)], link.score});
  }
  return out;
}

Scorer make_wec_scorer(const TokenEmbedder& embedder, const TranslationMatrix& M) {
  return [embedder, M](const TokenSeq& question, const TokenSeq& answer) {
    Eigen::MatrixXd q = embedder.embed(question);
    Eigen::MatrixXd a = embedder.embed(answer);
    if (q.rows() == 0 || a.rows() == 0) return kUnscorable;
    return sentence_correlation(q, a, M);
  };
}

Scorer make_cosine_scorer(const TokenEmbedder& embedder) {
  return make_wec_scorer(embedder, TranslationMatrix::identity(embedder.embeddings().dim));
}

Scorer make_lm_scorer(const CollectionStats& stats, double lambda) {
  return [stats, lambda](const TokenSeq& question, const TokenSeq& answer) {
    return score_lm(question, answer, stats, lambda);
  };
}

Scorer make_okapi_scorer(const CollectionStats& stats, double k1, double b) {
  return [stats, k1, b](const TokenSeq& question, const TokenSeq& answer) {
    return score_okapi(question, answer, stats, k1, b);
  };
}

Scorer make_tm_scorer(const TranslationTable& table, const CollectionStats& stats, double lambda) {
  return [table, stats, lambda](const TokenSeq& question, const TokenSeq& answer) {
    return score_tm(question, answer, table, stats, lambda);
  };
}

Scorer make_trlm_scorer(const TranslationTable& table, const CollectionStats& stats, double lambda,
                        double beta) {
  return [table, stats, lambda, beta](const TokenSeq& question, const TokenSeq& answer) {
    return score_trlm(question, answer, table, stats, lambda, beta);
  };
}

void save_eval_report(const EvalReport& report, const std::string& scorer_name,
                      const std::string& config_hash, const std::string& path) {
  nlohmann::json j;
  j["n_questions"] = report.n_questions;
  j["dcg1"] = report.dcg1;
  j["dcg6"] = report.dcg6;
  j["scorer"] = scorer_name;
  j["config_hash"] = config_hash;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void save_per_question_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "question_id,rank_of_best,dcg6\n";
  for (const auto& row : report.per_question) {
    out << row.question_id << "," << row.rank_of_best << "," << format_g9(row.dcg6) << "\n";
  }
}

}  // namespace wecmatch
