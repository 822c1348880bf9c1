#include "wecmatch/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wecmatch {

namespace {

constexpr double kFloor = 1e-12;
constexpr double kPruneThreshold = 1e-6;

std::unordered_map<int32_t, int> token_counts(const TokenSeq& seq) {
  std::unordered_map<int32_t, int> counts;
  for (int32_t t : seq) ++counts[t];
  return counts;
}

}  // namespace

CollectionStats collection_stats(const Vocabulary& vocab, int64_t doc_count, double avg_doc_len) {
  if (doc_count > 0 && !(avg_doc_len > 0)) {
    throw std::runtime_error("avg_doc_len must be > 0 for a non-empty collection");
  }
  CollectionStats stats;
  stats.term_freq = vocab.term_freq;
  stats.doc_freq = vocab.doc_freq;
  stats.total_tokens = vocab.total_tokens;
  stats.doc_count = doc_count;
  stats.avg_doc_len = avg_doc_len;
  return stats;
}

Ibm1Result train_ibm1(const std::vector<AlignedPair>& pairs, int iters) {
  if (pairs.empty()) throw std::runtime_error("empty training pairs");
  if (iters < 1) throw std::runtime_error("iters must be >= 1");

  // uniform initialization over co-occurring (source, target) pairs
  std::unordered_map<int32_t, std::unordered_map<int32_t, double>> t;
  for (const auto& pair : pairs) {
    for (int32_t tgt : pair.target) {
      t[kNullToken][tgt] = 0.0;
      for (int32_t src : pair.source) t[src][tgt] = 0.0;
    }
  }
  if (t[kNullToken].empty()) throw std::runtime_error("training pairs have no target tokens");
  for (auto& [src, row] : t) {
    double u = 1.0 / static_cast<double>(row.size());
    for (auto& [tgt, prob] : row) prob = u;
  }

  Ibm1Result result;
  for (int iter = 0; iter < iters; ++iter) {
    std::unordered_map<int32_t, std::unordered_map<int32_t, double>> counts;
    std::unordered_map<int32_t, double> totals;
    double ll = 0.0;

    for (const auto& pair : pairs) {
      double len_norm = std::log(static_cast<double>(pair.source.size() + 1));
      for (int32_t tgt : pair.target) {
        double denom = t[kNullToken][tgt];
        for (int32_t src : pair.source) denom += t[src][tgt];
        ll += std::log(std::max(denom, kFloor)) - len_norm;

        double share = t[kNullToken][tgt] / denom;
        counts[kNullToken][tgt] += share;
        totals[kNullToken] += share;
        for (int32_t src : pair.source) {
          share = t[src][tgt] / denom;
          counts[src][tgt] += share;
          totals[src] += share;
        }
      }
    }

    for (auto& [src, row] : counts) {
      double total = totals[src];
      for (auto& [tgt, c] : row) t[src][tgt] = c / total;
    }
    result.log_likelihood.push_back(ll);
  }

  // prune tiny entries, then restore row normalization
  for (auto& [src, row] : t) {
    double kept_mass = 0.0;
    double best_p = 0.0;
    int32_t best_tgt = 0;
    for (auto& [tgt, prob] : row) {
      if (prob > best_p) {
        best_p = prob;
        best_tgt = tgt;
      }
      if (prob >= kPruneThreshold) kept_mass += prob;
    }
    std::unordered_map<int32_t, double> pruned;
    if (kept_mass > 0) {
      for (auto& [tgt, prob] : row) {
        if (prob >= kPruneThreshold) pruned[tgt] = prob / kept_mass;
      }
    } else {
      pruned[best_tgt] = 1.0;
    }
    row = std::move(pruned);
  }

  result.table.p = std::move(t);
  return result;
}

TranslationTable cosine_table(const EmbeddingMatrix& L, const Vocabulary& vocab, int top_k) {
  if (top_k < 1) throw std::runtime_error("top_k must be >= 1");

  std::vector<int32_t> vocab_ids;
  std::vector<Eigen::Index> emb_rows;
  for (size_t i = 0; i < vocab.words.size(); ++i) {
    int32_t r = L.row_of(vocab.words[i]);
    if (r < 0) continue;
    if (L.vectors.row(r).norm() == 0.0) continue;
    vocab_ids.push_back(static_cast<int32_t>(i));
    emb_rows.push_back(r);
  }

  Eigen::MatrixXd unit(static_cast<Eigen::Index>(emb_rows.size()), L.dim);
  for (size_t i = 0; i < emb_rows.size(); ++i) {
    unit.row(static_cast<Eigen::Index>(i)) =
        L.vectors.row(emb_rows[i]) / L.vectors.row(emb_rows[i]).norm();
  }

  TranslationTable table;
  size_t n = vocab_ids.size();
  size_t k = std::min(static_cast<size_t>(top_k), n);
  std::vector<size_t> order(n);
  for (size_t src = 0; src < n; ++src) {
    Eigen::VectorXd sims = unit * unit.row(static_cast<Eigen::Index>(src)).transpose();
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [&](size_t a, size_t b) {
                        double sa = sims[static_cast<Eigen::Index>(a)];
                        double sb = sims[static_cast<Eigen::Index>(b)];
                        if (sa != sb) return sa > sb;
                        return vocab_ids[a] < vocab_ids[b];
                      });

    double mass = 0.0;
    for (size_t i = 0; i < k; ++i) {
      mass += std::max(sims[static_cast<Eigen::Index>(order[i])], 0.0);
    }
    auto& row = table.p[vocab_ids[src]];
    if (mass > 0) {
      for (size_t i = 0; i < k; ++i) {
        double s = std::max(sims[static_cast<Eigen::Index>(order[i])], 0.0);
        if (s > 0) row[vocab_ids[order[i]]] = s / mass;
      }
    } else {
      // nothing positive among the neighbours: fall back to uniform
      for (size_t i = 0; i < k; ++i) {
        row[vocab_ids[order[i]]] = 1.0 / static_cast<double>(k);
      }
    }
  }
  return table;
}

double score_lm(const TokenSeq& q, const TokenSeq& a, const CollectionStats& stats,
                double lambda) {
  if (lambda < 0 || lambda > 1) throw std::runtime_error("lambda must be in [0,1]");
  auto a_counts = token_counts(a);
  double alen = static_cast<double>(a.size());
  double score = 0.0;
  for (int32_t t : q) {
    double p_doc = 0.0;
    if (alen > 0) {
      auto it = a_counts.find(t);
      if (it != a_counts.end()) p_doc = static_cast<double>(it->second) / alen;
    }
    score += std::log(std::max((1.0 - lambda) * p_doc + lambda * stats.p_coll(t), kFloor));
  }
  return score;
}

double score_okapi(const TokenSeq& q, const TokenSeq& a, const CollectionStats& stats, double k1,
                   double b) {
  if (a.empty() || q.empty()) return 0.0;
  if (!(stats.avg_doc_len > 0)) throw std::runtime_error("collection has no average length");

  auto a_counts = token_counts(a);
  double alen = static_cast<double>(a.size());
  double n_docs = static_cast<double>(stats.doc_count);

  std::unordered_map<int32_t, int> seen;
  double score = 0.0;
  for (int32_t t : q) {
    if (++seen[t] > 1) continue;  // distinct query terms
    auto it = a_counts.find(t);
    if (it == a_counts.end()) continue;
    double tf = static_cast<double>(it->second);
    double df = t >= 0 && static_cast<size_t>(t) < stats.doc_freq.size()
                    ? static_cast<double>(stats.doc_freq[t])
                    : 0.0;
    double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * alen / stats.avg_doc_len));
  }
  return score;
}

namespace {

double translation_mass(int32_t t, const std::unordered_map<int32_t, int>& a_counts, double alen,
                        const TranslationTable& table) {
  double mass = 0.0;
  for (const auto& [w, count] : a_counts) {
    double p = table.prob(t, w);
    if (p > 0) mass += p * static_cast<double>(count) / alen;
  }
  return mass;
}

}  // namespace

double score_tm(const TokenSeq& q, const TokenSeq& a, const TranslationTable& table,
                const CollectionStats& stats, double lambda, int* floored_terms) {
  if (lambda < 0 || lambda > 1) throw std::runtime_error("lambda must be in [0,1]");
  auto a_counts = token_counts(a);
  double alen = static_cast<double>(a.size());
  double score = 0.0;
  for (int32_t t : q) {
    double inner = alen > 0 ? translation_mass(t, a_counts, alen, table) : 0.0;
    double mix = (1.0 - lambda) * inner + lambda * stats.p_coll(t);
    if (mix < kFloor && floored_terms) ++*floored_terms;
    score += std::log(std::max(mix, kFloor));
  }
  return score;
}

double score_trlm(const TokenSeq& q, const TokenSeq& a, const TranslationTable& table,
                  const CollectionStats& stats, double lambda, double beta, int* floored_terms) {
  if (lambda < 0 || lambda > 1) throw std::runtime_error("lambda must be in [0,1]");
  if (beta < 0 || beta > 1) throw std::runtime_error("beta must be in [0,1]");
  auto a_counts = token_counts(a);
  double alen = static_cast<double>(a.size());
  double score = 0.0;
  for (int32_t t : q) {
    double inner = alen > 0 ? translation_mass(t, a_counts, alen, table) : 0.0;
    double p_doc = 0.0;
    if (alen > 0) {
      auto it = a_counts.find(t);
      if (it != a_counts.end()) p_doc = static_cast<double>(it->second) / alen;
    }
    double mix = (1.0 - lambda) * (beta * inner + (1.0 - beta) * p_doc) + lambda * stats.p_coll(t);
    if (mix < kFloor && floored_terms) ++*floored_terms;
    score += std::log(std::max(mix, kFloor));
  }
  return score;
}

void save_translation_table(const TranslationTable& table, const Vocabulary& vocab,
                            const std::string& path) {
  std::vector<std::pair<int32_t, int32_t>> entries;  // (source, target)
  size_t count = 0;
  for (const auto& [src, row] : table.p) count += row.size();
  entries.reserve(count);
  for (const auto& [src, row] : table.p) {
    for (const auto& [tgt, prob] : row) entries.emplace_back(src, tgt);
  }
  std::sort(entries.begin(), entries.end());

  auto word_of = [&](int32_t id) -> std::string {
    if (id == kNullToken) return "<NULL>";
    return vocab.words.at(static_cast<size_t>(id));
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write translation table: " + path);
  out << "TTABLE " << entries.size() << '\n';
  char buf[64];
  for (const auto& [src, tgt] : entries) {
    std::snprintf(buf, sizeof(buf), "%.9g", table.p.at(src).at(tgt));
    out << word_of(tgt) << '\t' << word_of(src) << '\t' << buf << '\n';
  }
}

TranslationTable load_translation_table(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open translation table: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty translation table");
  std::istringstream header(line);
  std::string magic;
  size_t declared = 0;
  if (!(header >> magic >> declared) || magic != "TTABLE") {
    throw std::runtime_error(path + ":1: expected header 'TTABLE <n_entries>'");
  }

  auto id_of = [&](const std::string& w, size_t lineno) -> int32_t {
    if (w == "<NULL>") return kNullToken;
    int32_t id = vocab.id_of(w);
    if (id < 0) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": word '" + w +
                               "' not in vocabulary");
    }
    return id;
  };

  TranslationTable table;
  size_t lineno = 1;
  size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tgt, src;
    double prob = 0.0;
    if (!std::getline(row, tgt, '\t') || !std::getline(row, src, '\t') || !(row >> prob)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 't<TAB>w<TAB>p'");
    }
    table.p[id_of(src, lineno)][id_of(tgt, lineno)] = prob;
    ++seen;
  }
  if (seen != declared) {
    throw std::runtime_error(path + ": header declares " + std::to_string(declared) +
                             " entries, file has " + std::to_string(seen));
  }
  return table;
}

}  // namespace wecmatch
