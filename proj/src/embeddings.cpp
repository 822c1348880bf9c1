#include "wecmatch/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wecmatch/rng.hpp"

namespace wecmatch {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SkipGramResult train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                              const SkipGramConfig& cfg) {
  if (cfg.dim <= 0) throw std::runtime_error("dim must be > 0");
  if (cfg.window < 1) throw std::runtime_error("window must be >= 1");
  if (cfg.negative_samples < 1) throw std::runtime_error("negative_samples must be >= 1");
  if (sentences.empty()) throw std::runtime_error("empty corpus");

  std::vector<std::string> order;
  std::unordered_map<std::string, int64_t> counts;
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      auto [it, fresh] = counts.try_emplace(w, 0);
      if (fresh) order.push_back(w);
      ++it->second;
    }
  }

  EmbeddingMatrix m;
  m.dim = cfg.dim;
  std::vector<int64_t> freq;
  for (const auto& w : order) {
    if (counts[w] < cfg.min_count) continue;
    m.index.emplace(w, static_cast<int32_t>(m.words.size()));
    m.words.push_back(w);
    freq.push_back(counts[w]);
  }
  if (m.words.empty()) throw std::runtime_error("empty corpus after min_count filter");
  size_t n = m.words.size();

  std::vector<std::vector<int32_t>> ids;
  ids.reserve(sentences.size());
  int64_t total = 0;
  bool trainable = false;
  for (const auto& s : sentences) {
    std::vector<int32_t> row;
    for (const auto& w : s) {
      auto it = m.index.find(w);
      if (it != m.index.end()) row.push_back(it->second);
    }
    total += static_cast<int64_t>(row.size());
    if (row.size() >= 2) trainable = true;
    if (!row.empty()) ids.push_back(std::move(row));
  }
  if (!trainable) throw std::runtime_error("corpus smaller than one window");

  Rng rng(cfg.rng_seed);

  Eigen::MatrixXd syn0(n, cfg.dim);
  for (size_t r = 0; r < n; ++r) {
    for (int c = 0; c < cfg.dim; ++c) {
      syn0(r, c) = (rng.uniform01() - 0.5) / cfg.dim;
    }
  }
  Eigen::MatrixXd syn1 = Eigen::MatrixXd::Zero(n, cfg.dim);

  // unigram^0.75 cumulative distribution for negative sampling
  std::vector<double> cum(n);
  double z = 0.0;
  for (size_t i = 0; i < n; ++i) {
    z += std::pow(static_cast<double>(freq[i]), 0.75);
    cum[i] = z;
  }
  auto sample_word = [&]() {
    double u = rng.uniform01() * z;
    return static_cast<int32_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
  };

  SkipGramResult result;
  double planned = static_cast<double>(std::max(cfg.epochs, 1)) * static_cast<double>(total) + 1.0;
  int64_t words_done = 0;
  Eigen::VectorXd neu1e(cfg.dim);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    int64_t pairs = 0;
    for (const auto& sent : ids) {
      std::vector<int32_t> kept;
      kept.reserve(sent.size());
      for (int32_t w : sent) {
        ++words_done;
        if (cfg.subsample_threshold > 0) {
          double f = static_cast<double>(freq[w]) / static_cast<double>(total);
          double p_keep = std::sqrt(cfg.subsample_threshold / f);
          if (p_keep < 1.0 && rng.uniform01() > p_keep) continue;
        }
        kept.push_back(w);
      }
      if (kept.size() < 2) continue;

      for (size_t i = 0; i < kept.size(); ++i) {
        double lr = cfg.initial_lr *
                    std::max(1.0 - static_cast<double>(words_done) / planned, 1e-4);
        int half = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.window)));
        size_t lo = i >= static_cast<size_t>(half) ? i - half : 0;
        size_t hi = std::min(kept.size() - 1, i + static_cast<size_t>(half));
        for (size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          int32_t center = kept[i];
          int32_t target = kept[j];
          neu1e.setZero();
          for (int k = 0; k <= cfg.negative_samples; ++k) {
            int32_t tgt;
            double label;
            if (k == 0) {
              tgt = target;
              label = 1.0;
            } else {
              tgt = sample_word();
              if (tgt == target) continue;
              label = 0.0;
            }
            double f = syn0.row(center).dot(syn1.row(tgt));
            double sig = sigmoid(f);
            loss_sum -= label > 0.5 ? std::log(std::max(sig, 1e-12))
                                    : std::log(std::max(1.0 - sig, 1e-12));
            double g = (label - sig) * lr;
            neu1e += g * syn1.row(tgt).transpose();
            syn1.row(tgt) += g * syn0.row(center);
          }
          syn0.row(center) += neu1e.transpose();
          ++pairs;
        }
      }
    }
    result.epoch_loss.push_back(pairs > 0 ? loss_sum / static_cast<double>(pairs) : 0.0);
  }

  if (!syn0.allFinite()) throw std::runtime_error("training produced non-finite embeddings");
  m.vectors = std::move(syn0);
  result.matrix = std::move(m);
  return result;
}

void save_word2vec_text(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
  out << m.words.size() << ' ' << m.dim << '\n';
  char buf[64];
  for (size_t i = 0; i < m.words.size(); ++i) {
    out << m.words[i];
    for (int c = 0; c < m.dim; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", m.vectors(i, c));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

namespace {

EmbeddingMatrix load_word2vec_impl(const std::string& path, const Vocabulary* vocab,
                                   std::vector<std::string>* missing_words) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty embeddings file");
  std::istringstream header(line);
  size_t count = 0;
  int dim = 0;
  if (!(header >> count >> dim) || dim <= 0) {
    throw std::runtime_error(path + ":1: expected header '<vocab_size> <dim>'");
  }

  std::vector<std::string> words;
  std::vector<Eigen::VectorXd> rows;
  size_t lineno = 1;
  size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ++seen;
    std::istringstream row(line);
    std::string word;
    if (!(row >> word)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing word");
    }
    Eigen::VectorXd v(dim);
    for (int c = 0; c < dim; ++c) {
      if (!(row >> v[c])) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(dim) + " values for word '" + word + "'");
      }
      if (!std::isfinite(v[c])) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": non-finite value");
      }
    }
    double extra;
    if (row >> extra) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(dim) + " values for word '" + word + "'");
    }
    if (vocab && vocab->id_of(word) < 0) continue;
    words.push_back(word);
    rows.push_back(std::move(v));
  }
  if (seen != count) {
    throw std::runtime_error(path + ": header declares " + std::to_string(count) +
                             " words, file has " + std::to_string(seen));
  }

  EmbeddingMatrix m;
  m.dim = dim;
  m.vectors.resize(static_cast<Eigen::Index>(words.size()), dim);
  for (size_t i = 0; i < words.size(); ++i) {
    if (!m.index.emplace(words[i], static_cast<int32_t>(i)).second) {
      throw std::runtime_error(path + ": duplicate word '" + words[i] + "'");
    }
    m.vectors.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  m.words = std::move(words);

  if (vocab && missing_words) {
    missing_words->clear();
    for (const auto& w : vocab->words) {
      if (m.index.find(w) == m.index.end()) missing_words->push_back(w);
    }
  }
  return m;
}

}  // namespace

EmbeddingMatrix load_word2vec_text(const std::string& path) {
  return load_word2vec_impl(path, nullptr, nullptr);
}

EmbeddingMatrix load_word2vec_text(const std::string& path, const Vocabulary& vocab,
                                   std::vector<std::string>* missing_words) {
  return load_word2vec_impl(path, &vocab, missing_words);
}

TokenEmbedder::TokenEmbedder(const EmbeddingMatrix& emb, const Vocabulary& vocab) : emb_(&emb) {
  token_to_row_.resize(vocab.size(), -1);
  for (size_t i = 0; i < vocab.words.size(); ++i) {
    token_to_row_[i] = emb.row_of(vocab.words[i]);
  }
}

Eigen::MatrixXd TokenEmbedder::embed(const TokenSeq& tokens) const {
  std::vector<int32_t> rows;
  rows.reserve(tokens.size());
  for (int32_t t : tokens) {
    int32_t r = row_of(t);
    if (r >= 0) rows.push_back(r);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), emb_->dim);
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = emb_->vectors.row(rows[i]);
  }
  return out;
}

}  // namespace wecmatch
