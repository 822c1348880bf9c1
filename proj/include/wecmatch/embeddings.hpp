#ifndef WECMATCH_EMBEDDINGS_HPP_
#define WECMATCH_EMBEDDINGS_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wecmatch/corpus.hpp"

namespace wecmatch {

struct EmbeddingMatrix {
  int dim = 0;
  std::vector<std::string> words;
  std::unordered_map<std::string, int32_t> index;
  Eigen::MatrixXd vectors;  // one row per word

  int32_t row_of(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? -1 : it->second;
  }
  std::optional<Eigen::VectorXd> lookup(const std::string& word) const {
    int32_t r = row_of(word);
    if (r < 0) return std::nullopt;
    return std::optional<Eigen::VectorXd>(vectors.row(r).transpose());
  }
  size_t size() const { return words.size(); }
};

struct SkipGramConfig {
  int dim = 500;
  int window = 10;
  int negative_samples = 5;
  int epochs = 5;
  double initial_lr = 0.025;
  double subsample_threshold = 1e-4;  // <= 0 disables subsampling
  int min_count = 5;
  uint64_t rng_seed = 1;
};

struct SkipGramResult {
  EmbeddingMatrix matrix;
  std::vector<double> epoch_loss;  // mean loss per (center, context) pair
};

// Negative-sampling skip-gram, single worker, reproducible per seed.
SkipGramResult train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                              const SkipGramConfig& cfg);

void save_word2vec_text(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix load_word2vec_text(const std::string& path);
// Keeps only words present in vocab; reports vocabulary words absent from the file.
EmbeddingMatrix load_word2vec_text(const std::string& path, const Vocabulary& vocab,
                                   std::vector<std::string>* missing_words);

// Bridges corpus token ids to embedding rows; tokens without a vector are skipped.
class TokenEmbedder {
 public:
  TokenEmbedder(const EmbeddingMatrix& emb, const Vocabulary& vocab);

  int32_t row_of(int32_t token_id) const {
    return token_id >= 0 && static_cast<size_t>(token_id) < token_to_row_.size()
               ? token_to_row_[token_id]
               : -1;
  }
  // k×d matrix holding the embeddings of the embeddable tokens, in order
  Eigen::MatrixXd embed(const TokenSeq& tokens) const;
  const EmbeddingMatrix& embeddings() const { return *emb_; }

 private:
  const EmbeddingMatrix* emb_;
  std::vector<int32_t> token_to_row_;
};

}  // namespace wecmatch

#endif  // WECMATCH_EMBEDDINGS_HPP_
