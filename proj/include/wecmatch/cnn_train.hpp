#ifndef WECMATCH_CNN_TRAIN_HPP_
#define WECMATCH_CNN_TRAIN_HPP_

#include <cstdint>
#include <vector>

#include "wecmatch/cnn.hpp"
#include "wecmatch/corpus.hpp"
#include "wecmatch/embeddings.hpp"
#include "wecmatch/eval.hpp"
#include "wecmatch/wec_train.hpp"

namespace wecmatch {

struct CnnTrainConfig {
  double margin = 1.0;  // CNN scores are unbounded, so the margin is wider
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 50;
  int patience = 5;
  double loss_stop_tol = 0.0;  // >0: stop once train loss drops below it
  uint64_t rng_seed = 1;
};

struct CnnTrainResult {
  CnnParams params;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_valid_dcg1 = -1.0;
  size_t skipped_triples = 0;
};

// Stage two: hinge training of the CNN on correlation matrices built with a
// frozen translation matrix. Input matrices are precomputed once.
CnnTrainResult train_cnn_stage(const std::vector<TrainingTriple>& triples,
                               const TokenEmbedder& embedder, const TranslationMatrix& M_fixed,
                               const std::vector<CandidateSet>& valid_sets,
                               const CnnArchitecture& arch, const CnnTrainConfig& cfg);

struct FineTuneResult {
  TranslationMatrix M;
  CnnParams params;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_valid_dcg1 = -1.0;
  size_t skipped_triples = 0;
};

// Stage three: joint training; the gradient reaches M through the CNN's
// input-matrix gradient. Embeddings stay frozen.
FineTuneResult fine_tune(const std::vector<TrainingTriple>& triples,
                         const TokenEmbedder& embedder, const TranslationMatrix& M,
                         const CnnParams& params, const std::vector<CandidateSet>& valid_sets,
                         const CnnTrainConfig& cfg);

// Scores by running the correlation matrix of (q, a) through the network.
Scorer make_cnn_scorer(const TokenEmbedder& embedder, const TranslationMatrix& M,
                       const CnnParams& params);

}  // namespace wecmatch

#endif  // WECMATCH_CNN_TRAIN_HPP_
