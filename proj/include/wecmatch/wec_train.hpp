#ifndef WECMATCH_WEC_TRAIN_HPP_
#define WECMATCH_WEC_TRAIN_HPP_

#include <cstdint>
#include <vector>

#include "wecmatch/corpus.hpp"
#include "wecmatch/embeddings.hpp"
#include "wecmatch/eval.hpp"
#include "wecmatch/wec.hpp"

namespace wecmatch {

struct WecTrainConfig {
  double margin = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 50;
  int patience = 5;             // epochs without validation improvement before stopping
  double init_noise_sigma = 0.01;
  uint64_t rng_seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_dcg1 = -1.0;  // -1 when no validation sets were given
};

struct WecTrainResult {
  TranslationMatrix M;
  std::vector<EpochLog> log;
  int best_epoch = -1;  // -1 when training never ran or had no validation
  double best_valid_dcg1 = -1.0;
  size_t skipped_triples = 0;  // triples with an unembeddable side
};

// Minimizes the mean hinge loss over triples with Adam, starting from a
// noisy identity. With validation sets, keeps the matrix from the epoch
// with the best DCG@1 and stops early once patience runs out.
WecTrainResult train_wec(const std::vector<TrainingTriple>& triples,
                         const TokenEmbedder& embedder,
                         const std::vector<CandidateSet>& valid_sets,
                         const WecTrainConfig& cfg);

}  // namespace wecmatch

#endif  // WECMATCH_WEC_TRAIN_HPP_
