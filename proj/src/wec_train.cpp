#include "wecmatch/wec_train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "wecmatch/rng.hpp"

namespace wecmatch {

namespace {

struct EmbeddedTriple {
  Eigen::MatrixXd question;
  Eigen::MatrixXd pos;
  Eigen::MatrixXd neg;
};

void validate(const WecTrainConfig& cfg) {
  if (cfg.margin <= 0.0) throw std::invalid_argument("margin must be positive");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
  if (cfg.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (cfg.init_noise_sigma < 0.0) throw std::invalid_argument("init_noise_sigma must be >= 0");
}

TranslationMatrix initial_matrix(int dim, const WecTrainConfig& cfg) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
  if (cfg.init_noise_sigma > 0.0) {
    Rng rng(substream(cfg.rng_seed, "wec-init"));
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) m(i, j) += cfg.init_noise_sigma * rng.normal();
    }
  }
  return TranslationMatrix(m);
}

}  // namespace

WecTrainResult train_wec(const std::vector<TrainingTriple>& triples,
                         const TokenEmbedder& embedder,
                         const std::vector<CandidateSet>& valid_sets,
                         const WecTrainConfig& cfg) {
  validate(cfg);
  if (triples.empty()) throw std::invalid_argument("no training triples");

  int dim = embedder.embeddings().dim;
  WecTrainResult result;

  std::vector<EmbeddedTriple> data;
  data.reserve(triples.size());
  for (const auto& t : triples) {
    EmbeddedTriple e;
    e.question = embedder.embed(t.question);
    e.pos = embedder.embed(t.pos_answer);
    e.neg = embedder.embed(t.neg_answer);
    if (e.question.rows() == 0 || e.pos.rows() == 0 || e.neg.rows() == 0) {
      ++result.skipped_triples;
      continue;
    }
    data.push_back(std::move(e));
  }
  if (data.empty()) throw std::runtime_error("no trainable triples: every triple has a side without embeddings");

  TranslationMatrix M = initial_matrix(dim, cfg);
  result.M = M;
  if (cfg.max_epochs == 0) return result;

  Eigen::MatrixXd adam_m = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd adam_v = Eigen::MatrixXd::Zero(dim, dim);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step = 0;

  Rng order_rng(substream(cfg.rng_seed, "wec-order"));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TranslationMatrix best_M = M;
  int bad_epochs = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(dim, dim);
      for (size_t k = start; k < end; ++k) {
        const EmbeddedTriple& t = data[order[k]];
        double c_pos = sentence_correlation(t.question, t.pos, M);
        double c_neg = sentence_correlation(t.question, t.neg, M);
        double loss = hinge_loss(c_pos, c_neg, cfg.margin);
        epoch_loss += loss;
        if (loss > 0.0) {
          grad += sentence_grad_m(t.question, t.neg, M) - sentence_grad_m(t.question, t.pos, M);
        }
      }
      grad /= static_cast<double>(end - start);

      ++step;
      adam_m = beta1 * adam_m + (1.0 - beta1) * grad;
      adam_v = beta2 * adam_v + (1.0 - beta2) * grad.cwiseProduct(grad).eval();
      double corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      double corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      Eigen::MatrixXd denom = (adam_v / corr2).cwiseSqrt().array() + eps;
      M.m -= cfg.learning_rate * ((adam_m / corr1).cwiseQuotient(denom));
    }

    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss) || !M.m.allFinite()) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
    }

    EpochLog log_row;
    log_row.epoch = epoch;
    log_row.train_loss = epoch_loss;

    if (!valid_sets.empty()) {
      EvalReport report = evaluate(make_wec_scorer(embedder, M), valid_sets);
      log_row.valid_dcg1 = report.dcg1;
      if (report.dcg1 > result.best_valid_dcg1) {
        result.best_valid_dcg1 = report.dcg1;
        result.best_epoch = epoch;
        best_M = M;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
      }
      result.log.push_back(log_row);
      if (bad_epochs >= cfg.patience) break;
    } else {
      result.log.push_back(log_row);
    }
  }

  if (!valid_sets.empty()) {
    result.M = best_M;
  } else {
    result.M = M;
    result.best_epoch = static_cast<int>(result.log.size()) - 1;
  }
  return result;
}

}  // namespace wecmatch
