#include "wecmatch/cnn_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "wecmatch/rng.hpp"

namespace wecmatch {

namespace {

void validate(const CnnTrainConfig& cfg) {
  if (cfg.margin <= 0.0) throw std::invalid_argument("margin must be positive");
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
  if (cfg.patience < 1) throw std::invalid_argument("patience must be >= 1");
}

std::vector<double*> param_pointers(CnnParams& p) {
  std::vector<double*> ptrs;
  for (auto& kernel : p.c1) {
    for (Eigen::Index i = 0; i < kernel.size(); ++i) ptrs.push_back(kernel.data() + i);
  }
  for (Eigen::Index i = 0; i < p.c1_bias.size(); ++i) ptrs.push_back(p.c1_bias.data() + i);
  for (auto& per_channel : p.c2) {
    for (auto& kernel : per_channel) {
      for (Eigen::Index i = 0; i < kernel.size(); ++i) ptrs.push_back(kernel.data() + i);
    }
  }
  for (Eigen::Index i = 0; i < p.c2_bias.size(); ++i) ptrs.push_back(p.c2_bias.data() + i);
  for (Eigen::Index i = 0; i < p.f.size(); ++i) ptrs.push_back(p.f.data() + i);
  for (Eigen::Index i = 0; i < p.f_bias.size(); ++i) ptrs.push_back(p.f_bias.data() + i);
  for (Eigen::Index i = 0; i < p.out.size(); ++i) ptrs.push_back(p.out.data() + i);
  ptrs.push_back(&p.out_bias);
  return ptrs;
}

void accumulate(CnnGradients& into, const CnnGradients& from) {
  for (size_t m = 0; m < into.c1.size(); ++m) into.c1[m] += from.c1[m];
  into.c1_bias += from.c1_bias;
  for (size_t m = 0; m < into.c2.size(); ++m) {
    for (size_t ch = 0; ch < into.c2[m].size(); ++ch) into.c2[m][ch] += from.c2[m][ch];
  }
  into.c2_bias += from.c2_bias;
  into.f += from.f;
  into.f_bias += from.f_bias;
  into.out += from.out;
  into.out_bias += from.out_bias;
}

CnnGradients zero_gradients(const CnnParams& p) {
  const CnnArchitecture& arch = p.arch;
  int k = arch.kernel;
  CnnGradients g;
  g.c1.assign(static_cast<size_t>(arch.c1_maps), Eigen::MatrixXd::Zero(k, k));
  g.c1_bias = Eigen::VectorXd::Zero(arch.c1_maps);
  g.c2.assign(static_cast<size_t>(arch.c2_maps),
              std::vector<Eigen::MatrixXd>(static_cast<size_t>(arch.c1_maps),
                                           Eigen::MatrixXd::Zero(k, k)));
  g.c2_bias = Eigen::VectorXd::Zero(arch.c2_maps);
  g.f = Eigen::MatrixXd::Zero(p.f.rows(), p.f.cols());
  g.f_bias = Eigen::VectorXd::Zero(p.f_bias.size());
  g.out = Eigen::VectorXd::Zero(p.out.size());
  g.out_bias = 0.0;
  g.input = Eigen::MatrixXd::Zero(arch.n_f, arch.m_f);
  return g;
}

std::vector<double*> gradient_pointers(CnnGradients& g) {
  std::vector<double*> ptrs;
  for (auto& kernel : g.c1) {
    for (Eigen::Index i = 0; i < kernel.size(); ++i) ptrs.push_back(kernel.data() + i);
  }
  for (Eigen::Index i = 0; i < g.c1_bias.size(); ++i) ptrs.push_back(g.c1_bias.data() + i);
  for (auto& per_channel : g.c2) {
    for (auto& kernel : per_channel) {
      for (Eigen::Index i = 0; i < kernel.size(); ++i) ptrs.push_back(kernel.data() + i);
    }
  }
  for (Eigen::Index i = 0; i < g.c2_bias.size(); ++i) ptrs.push_back(g.c2_bias.data() + i);
  for (Eigen::Index i = 0; i < g.f.size(); ++i) ptrs.push_back(g.f.data() + i);
  for (Eigen::Index i = 0; i < g.f_bias.size(); ++i) ptrs.push_back(g.f_bias.data() + i);
  for (Eigen::Index i = 0; i < g.out.size(); ++i) ptrs.push_back(g.out.data() + i);
  ptrs.push_back(&g.out_bias);
  return ptrs;
}

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int64_t step = 0;

  explicit AdamState(size_t n)
      : m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

  void apply(std::vector<double*>& params, const std::vector<double*>& grads, double lr) {
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++step;
    double corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    double corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (size_t i = 0; i < params.size(); ++i) {
      double g = *grads[i];
      m(static_cast<Eigen::Index>(i)) = beta1 * m(static_cast<Eigen::Index>(i)) + (1 - beta1) * g;
      v(static_cast<Eigen::Index>(i)) =
          beta2 * v(static_cast<Eigen::Index>(i)) + (1 - beta2) * g * g;
      double mh = m(static_cast<Eigen::Index>(i)) / corr1;
      double vh = v(static_cast<Eigen::Index>(i)) / corr2;
      *params[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

bool params_finite(const CnnParams& p) {
  for (const auto& kernel : p.c1) {
    if (!kernel.allFinite()) return false;
  }
  for (const auto& per_channel : p.c2) {
    for (const auto& kernel : per_channel) {
      if (!kernel.allFinite()) return false;
    }
  }
  return p.c1_bias.allFinite() && p.c2_bias.allFinite() && p.f.allFinite() &&
         p.f_bias.allFinite() && p.out.allFinite() && std::isfinite(p.out_bias);
}

struct EmbeddedTriple {
  Eigen::MatrixXd question;
  Eigen::MatrixXd pos;
  Eigen::MatrixXd neg;
};

std::vector<EmbeddedTriple> embed_triples(const std::vector<TrainingTriple>& triples,
                                          const TokenEmbedder& embedder, size_t* skipped) {
  std::vector<EmbeddedTriple> data;
  data.reserve(triples.size());
  for (const auto& t : triples) {
    EmbeddedTriple e;
    e.question = embedder.embed(t.question);
    e.pos = embedder.embed(t.pos_answer);
    e.neg = embedder.embed(t.neg_answer);
    if (e.question.rows() == 0 || e.pos.rows() == 0 || e.neg.rows() == 0) {
      ++*skipped;
      continue;
    }
    data.push_back(std::move(e));
  }
  return data;
}

struct EmbeddedCandidateSet {
  std::vector<Eigen::MatrixXd> answers;  // empty matrix marks an unscorable one
  Eigen::MatrixXd question;
  std::vector<int> rels;
  bool scorable_question = false;
};

std::vector<EmbeddedCandidateSet> embed_sets(const std::vector<CandidateSet>& sets,
                                             const TokenEmbedder& embedder) {
  std::vector<EmbeddedCandidateSet> out;
  out.reserve(sets.size());
  for (const auto& set : sets) {
    EmbeddedCandidateSet e;
    e.question = embedder.embed(set.question);
    e.scorable_question = e.question.rows() > 0;
    for (const auto& cand : set.candidates) {
      e.answers.push_back(embedder.embed(cand.tokens));
      e.rels.push_back(cand.rel);
    }
    out.push_back(std::move(e));
  }
  return out;
}

// mean DCG@1 with stable-descending ranking, mirroring evaluate()
template <typename ScoreFn>
double dcg1_over(const std::vector<EmbeddedCandidateSet>& sets, ScoreFn&& score_one) {
  if (sets.empty()) return -1.0;
  double total = 0.0;
  for (const auto& set : sets) {
    size_t n = set.answers.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::vector<double> scores(n);
    for (size_t i = 0; i < n; ++i) {
      scores[i] = (!set.scorable_question || set.answers[i].rows() == 0)
                      ? kUnscorable
                      : score_one(set.question, set.answers[i]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t x, size_t y) { return scores[x] > scores[y]; });
    total += set.rels[order.front()] == 1 ? 1.0 : 0.0;
  }
  return total / static_cast<double>(sets.size());
}

}  // namespace

CnnTrainResult train_cnn_stage(const std::vector<TrainingTriple>& triples,
                               const TokenEmbedder& embedder, const TranslationMatrix& M_fixed,
                               const std::vector<CandidateSet>& valid_sets,
                               const CnnArchitecture& arch, const CnnTrainConfig& cfg) {
  validate(cfg);
  if (triples.empty()) throw std::invalid_argument("no training triples");

  CnnTrainResult result;
  InputMatrixSpec spec{arch.n_f, arch.m_f};

  std::vector<EmbeddedTriple> data = embed_triples(triples, embedder, &result.skipped_triples);
  if (data.empty()) {
    throw std::runtime_error("no trainable triples: every triple has a side without embeddings");
  }

  // the matrix is frozen for this stage, so inputs never change
  std::vector<Eigen::MatrixXd> pos_inputs, neg_inputs;
  pos_inputs.reserve(data.size());
  neg_inputs.reserve(data.size());
  for (const auto& t : data) {
    pos_inputs.push_back(build_correlation_matrix(t.question, t.pos, M_fixed, spec));
    neg_inputs.push_back(build_correlation_matrix(t.question, t.neg, M_fixed, spec));
  }

  std::vector<EmbeddedCandidateSet> valid = embed_sets(valid_sets, embedder);
  std::vector<std::vector<Eigen::MatrixXd>> valid_inputs(valid.size());
  for (size_t s = 0; s < valid.size(); ++s) {
    for (const auto& answer : valid[s].answers) {
      valid_inputs[s].push_back(
          (valid[s].scorable_question && answer.rows() > 0)
              ? build_correlation_matrix(valid[s].question, answer, M_fixed, spec)
              : Eigen::MatrixXd());
    }
  }

  CnnParams params = init_cnn_params(arch, cfg.rng_seed);
  result.params = params;
  if (cfg.max_epochs == 0) return result;

  std::vector<double*> ptrs = param_pointers(params);
  AdamState adam(ptrs.size());

  Rng order_rng(substream(cfg.rng_seed, "cnn-order"));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  CnnParams best_params = params;
  int bad_epochs = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      CnnGradients batch = zero_gradients(params);
      for (size_t k = start; k < end; ++k) {
        size_t idx = order[k];
        CnnCache pos_cache, neg_cache;
        double s_pos = cnn_forward(pos_inputs[idx], params, &pos_cache);
        double s_neg = cnn_forward(neg_inputs[idx], params, &neg_cache);
        double loss = hinge_loss(s_pos, s_neg, cfg.margin);
        epoch_loss += loss;
        if (loss > 0.0) {
          accumulate(batch, cnn_backward(params, neg_cache, 1.0));
          accumulate(batch, cnn_backward(params, pos_cache, -1.0));
        }
      }
      double inv = 1.0 / static_cast<double>(end - start);
      std::vector<double*> grad_ptrs = gradient_pointers(batch);
      for (double* g : grad_ptrs) *g *= inv;
      adam.apply(ptrs, grad_ptrs, cfg.learning_rate);
    }

    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss) || !params_finite(params)) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
    }

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = epoch_loss;

    if (!valid.empty()) {
      double dcg1 = 0.0;
      size_t s = 0;
      double total = 0.0;
      for (const auto& set : valid) {
        size_t n = set.answers.size();
        std::vector<size_t> rank(n);
        std::iota(rank.begin(), rank.end(), size_t{0});
        std::vector<double> scores(n);
        for (size_t i = 0; i < n; ++i) {
          scores[i] = valid_inputs[s][i].size() == 0 ? kUnscorable
                                                     : cnn_forward(valid_inputs[s][i], params);
        }
        std::stable_sort(rank.begin(), rank.end(),
                         [&](size_t x, size_t y) { return scores[x] > scores[y]; });
        total += set.rels[rank.front()] == 1 ? 1.0 : 0.0;
        ++s;
      }
      dcg1 = total / static_cast<double>(valid.size());
      row.valid_dcg1 = dcg1;
      if (dcg1 > result.best_valid_dcg1) {
        result.best_valid_dcg1 = dcg1;
        result.best_epoch = epoch;
        best_params = params;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
      }
      result.log.push_back(row);
      if (cfg.loss_stop_tol > 0.0 && epoch_loss < cfg.loss_stop_tol) break;
      if (bad_epochs >= cfg.patience) break;
    } else {
      result.log.push_back(row);
      if (cfg.loss_stop_tol > 0.0 && epoch_loss < cfg.loss_stop_tol) break;
    }
  }

  if (!valid.empty()) {
    result.params = best_params;
  } else {
    result.params = params;
    result.best_epoch = static_cast<int>(result.log.size()) - 1;
  }
  return result;
}

FineTuneResult fine_tune(const std::vector<TrainingTriple>& triples,
                         const TokenEmbedder& embedder, const TranslationMatrix& M,
                         const CnnParams& params, const std::vector<CandidateSet>& valid_sets,
                         const CnnTrainConfig& cfg) {
  validate(cfg);
  if (triples.empty()) throw std::invalid_argument("no training triples");
  if (M.dim() != embedder.embeddings().dim) {
    throw std::invalid_argument("translation matrix does not match the embedding dimension");
  }

  FineTuneResult result;
  const CnnArchitecture& arch = params.arch;
  InputMatrixSpec spec{arch.n_f, arch.m_f};

  std::vector<EmbeddedTriple> data = embed_triples(triples, embedder, &result.skipped_triples);
  if (data.empty()) {
    throw std::runtime_error("no trainable triples: every triple has a side without embeddings");
  }
  std::vector<EmbeddedCandidateSet> valid = embed_sets(valid_sets, embedder);

  CnnParams net = params;
  TranslationMatrix matrix = M;

  std::vector<double*> ptrs = param_pointers(net);
  for (Eigen::Index i = 0; i < matrix.m.size(); ++i) ptrs.push_back(matrix.m.data() + i);
  AdamState adam(ptrs.size());

  Rng order_rng(substream(cfg.rng_seed, "fine-tune-order"));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  CnnParams best_net = net;
  TranslationMatrix best_matrix = matrix;
  int bad_epochs = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      CnnGradients batch = zero_gradients(net);
      Eigen::MatrixXd batch_m = Eigen::MatrixXd::Zero(matrix.dim(), matrix.dim());
      for (size_t k = start; k < end; ++k) {
        const EmbeddedTriple& t = data[order[k]];
        Eigen::MatrixXd pos_input = build_correlation_matrix(t.question, t.pos, matrix, spec);
        Eigen::MatrixXd neg_input = build_correlation_matrix(t.question, t.neg, matrix, spec);
        CnnCache pos_cache, neg_cache;
        double s_pos = cnn_forward(pos_input, net, &pos_cache);
        double s_neg = cnn_forward(neg_input, net, &neg_cache);
        double loss = hinge_loss(s_pos, s_neg, cfg.margin);
        epoch_loss += loss;
        if (loss > 0.0) {
          CnnGradients d_neg = cnn_backward(net, neg_cache, 1.0);
          CnnGradients d_pos = cnn_backward(net, pos_cache, -1.0);
          accumulate(batch, d_neg);
          accumulate(batch, d_pos);
          batch_m += correlation_matrix_grad_m(t.question, t.neg, matrix, d_neg.input);
          batch_m += correlation_matrix_grad_m(t.question, t.pos, matrix, d_pos.input);
        }
      }
      double inv = 1.0 / static_cast<double>(end - start);
      batch_m *= inv;
      std::vector<double*> grad_ptrs = gradient_pointers(batch);
      for (double* g : grad_ptrs) *g *= inv;
      for (Eigen::Index i = 0; i < batch_m.size(); ++i) grad_ptrs.push_back(batch_m.data() + i);
      adam.apply(ptrs, grad_ptrs, cfg.learning_rate);
    }

    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss) || !params_finite(net) || !matrix.m.allFinite()) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
    }

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = epoch_loss;

    if (!valid.empty()) {
      double dcg1 = dcg1_over(valid, [&](const Eigen::MatrixXd& q, const Eigen::MatrixXd& a) {
        return cnn_forward(build_correlation_matrix(q, a, matrix, spec), net);
      });
      row.valid_dcg1 = dcg1;
      if (dcg1 > result.best_valid_dcg1) {
        result.best_valid_dcg1 = dcg1;
        result.best_epoch = epoch;
        best_net = net;
        best_matrix = matrix;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
      }
      result.log.push_back(row);
      if (cfg.loss_stop_tol > 0.0 && epoch_loss < cfg.loss_stop_tol) break;
      if (bad_epochs >= cfg.patience) break;
    } else {
      result.log.push_back(row);
      if (cfg.loss_stop_tol > 0.0 && epoch_loss < cfg.loss_stop_tol) break;
    }
  }

  if (!valid.empty()) {
    result.params = best_net;
    result.M = best_matrix;
  } else {
    result.params = net;
    result.M = matrix;
    result.best_epoch = static_cast<int>(result.log.size()) - 1;
  }
  return result;
}

Scorer make_cnn_scorer(const TokenEmbedder& embedder, const TranslationMatrix& M,
                       const CnnParams& params) {
  InputMatrixSpec spec{params.arch.n_f, params.arch.m_f};
  return [embedder, M, params, spec](const TokenSeq& question, const TokenSeq& answer) {
    Eigen::MatrixXd q = embedder.embed(question);
    Eigen::MatrixXd a = embedder.embed(answer);
    if (q.rows() == 0 || a.rows() == 0) return kUnscorable;
    return cnn_forward(build_correlation_matrix(q, a, M, spec), params);
  };
}

}  // namespace wecmatch
