#ifndef WECMATCH_WEC_HPP_
#define WECMATCH_WEC_HPP_

#include <Eigen/Core>
#include <string>
#include <vector>

namespace wecmatch {

// d×d matrix mapping answer-word vectors into question space.
struct TranslationMatrix {
  Eigen::MatrixXd m;

  TranslationMatrix() = default;
  explicit TranslationMatrix(Eigen::MatrixXd mat);

  int dim() const { return static_cast<int>(m.rows()); }
  static TranslationMatrix identity(int d);
};

// cos(vq, M·va); 0 when M annihilates va.
double word_correlation(const Eigen::VectorXd& vq, const Eigen::VectorXd& va,
                        const TranslationMatrix& M);

// Sentences are row matrices: one word vector per row.
// Score: mean over answer words of the best word correlation against the question.
double sentence_correlation(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                            const TranslationMatrix& M);

struct WordLink {
  int answer_pos = 0;
  int best_question_pos = 0;  // lowest index on ties
  double score = 0.0;
};

struct ScoreBreakdown {
  std::vector<WordLink> per_answer_word;
  double sentence_score = 0.0;
};

ScoreBreakdown score_breakdown(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                               const TranslationMatrix& M);

// max(0, margin - c_pos + c_neg)
double hinge_loss(double c_pos, double c_neg, double margin);

// Gradient of sentence_correlation w.r.t. M, argmax links held fixed.
Eigen::MatrixXd sentence_grad_m(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                const TranslationMatrix& M);

// Gradient of the triple's hinge loss w.r.t. M; zero when the margin is met.
Eigen::MatrixXd grad_M(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pos,
                       const Eigen::MatrixXd& neg, const TranslationMatrix& M, double margin);

struct WecModel {
  TranslationMatrix M;
  double margin = 0.1;
  std::string embed_hash;
};

void save_wec_model(const WecModel& model, const std::string& path);
WecModel load_wec_model(const std::string& path);

}  // namespace wecmatch

#endif  // WECMATCH_WEC_HPP_
