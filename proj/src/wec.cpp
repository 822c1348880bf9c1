#include "wecmatch/wec.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wecmatch {

TranslationMatrix::TranslationMatrix(Eigen::MatrixXd mat) : m(std::move(mat)) {
  if (m.rows() != m.cols()) {
    throw std::runtime_error("translation matrix must be square, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

TranslationMatrix TranslationMatrix::identity(int d) {
  return TranslationMatrix(Eigen::MatrixXd::Identity(d, d));
}

namespace {

void check_dims(Eigen::Index vec_dim, const TranslationMatrix& M, const char* side) {
  if (M.m.rows() != M.m.cols()) throw std::runtime_error("translation matrix must be square");
  if (vec_dim != M.m.cols()) {
    throw std::runtime_error(std::string(side) + " dimension " + std::to_string(vec_dim) +
                             " does not match translation matrix dimension " +
                             std::to_string(M.m.cols()));
  }
}

// Rows normalized to unit length; zero rows are an error (question side).
Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& q) {
  Eigen::MatrixXd out(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double n = q.row(i).norm();
    if (n == 0.0) throw std::runtime_error("zero question vector");
    out.row(i) = q.row(i) / n;
  }
  return out;
}

}  // namespace

double word_correlation(const Eigen::VectorXd& vq, const Eigen::VectorXd& va,
                        const TranslationMatrix& M) {
  check_dims(va.size(), M, "answer vector");
  if (vq.size() != M.m.rows()) {
    throw std::runtime_error("question vector dimension " + std::to_string(vq.size()) +
                             " does not match translation matrix dimension " +
                             std::to_string(M.m.rows()));
  }
  double qn = vq.norm();
  if (qn == 0.0) throw std::runtime_error("zero question vector");
  Eigen::VectorXd w = M.m * va;
  double wn = w.norm();
  if (wn == 0.0) return 0.0;
  return std::clamp(vq.dot(w) / (qn * wn), -1.0, 1.0);
}

double sentence_correlation(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                            const TranslationMatrix& M) {
  if (q.rows() == 0 || a.rows() == 0) throw std::runtime_error("no scorable tokens");
  check_dims(q.cols(), M, "question");
  check_dims(a.cols(), M, "answer");

  Eigen::MatrixXd qn = normalized_rows(q);
  Eigen::MatrixXd w = a * M.m.transpose();  // row j = (M·a_j)ᵀ
  double sum = 0.0;
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    double n = w.row(j).norm();
    if (n == 0.0) continue;  // degenerate column scores 0
    Eigen::VectorXd scores = qn * (w.row(j).transpose() / n);
    sum += std::clamp(scores.maxCoeff(), -1.0, 1.0);
  }
  return sum / static_cast<double>(a.rows());
}

ScoreBreakdown score_breakdown(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                               const TranslationMatrix& M) {
  if (q.rows() == 0 || a.rows() == 0) throw std::runtime_error("no scorable tokens");
  check_dims(q.cols(), M, "question");
  check_dims(a.cols(), M, "answer");

  Eigen::MatrixXd qn = normalized_rows(q);
  Eigen::MatrixXd w = a * M.m.transpose();

  ScoreBreakdown out;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    WordLink link;
    link.answer_pos = static_cast<int>(j);
    double n = w.row(j).norm();
    if (n > 0.0) {
      Eigen::VectorXd scores = qn * (w.row(j).transpose() / n);
      int best = 0;
      for (Eigen::Index i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = static_cast<int>(i);
      }
      link.best_question_pos = best;
      link.score = std::clamp(scores[best], -1.0, 1.0);
    }
    sum += link.score;
    out.per_answer_word.push_back(link);
  }
  out.sentence_score = sum / static_cast<double>(a.rows());
  return out;
}

double hinge_loss(double c_pos, double c_neg, double margin) {
  if (margin <= 0.0) throw std::runtime_error("margin must be > 0");
  return std::max(0.0, margin - c_pos + c_neg);
}

Eigen::MatrixXd sentence_grad_m(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                const TranslationMatrix& M) {
  if (q.rows() == 0 || a.rows() == 0) throw std::runtime_error("no scorable tokens");
  check_dims(q.cols(), M, "question");
  check_dims(a.cols(), M, "answer");

  Eigen::MatrixXd qn = normalized_rows(q);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(M.m.rows(), M.m.cols());
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    Eigen::VectorXd w = M.m * a.row(j).transpose();
    double n = w.norm();
    if (n == 0.0) continue;
    Eigen::VectorXd wn = w / n;
    Eigen::VectorXd scores = qn * wn;
    int best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[best]) best = static_cast<int>(i);
    }
    double s = scores[best];
    Eigen::VectorXd u = qn.row(best).transpose();
    grad.noalias() += ((u - s * wn) / n) * a.row(j);
  }
  return grad / static_cast<double>(a.rows());
}

Eigen::MatrixXd grad_M(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pos,
                       const Eigen::MatrixXd& neg, const TranslationMatrix& M, double margin) {
  double c_pos = sentence_correlation(q, pos, M);
  double c_neg = sentence_correlation(q, neg, M);
  if (hinge_loss(c_pos, c_neg, margin) <= 0.0) {
    return Eigen::MatrixXd::Zero(M.m.rows(), M.m.cols());
  }
  return sentence_grad_m(q, neg, M) - sentence_grad_m(q, pos, M);
}

void save_wec_model(const WecModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  int d = model.M.dim();
  out << "WEC " << d << '\n';
  char buf[64];
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", model.M.m(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.9g", model.margin);
  out << "# margin=" << buf << " embed=" << (model.embed_hash.empty() ? "none" : model.embed_hash)
      << '\n';
}

WecModel load_wec_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty model file");
  std::istringstream header(line);
  std::string magic;
  int d = 0;
  if (!(header >> magic >> d) || magic != "WEC" || d <= 0) {
    throw std::runtime_error(path + ":1: expected header 'WEC <d>'");
  }

  WecModel model;
  model.M.m.resize(d, d);
  for (int i = 0; i < d; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(path + ": expected " + std::to_string(d) + " matrix rows");
    }
    std::istringstream row(line);
    for (int j = 0; j < d; ++j) {
      if (!(row >> model.M.m(i, j))) {
        throw std::runtime_error(path + ":" + std::to_string(i + 2) + ": expected " +
                                 std::to_string(d) + " values");
      }
    }
  }

  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') continue;
    std::istringstream meta(line.substr(1));
    std::string kv;
    while (meta >> kv) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos) continue;
      std::string key = kv.substr(0, eq);
      std::string value = kv.substr(eq + 1);
      if (key == "margin") {
        model.margin = std::stod(value);
      } else if (key == "embed") {
        model.embed_hash = value == "none" ? "" : value;
      }
    }
  }
  return model;
}

}  // namespace wecmatch
