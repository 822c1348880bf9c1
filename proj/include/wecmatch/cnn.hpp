#ifndef WECMATCH_CNN_HPP_
#define WECMATCH_CNN_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "wecmatch/wec.hpp"

namespace wecmatch {

struct InputMatrixSpec {
  int n_f = 50;   // rows, question axis
  int m_f = 100;  // cols, answer axis
};

// Fills the fixed frame by cyclic tiling: S[i][j] = cos(q[i mod |q|], a[j mod |a|]).
Eigen::MatrixXd build_similarity_matrix(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                        const InputMatrixSpec& spec);
// Same tiling with C[i][j] = cos(q_i, M a_j); M=I reduces to the similarity matrix.
Eigen::MatrixXd build_correlation_matrix(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                         const TranslationMatrix& M, const InputMatrixSpec& spec);

// conv(kernel, valid) -> tanh -> 2x2 max pool, twice, then a tanh
// fully-connected layer and one linear output unit
struct CnnArchitecture {
  int n_f = 50;
  int m_f = 100;
  int kernel = 5;
  int c1_maps = 20;
  int c2_maps = 50;
  int fc_units = 500;
};

struct LayerGeometry {
  int c1_h = 0, c1_w = 0;
  int p1_h = 0, p1_w = 0;
  int c2_h = 0, c2_w = 0;
  int p2_h = 0, p2_w = 0;
  int flat = 0;  // p2_h * p2_w * c2_maps
};

// Throws when any layer collapses to zero size for these dimensions.
LayerGeometry derive_geometry(const CnnArchitecture& arch);

struct CnnParams {
  CnnArchitecture arch;
  std::vector<Eigen::MatrixXd> c1;               // kernel x kernel, one per map
  Eigen::VectorXd c1_bias;
  std::vector<std::vector<Eigen::MatrixXd>> c2;  // [map][input channel]
  Eigen::VectorXd c2_bias;
  Eigen::MatrixXd f;                             // fc_units x flat
  Eigen::VectorXd f_bias;
  Eigen::VectorXd out;                           // fc_units
  double out_bias = 0.0;
};

// Glorot-uniform weights, zero biases.
CnnParams init_cnn_params(const CnnArchitecture& arch, uint64_t seed);

struct CnnCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> c1_act, p1;
  std::vector<Eigen::MatrixXi> p1_argmax;  // row-major index into the conv map
  std::vector<Eigen::MatrixXd> c2_act, p2;
  std::vector<Eigen::MatrixXi> p2_argmax;
  Eigen::VectorXd p2_flat;
  Eigen::VectorXd f_act;
  double score = 0.0;
};

double cnn_forward(const Eigen::MatrixXd& input, const CnnParams& params,
                   CnnCache* cache = nullptr);

struct CnnGradients {
  std::vector<Eigen::MatrixXd> c1;
  Eigen::VectorXd c1_bias;
  std::vector<std::vector<Eigen::MatrixXd>> c2;
  Eigen::VectorXd c2_bias;
  Eigen::MatrixXd f;
  Eigen::VectorXd f_bias;
  Eigen::VectorXd out;
  double out_bias = 0.0;
  Eigen::MatrixXd input;  // n_f x m_f
};

// Exact gradients of (upstream * score); pooling routes to the argmax cell.
CnnGradients cnn_backward(const CnnParams& params, const CnnCache& cache, double upstream);

// Gradient of a scalar loss w.r.t. M given its gradient w.r.t. the
// correlation matrix built from (q, a, M).
Eigen::MatrixXd correlation_matrix_grad_m(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                          const TranslationMatrix& M,
                                          const Eigen::MatrixXd& d_input);

void save_cnn_model(const CnnParams& params, const std::string& path);
CnnParams load_cnn_model(const std::string& path);

}  // namespace wecmatch

#endif  // WECMATCH_CNN_HPP_
