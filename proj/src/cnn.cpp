#include "wecmatch/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wecmatch/rng.hpp"

namespace wecmatch {

namespace {

constexpr double kTinyNorm = 1e-300;

void check_frame(const InputMatrixSpec& spec) {
  if (spec.n_f < 1 || spec.m_f < 1) throw std::invalid_argument("input frame must be positive");
}

// rows of q normalized; entries cos(q_i, w_j) with zero w rows scoring 0
Eigen::MatrixXd tiled_cosine(const Eigen::MatrixXd& q, const Eigen::MatrixXd& w,
                             const InputMatrixSpec& spec) {
  check_frame(spec);
  if (q.rows() == 0) throw std::invalid_argument("empty question");
  if (w.rows() == 0) throw std::invalid_argument("empty answer");
  if (q.rows() > spec.n_f) {
    throw std::invalid_argument("question has " + std::to_string(q.rows()) +
                                " words but the frame has only " + std::to_string(spec.n_f) +
                                " rows");
  }
  if (w.rows() > spec.m_f) {
    throw std::invalid_argument("answer has " + std::to_string(w.rows()) +
                                " words but the frame has only " + std::to_string(spec.m_f) +
                                " columns");
  }

  Eigen::MatrixXd base(q.rows(), w.rows());
  Eigen::MatrixXd qn(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double n = q.row(i).norm();
    if (n < kTinyNorm) throw std::invalid_argument("zero question vector");
    qn.row(i) = q.row(i) / n;
  }
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    double n = w.row(j).norm();
    if (n < kTinyNorm) {
      base.col(j).setZero();
    } else {
      base.col(j) = (qn * (w.row(j).transpose() / n)).cwiseMax(-1.0).cwiseMin(1.0);
    }
  }

  Eigen::MatrixXd out(spec.n_f, spec.m_f);
  for (int i = 0; i < spec.n_f; ++i) {
    for (int j = 0; j < spec.m_f; ++j) {
      out(i, j) = base(i % q.rows(), j % w.rows());
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd build_similarity_matrix(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                        const InputMatrixSpec& spec) {
  if (q.rows() > 0 && a.rows() > 0 && q.cols() != a.cols()) {
    throw std::invalid_argument("question and answer dimensions differ");
  }
  return tiled_cosine(q, a, spec);
}

Eigen::MatrixXd build_correlation_matrix(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                         const TranslationMatrix& M, const InputMatrixSpec& spec) {
  if (q.cols() != M.dim() || (a.rows() > 0 && a.cols() != M.dim())) {
    throw std::invalid_argument("embedding dimension does not match the matrix");
  }
  if (a.rows() == 0) throw std::invalid_argument("empty answer");
  return tiled_cosine(q, a * M.m.transpose(), spec);
}

Eigen::MatrixXd correlation_matrix_grad_m(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a,
                                          const TranslationMatrix& M,
                                          const Eigen::MatrixXd& d_input) {
  if (q.rows() == 0 || a.rows() == 0) throw std::invalid_argument("empty sentence");
  if (q.cols() != M.dim() || a.cols() != M.dim()) {
    throw std::invalid_argument("embedding dimension does not match the matrix");
  }

  // collapse the cyclic tiling: every frame cell maps back to one word pair
  Eigen::MatrixXd folded = Eigen::MatrixXd::Zero(q.rows(), a.rows());
  for (Eigen::Index i = 0; i < d_input.rows(); ++i) {
    for (Eigen::Index j = 0; j < d_input.cols(); ++j) {
      folded(i % q.rows(), j % a.rows()) += d_input(i, j);
    }
  }

  Eigen::MatrixXd w = a * M.m.transpose();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(M.dim(), M.dim());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double qn = q.row(i).norm();
    if (qn < kTinyNorm) throw std::invalid_argument("zero question vector");
    Eigen::VectorXd u = q.row(i).transpose() / qn;
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
      double coeff = folded(i, j);
      if (coeff == 0.0) continue;
      double wn = w.row(j).norm();
      if (wn < kTinyNorm) continue;  // the entry is constant 0 there
      Eigen::VectorXd wh = w.row(j).transpose() / wn;
      double s = u.dot(wh);
      grad.noalias() += coeff * (((u - s * wh) / wn) * a.row(j));
    }
  }
  return grad;
}

LayerGeometry derive_geometry(const CnnArchitecture& arch) {
  if (arch.n_f < 1 || arch.m_f < 1) throw std::invalid_argument("input frame must be positive");
  if (arch.kernel < 1) throw std::invalid_argument("kernel must be positive");
  if (arch.c1_maps < 1 || arch.c2_maps < 1 || arch.fc_units < 1) {
    throw std::invalid_argument("layer sizes must be positive");
  }

  LayerGeometry g;
  g.c1_h = arch.n_f - arch.kernel + 1;
  g.c1_w = arch.m_f - arch.kernel + 1;
  if (g.c1_h < 1 || g.c1_w < 1) {
    throw std::invalid_argument("C1 collapses: " + std::to_string(arch.n_f) + "x" +
                                std::to_string(arch.m_f) + " input cannot fit a " +
                                std::to_string(arch.kernel) + "-wide kernel");
  }
  g.p1_h = g.c1_h / 2;
  g.p1_w = g.c1_w / 2;
  if (g.p1_h < 1 || g.p1_w < 1) {
    throw std::invalid_argument("P1 collapses: C1 output " + std::to_string(g.c1_h) + "x" +
                                std::to_string(g.c1_w) + " is too small to pool");
  }
  g.c2_h = g.p1_h - arch.kernel + 1;
  g.c2_w = g.p1_w - arch.kernel + 1;
  if (g.c2_h < 1 || g.c2_w < 1) {
    throw std::invalid_argument("C2 collapses: P1 output " + std::to_string(g.p1_h) + "x" +
                                std::to_string(g.p1_w) + " cannot fit a " +
                                std::to_string(arch.kernel) + "-wide kernel");
  }
  g.p2_h = g.c2_h / 2;
  g.p2_w = g.c2_w / 2;
  if (g.p2_h < 1 || g.p2_w < 1) {
    throw std::invalid_argument("P2 collapses: C2 output " + std::to_string(g.c2_h) + "x" +
                                std::to_string(g.c2_w) + " is too small to pool");
  }
  g.flat = g.p2_h * g.p2_w * arch.c2_maps;
  return g;
}

CnnParams init_cnn_params(const CnnArchitecture& arch, uint64_t seed) {
  LayerGeometry g = derive_geometry(arch);
  Rng rng(substream(seed, "cnn-init"));
  int k = arch.kernel;

  CnnParams p;
  p.arch = arch;
  double l1 = std::sqrt(6.0 / (k * k + arch.c1_maps * k * k));
  p.c1.resize(static_cast<size_t>(arch.c1_maps));
  for (auto& kernel : p.c1) {
    kernel.resize(k, k);
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < k; ++c) kernel(r, c) = rng.uniform(-l1, l1);
    }
  }
  p.c1_bias = Eigen::VectorXd::Zero(arch.c1_maps);

  double l2 = std::sqrt(6.0 / (arch.c1_maps * k * k + arch.c2_maps * k * k));
  p.c2.resize(static_cast<size_t>(arch.c2_maps));
  for (auto& per_channel : p.c2) {
    per_channel.resize(static_cast<size_t>(arch.c1_maps));
    for (auto& kernel : per_channel) {
      kernel.resize(k, k);
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c) kernel(r, c) = rng.uniform(-l2, l2);
      }
    }
  }
  p.c2_bias = Eigen::VectorXd::Zero(arch.c2_maps);

  double lf = std::sqrt(6.0 / (g.flat + arch.fc_units));
  p.f.resize(arch.fc_units, g.flat);
  for (int r = 0; r < arch.fc_units; ++r) {
    for (int c = 0; c < g.flat; ++c) p.f(r, c) = rng.uniform(-lf, lf);
  }
  p.f_bias = Eigen::VectorXd::Zero(arch.fc_units);

  double lo = std::sqrt(6.0 / (arch.fc_units + 1));
  p.out.resize(arch.fc_units);
  for (int i = 0; i < arch.fc_units; ++i) p.out(i) = rng.uniform(-lo, lo);
  p.out_bias = 0.0;
  return p;
}

namespace {

Eigen::MatrixXd valid_corr(const Eigen::MatrixXd& in, const Eigen::MatrixXd& k) {
  Eigen::Index oh = in.rows() - k.rows() + 1;
  Eigen::Index ow = in.cols() - k.cols() + 1;
  Eigen::MatrixXd out(oh, ow);
  for (Eigen::Index r = 0; r < oh; ++r) {
    for (Eigen::Index c = 0; c < ow; ++c) {
      out(r, c) = in.block(r, c, k.rows(), k.cols()).cwiseProduct(k).sum();
    }
  }
  return out;
}

// 2x2 non-overlapping max; odd trailing row/column dropped; ties take the
// lowest row-major cell
Eigen::MatrixXd max_pool2(const Eigen::MatrixXd& in, Eigen::MatrixXi& argmax) {
  Eigen::Index oh = in.rows() / 2, ow = in.cols() / 2;
  Eigen::MatrixXd out(oh, ow);
  argmax.resize(oh, ow);
  for (Eigen::Index r = 0; r < oh; ++r) {
    for (Eigen::Index c = 0; c < ow; ++c) {
      double best = in(2 * r, 2 * c);
      Eigen::Index best_idx = 2 * r * in.cols() + 2 * c;
      for (int dr = 0; dr < 2; ++dr) {
        for (int dc = 0; dc < 2; ++dc) {
          double v = in(2 * r + dr, 2 * c + dc);
          if (v > best) {
            best = v;
            best_idx = (2 * r + dr) * in.cols() + (2 * c + dc);
          }
        }
      }
      out(r, c) = best;
      argmax(r, c) = static_cast<int>(best_idx);
    }
  }
  return out;
}

Eigen::MatrixXd unpool2(const Eigen::MatrixXd& d_pooled, const Eigen::MatrixXi& argmax,
                        Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index r = 0; r < d_pooled.rows(); ++r) {
    for (Eigen::Index c = 0; c < d_pooled.cols(); ++c) {
      Eigen::Index idx = argmax(r, c);
      d(idx / cols, idx % cols) += d_pooled(r, c);
    }
  }
  return d;
}

}  // namespace

double cnn_forward(const Eigen::MatrixXd& input, const CnnParams& params, CnnCache* cache) {
  const CnnArchitecture& arch = params.arch;
  LayerGeometry g = derive_geometry(arch);
  if (input.rows() != arch.n_f || input.cols() != arch.m_f) {
    throw std::invalid_argument("input is " + std::to_string(input.rows()) + "x" +
                                std::to_string(input.cols()) + " but the network expects " +
                                std::to_string(arch.n_f) + "x" + std::to_string(arch.m_f));
  }

  std::vector<Eigen::MatrixXd> c1_act(static_cast<size_t>(arch.c1_maps));
  std::vector<Eigen::MatrixXd> p1(static_cast<size_t>(arch.c1_maps));
  std::vector<Eigen::MatrixXi> p1_argmax(static_cast<size_t>(arch.c1_maps));
  for (int m = 0; m < arch.c1_maps; ++m) {
    Eigen::MatrixXd pre = valid_corr(input, params.c1[static_cast<size_t>(m)]);
    pre.array() += params.c1_bias(m);
    c1_act[static_cast<size_t>(m)] = pre.array().tanh().matrix();
    p1[static_cast<size_t>(m)] =
        max_pool2(c1_act[static_cast<size_t>(m)], p1_argmax[static_cast<size_t>(m)]);
  }

  std::vector<Eigen::MatrixXd> c2_act(static_cast<size_t>(arch.c2_maps));
  std::vector<Eigen::MatrixXd> p2(static_cast<size_t>(arch.c2_maps));
  std::vector<Eigen::MatrixXi> p2_argmax(static_cast<size_t>(arch.c2_maps));
  for (int m = 0; m < arch.c2_maps; ++m) {
    Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(g.c2_h, g.c2_w);
    for (int ch = 0; ch < arch.c1_maps; ++ch) {
      pre += valid_corr(p1[static_cast<size_t>(ch)],
                        params.c2[static_cast<size_t>(m)][static_cast<size_t>(ch)]);
    }
    pre.array() += params.c2_bias(m);
    c2_act[static_cast<size_t>(m)] = pre.array().tanh().matrix();
    p2[static_cast<size_t>(m)] =
        max_pool2(c2_act[static_cast<size_t>(m)], p2_argmax[static_cast<size_t>(m)]);
  }

  Eigen::VectorXd flat(g.flat);
  for (int m = 0; m < arch.c2_maps; ++m) {
    for (int r = 0; r < g.p2_h; ++r) {
      for (int c = 0; c < g.p2_w; ++c) {
        flat(m * g.p2_h * g.p2_w + r * g.p2_w + c) = p2[static_cast<size_t>(m)](r, c);
      }
    }
  }

  Eigen::VectorXd f_pre = params.f * flat + params.f_bias;
  Eigen::VectorXd f_act = f_pre.array().tanh().matrix();
  double score = params.out.dot(f_act) + params.out_bias;

  if (cache) {
    cache->input = input;
    cache->c1_act = std::move(c1_act);
    cache->p1 = std::move(p1);
    cache->p1_argmax = std::move(p1_argmax);
    cache->c2_act = std::move(c2_act);
    cache->p2 = std::move(p2);
    cache->p2_argmax = std::move(p2_argmax);
    cache->p2_flat = std::move(flat);
    cache->f_act = std::move(f_act);
    cache->score = score;
  }
  return score;
}

CnnGradients cnn_backward(const CnnParams& params, const CnnCache& cache, double upstream) {
  const CnnArchitecture& arch = params.arch;
  LayerGeometry g = derive_geometry(arch);
  int k = arch.kernel;

  CnnGradients grads;
  grads.c1.assign(static_cast<size_t>(arch.c1_maps), Eigen::MatrixXd::Zero(k, k));
  grads.c1_bias = Eigen::VectorXd::Zero(arch.c1_maps);
  grads.c2.assign(static_cast<size_t>(arch.c2_maps),
                  std::vector<Eigen::MatrixXd>(static_cast<size_t>(arch.c1_maps),
                                               Eigen::MatrixXd::Zero(k, k)));
  grads.c2_bias = Eigen::VectorXd::Zero(arch.c2_maps);
  grads.input = Eigen::MatrixXd::Zero(arch.n_f, arch.m_f);

  grads.out = upstream * cache.f_act;
  grads.out_bias = upstream;

  Eigen::VectorXd d_f_act = upstream * params.out;
  Eigen::VectorXd d_f_pre =
      d_f_act.cwiseProduct((1.0 - cache.f_act.array().square()).matrix());
  grads.f = d_f_pre * cache.p2_flat.transpose();
  grads.f_bias = d_f_pre;

  Eigen::VectorXd d_flat = params.f.transpose() * d_f_pre;

  std::vector<Eigen::MatrixXd> d_p1(static_cast<size_t>(arch.c1_maps),
                                    Eigen::MatrixXd::Zero(g.p1_h, g.p1_w));
  for (int m = 0; m < arch.c2_maps; ++m) {
    Eigen::MatrixXd d_p2(g.p2_h, g.p2_w);
    for (int r = 0; r < g.p2_h; ++r) {
      for (int c = 0; c < g.p2_w; ++c) {
        d_p2(r, c) = d_flat(m * g.p2_h * g.p2_w + r * g.p2_w + c);
      }
    }
    Eigen::MatrixXd d_c2_act =
        unpool2(d_p2, cache.p2_argmax[static_cast<size_t>(m)], g.c2_h, g.c2_w);
    Eigen::MatrixXd d_c2_pre = d_c2_act.cwiseProduct(
        (1.0 - cache.c2_act[static_cast<size_t>(m)].array().square()).matrix());
    grads.c2_bias(m) = d_c2_pre.sum();
    for (int ch = 0; ch < arch.c1_maps; ++ch) {
      const Eigen::MatrixXd& p1 = cache.p1[static_cast<size_t>(ch)];
      const Eigen::MatrixXd& kernel = params.c2[static_cast<size_t>(m)][static_cast<size_t>(ch)];
      for (int r = 0; r < g.c2_h; ++r) {
        for (int c = 0; c < g.c2_w; ++c) {
          double d = d_c2_pre(r, c);
          if (d == 0.0) continue;
          grads.c2[static_cast<size_t>(m)][static_cast<size_t>(ch)] += d * p1.block(r, c, k, k);
          d_p1[static_cast<size_t>(ch)].block(r, c, k, k) += d * kernel;
        }
      }
    }
  }

  for (int m = 0; m < arch.c1_maps; ++m) {
    Eigen::MatrixXd d_c1_act =
        unpool2(d_p1[static_cast<size_t>(m)], cache.p1_argmax[static_cast<size_t>(m)], g.c1_h,
                g.c1_w);
    Eigen::MatrixXd d_c1_pre = d_c1_act.cwiseProduct(
        (1.0 - cache.c1_act[static_cast<size_t>(m)].array().square()).matrix());
    grads.c1_bias(m) = d_c1_pre.sum();
    const Eigen::MatrixXd& kernel = params.c1[static_cast<size_t>(m)];
    for (int r = 0; r < g.c1_h; ++r) {
      for (int c = 0; c < g.c1_w; ++c) {
        double d = d_c1_pre(r, c);
        if (d == 0.0) continue;
        grads.c1[static_cast<size_t>(m)] += d * cache.input.block(r, c, k, k);
        grads.input.block(r, c, k, k) += d * kernel;
      }
    }
  }

  return grads;
}

namespace {

std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_values(std::ofstream& out, const double* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (i) out << ' ';
    out << format_g9(data[i]);
  }
  out << '\n';
}

struct LineReader {
  std::ifstream in;
  int line_no = 0;
  std::string path;

  explicit LineReader(const std::string& p) : in(p), path(p) {
    if (!in) throw std::runtime_error("cannot open " + p);
  }
  std::string next() {
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error(path + ": unexpected end of file at line " +
                               std::to_string(line_no + 1));
    }
    ++line_no;
    return line;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
  }
};

std::vector<double> parse_doubles(LineReader& reader, const std::string& line, size_t expected) {
  std::istringstream ss(line);
  std::vector<double> values;
  double v;
  while (ss >> v) values.push_back(v);
  if (values.size() != expected) {
    reader.fail("expected " + std::to_string(expected) + " values, found " +
                std::to_string(values.size()));
  }
  for (double x : values) {
    if (!std::isfinite(x)) reader.fail("non-finite value");
  }
  return values;
}

}  // namespace

void save_cnn_model(const CnnParams& params, const std::string& path) {
  const CnnArchitecture& arch = params.arch;
  LayerGeometry g = derive_geometry(arch);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);

  out << "CNN " << arch.n_f << ' ' << arch.m_f << '\n';

  out << "[C1] " << arch.c1_maps << ' ' << arch.kernel << '\n';
  for (int m = 0; m < arch.c1_maps; ++m) {
    std::vector<double> row;
    const Eigen::MatrixXd& kernel = params.c1[static_cast<size_t>(m)];
    for (int r = 0; r < arch.kernel; ++r) {
      for (int c = 0; c < arch.kernel; ++c) row.push_back(kernel(r, c));
    }
    row.push_back(params.c1_bias(m));
    write_values(out, row.data(), row.size());
  }

  out << "[C2] " << arch.c2_maps << ' ' << arch.c1_maps << ' ' << arch.kernel << '\n';
  for (int m = 0; m < arch.c2_maps; ++m) {
    std::vector<double> row;
    for (int ch = 0; ch < arch.c1_maps; ++ch) {
      const Eigen::MatrixXd& kernel = params.c2[static_cast<size_t>(m)][static_cast<size_t>(ch)];
      for (int r = 0; r < arch.kernel; ++r) {
        for (int c = 0; c < arch.kernel; ++c) row.push_back(kernel(r, c));
      }
    }
    row.push_back(params.c2_bias(m));
    write_values(out, row.data(), row.size());
  }

  out << "[F] " << arch.fc_units << ' ' << g.flat << '\n';
  for (int r = 0; r < arch.fc_units; ++r) {
    std::vector<double> row;
    for (int c = 0; c < g.flat; ++c) row.push_back(params.f(r, c));
    row.push_back(params.f_bias(r));
    write_values(out, row.data(), row.size());
  }

  out << "[OUT] " << arch.fc_units << '\n';
  std::vector<double> row;
  for (int i = 0; i < arch.fc_units; ++i) row.push_back(params.out(i));
  row.push_back(params.out_bias);
  write_values(out, row.data(), row.size());

  if (!out) throw std::runtime_error("failed writing " + path);
}

CnnParams load_cnn_model(const std::string& path) {
  LineReader reader(path);
  CnnArchitecture arch;

  {
    std::istringstream ss(reader.next());
    std::string magic;
    if (!(ss >> magic >> arch.n_f >> arch.m_f) || magic != "CNN") {
      reader.fail("expected header 'CNN <n_f> <m_f>'");
    }
  }
  {
    std::istringstream ss(reader.next());
    std::string tag;
    if (!(ss >> tag >> arch.c1_maps >> arch.kernel) || tag != "[C1]") {
      reader.fail("expected '[C1] <maps> <kernel>'");
    }
  }

  CnnParams p;
  size_t kernel_vals = static_cast<size_t>(arch.kernel) * static_cast<size_t>(arch.kernel);
  std::vector<std::vector<double>> c1_rows;
  for (int m = 0; m < arch.c1_maps; ++m) {
    c1_rows.push_back(parse_doubles(reader, reader.next(), kernel_vals + 1));
  }

  int c2_channels = 0;
  {
    std::istringstream ss(reader.next());
    std::string tag;
    int c2_kernel = 0;
    if (!(ss >> tag >> arch.c2_maps >> c2_channels >> c2_kernel) || tag != "[C2]") {
      reader.fail("expected '[C2] <maps> <channels> <kernel>'");
    }
    if (c2_channels != arch.c1_maps) reader.fail("C2 channel count does not match C1 maps");
    if (c2_kernel != arch.kernel) reader.fail("C2 kernel size does not match C1");
  }
  std::vector<std::vector<double>> c2_rows;
  for (int m = 0; m < arch.c2_maps; ++m) {
    c2_rows.push_back(
        parse_doubles(reader, reader.next(), static_cast<size_t>(arch.c1_maps) * kernel_vals + 1));
  }

  int f_inputs = 0;
  {
    std::istringstream ss(reader.next());
    std::string tag;
    if (!(ss >> tag >> arch.fc_units >> f_inputs) || tag != "[F]") {
      reader.fail("expected '[F] <units> <inputs>'");
    }
  }
  LayerGeometry g = derive_geometry(arch);
  if (f_inputs != g.flat) {
    reader.fail("F layer expects " + std::to_string(f_inputs) +
                " inputs but the geometry yields " + std::to_string(g.flat));
  }
  std::vector<std::vector<double>> f_rows;
  for (int r = 0; r < arch.fc_units; ++r) {
    f_rows.push_back(parse_doubles(reader, reader.next(), static_cast<size_t>(g.flat) + 1));
  }

  int out_inputs = 0;
  {
    std::istringstream ss(reader.next());
    std::string tag;
    if (!(ss >> tag >> out_inputs) || tag != "[OUT]") reader.fail("expected '[OUT] <inputs>'");
    if (out_inputs != arch.fc_units) reader.fail("OUT layer size does not match F units");
  }
  std::vector<double> out_row =
      parse_doubles(reader, reader.next(), static_cast<size_t>(arch.fc_units) + 1);

  p.arch = arch;
  p.c1.resize(static_cast<size_t>(arch.c1_maps));
  p.c1_bias.resize(arch.c1_maps);
  for (int m = 0; m < arch.c1_maps; ++m) {
    Eigen::MatrixXd kernel(arch.kernel, arch.kernel);
    for (int r = 0; r < arch.kernel; ++r) {
      for (int c = 0; c < arch.kernel; ++c) {
        kernel(r, c) = c1_rows[static_cast<size_t>(m)][static_cast<size_t>(r * arch.kernel + c)];
      }
    }
    p.c1[static_cast<size_t>(m)] = kernel;
    p.c1_bias(m) = c1_rows[static_cast<size_t>(m)].back();
  }
  p.c2.resize(static_cast<size_t>(arch.c2_maps));
  p.c2_bias.resize(arch.c2_maps);
  for (int m = 0; m < arch.c2_maps; ++m) {
    p.c2[static_cast<size_t>(m)].resize(static_cast<size_t>(arch.c1_maps));
    for (int ch = 0; ch < arch.c1_maps; ++ch) {
      Eigen::MatrixXd kernel(arch.kernel, arch.kernel);
      for (int r = 0; r < arch.kernel; ++r) {
        for (int c = 0; c < arch.kernel; ++c) {
          kernel(r, c) = c2_rows[static_cast<size_t>(m)][static_cast<size_t>(
              ch * arch.kernel * arch.kernel + r * arch.kernel + c)];
        }
      }
      p.c2[static_cast<size_t>(m)][static_cast<size_t>(ch)] = kernel;
    }
    p.c2_bias(m) = c2_rows[static_cast<size_t>(m)].back();
  }
  p.f.resize(arch.fc_units, g.flat);
  p.f_bias.resize(arch.fc_units);
  for (int r = 0; r < arch.fc_units; ++r) {
    for (int c = 0; c < g.flat; ++c) {
      p.f(r, c) = f_rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
    }
    p.f_bias(r) = f_rows[static_cast<size_t>(r)].back();
  }
  p.out.resize(arch.fc_units);
  for (int i = 0; i < arch.fc_units; ++i) p.out(i) = out_row[static_cast<size_t>(i)];
  p.out_bias = out_row.back();
  return p;
}

}  // namespace wecmatch
