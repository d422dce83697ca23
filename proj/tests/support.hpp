#pragma once

// Independent reference implementations and fixtures shared by the unit tests
// and the acceptance binary. Nothing here calls the batched library kernels.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "brsent/experiment.hpp"
#include "brsent/numerics.hpp"
#include "brsent/recurrent.hpp"
#include "brsent/synthetic.hpp"
#include "brsent/training.hpp"

namespace support {

using brsent::Matrix;

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = u(gen);
  return m;
}

// Scalar evaluation of the gate equations for a single sample, written with
// plain vectors. W[k][j] maps input coordinate k to hidden unit j.
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat to_mat(const Matrix& m) {
  Mat out(m.rows(), Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline Vec affine(const Vec& v, const Mat& w, std::size_t hidden) {
  Vec z(hidden, 0.0);
  for (std::size_t k = 0; k < v.size(); ++k)
    for (std::size_t j = 0; j < hidden; ++j) z[j] += v[k] * w[k][j];
  return z;
}

struct ScalarGate {
  Mat wx, wh, wc;
};

struct ScalarLstm {
  ScalarGate i, f, c, o;
  std::size_t hidden = 0;
};

inline ScalarLstm scalar_copy(const brsent::LstmParams& p) {
  auto gate = [](const brsent::GateWeights& g) {
    return ScalarGate{to_mat(g.input), to_mat(g.recurrent),
                      g.peephole.empty() ? Mat{} : to_mat(g.peephole)};
  };
  return {gate(p.input_gate), gate(p.forget_gate), gate(p.candidate), gate(p.output_gate),
          p.hidden()};
}

struct ScalarState {
  Vec h, c;
};

inline ScalarState scalar_step(const Vec& x, const ScalarState& prev, const ScalarLstm& p,
                               bool output_reads_previous) {
  const std::size_t n = p.hidden;
  const Vec xi = affine(x, p.i.wx, n), hi = affine(prev.h, p.i.wh, n), ci = affine(prev.c, p.i.wc, n);
  const Vec xf = affine(x, p.f.wx, n), hf = affine(prev.h, p.f.wh, n), cf = affine(prev.c, p.f.wc, n);
  const Vec xc = affine(x, p.c.wx, n), hc = affine(prev.h, p.c.wh, n);
  ScalarState next{Vec(n), Vec(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const double ig = logistic(xi[j] + hi[j] + ci[j]);
    const double fg = logistic(xf[j] + hf[j] + cf[j]);
    next.c[j] = fg * prev.c[j] + ig * std::tanh(xc[j] + hc[j]);
  }
  const Vec xo = affine(x, p.o.wx, n), ho = affine(prev.h, p.o.wh, n);
  const Vec co = affine(output_reads_previous ? prev.c : next.c, p.o.wc, n);
  for (std::size_t j = 0; j < n; ++j) {
    next.h[j] = logistic(xo[j] + ho[j] + co[j]) * std::tanh(next.c[j]);
  }
  return next;
}

// The small configuration used for gradient checks.
inline brsent::ModelConfig tiny_config(int n_out, brsent::OutputPeephole peephole,
                                       double dropout = 0.0) {
  brsent::ModelConfig cfg;
  cfg.vocab_size = 10;
  cfg.embed_dim = 4;
  cfg.hidden = 3;
  cfg.n_out = n_out;
  cfg.dropout_rate = dropout;
  cfg.output_peephole = peephole;
  return cfg;
}

inline std::vector<brsent::Sequence> tiny_batch() { return {{3, 7, 1, 9, 4}, {0, 0, 5, 2, 8}}; }

// Largest relative error over every tensor between model_backward and
// central differences of the mean training-mode loss (fixed dropout seed).
struct GradReport {
  double max_error = 0;
  std::string worst_tensor;
  std::map<std::string, double> per_tensor;
};

inline GradReport check_model_gradients(brsent::ModelParams params,
                                        const std::vector<brsent::Sequence>& inputs,
                                        const std::vector<int>& classes, brsent::LossKind loss,
                                        std::uint64_t dropout_seed = 77, double eps = 1e-5) {
  using namespace brsent;
  const ForwardCache cache = model_forward(params, inputs, Mode::training, dropout_seed);
  ModelParams grads = model_backward(params, cache, classes, loss);
  auto f = [&] {
    return mean_loss(model_forward(params, inputs, Mode::training, dropout_seed).probabilities,
                     classes, loss);
  };
  GradReport report;
  auto param_tensors = params.tensors();
  auto grad_tensors = grads.tensors();
  for (std::size_t t = 0; t < param_tensors.size(); ++t) {
    const double err =
        grad_check(f, param_tensors[t].tensor->values(), grad_tensors[t].tensor->values(), eps);
    report.per_tensor[param_tensors[t].name] = err;
    if (err >= report.max_error) {
      report.max_error = err;
      report.worst_tensor = param_tensors[t].name;
    }
  }
  return report;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("brsent_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(BRSENT_FIXTURE_DIR) / name;
}

// Small, fast settings for end-to-end runs on the toy corpus.
inline brsent::RunSettings toy_settings(std::uint64_t seed = 1, int epochs = 50) {
  brsent::RunSettings s;
  s.model.embed_dim = 16;
  s.model.hidden = 16;
  s.model.maxlen = 16;
  s.model.dropout_rate = 0.2;
  s.train.epochs = epochs;
  s.train.batch_size = 16;
  s.train.optimizer = brsent::OptimizerConfig::adam(0.01);
  s.master_seed = seed;
  return s;
}

inline brsent::SyntheticOptions::Scripts scripts_for(brsent::DatasetTag d) {
  using S = brsent::SyntheticOptions::Scripts;
  switch (d) {
    case brsent::DatasetTag::bangla:
      return S::bangla;
    case brsent::DatasetTag::rb:
      return S::romanized;
    case brsent::DatasetTag::brbt:
      return S::mixed;
  }
  return S::mixed;
}

// Synthetic corpus run through normalize/tokenize/encode with a full vocab.
struct ToyData {
  brsent::EncodedDataset dataset;
  std::size_t vocab_size = 0;
};

inline ToyData toy_encoded(const brsent::SyntheticOptions& opts, std::size_t maxlen = 16) {
  using namespace brsent;
  const auto corpus = make_keyword_corpus(opts);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : corpus) tokens.push_back(tokenize(normalize_text(*s.modified_text)));
  const Vocab vocab = build_vocab(tokens, VocabMode::full());
  ToyData out;
  out.vocab_size = vocab.size();
  out.dataset.maxlen = maxlen;
  out.dataset.vocab_size = vocab.size();
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    out.dataset.sequences.push_back(encode(tokens[r], vocab, maxlen));
    out.dataset.labels1.push_back(corpus[r].label1);
    out.dataset.labels2.push_back(corpus[r].label2);
    out.dataset.sample_ids.push_back(corpus[r].id);
  }
  return out;
}

inline brsent::ModelConfig toy_model(std::size_t vocab_size, int n_out, double dropout = 0.2) {
  brsent::ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.embed_dim = 16;
  cfg.hidden = 16;
  cfg.n_out = n_out;
  cfg.dropout_rate = dropout;
  return cfg;
}

}  // namespace support
