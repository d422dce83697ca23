#include "brsent/recurrent.hpp"

#include <cmath>
#include <stdexcept>

namespace brsent {
namespace {

Matrix gate_preactivation(const GateWeights& w, const Matrix& x, const Matrix& h_prev,
                          const Matrix* peephole_cell) {
  Matrix z(x.rows(), w.input.cols());
  add_matmul(z, x, w.input);
  add_matmul(z, h_prev, w.recurrent);
  if (peephole_cell != nullptr) add_matmul(z, *peephole_cell, w.peephole);
  if (!w.bias.empty()) {
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] += w.bias(0, k);
    }
  }
  return z;
}

StepActivations step_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                             const LstmParams& p, OutputPeephole peephole) {
  if (x.cols() != p.input_dim() || h_prev.cols() != p.hidden() || c_prev.cols() != p.hidden() ||
      h_prev.rows() != x.rows() || c_prev.rows() != x.rows()) {
    throw ShapeError("lstm_step: input " + shape_string(x) + ", state " + shape_string(h_prev) +
                     "/" + shape_string(c_prev) + " do not fit input_dim " +
                     std::to_string(p.input_dim()) + ", hidden " + std::to_string(p.hidden()));
  }
  StepActivations s;
  s.x = x;
  s.i = sigmoid(gate_preactivation(p.input_gate, x, h_prev, &c_prev));
  s.f = sigmoid(gate_preactivation(p.forget_gate, x, h_prev, &c_prev));
  s.g = tanh_m(gate_preactivation(p.candidate, x, h_prev, nullptr));
  s.c = hadamard(s.f, c_prev);
  s.c += hadamard(s.i, s.g);
  const Matrix& peep = peephole == OutputPeephole::current_cell ? s.c : c_prev;
  s.o = sigmoid(gate_preactivation(p.output_gate, x, h_prev, &peep));
  s.tanh_c = tanh_m(s.c);
  s.h = hadamard(s.o, s.tanh_c);
  if (!s.c.all_finite() || !s.h.all_finite()) {
    throw NumericError("lstm_step produced a non-finite state");
  }
  return s;
}

void add_column_sums(Matrix& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) out(0, k) += row[k];
  }
}

// d(sigmoid) from the activation value.
Matrix sigmoid_backward(const Matrix& grad, const Matrix& act) {
  Matrix out = grad;
  auto ov = out.values();
  auto av = act.values();
  for (std::size_t k = 0; k < ov.size(); ++k) ov[k] *= av[k] * (1.0 - av[k]);
  return out;
}

Matrix tanh_backward(const Matrix& grad, const Matrix& act) {
  Matrix out = grad;
  auto ov = out.values();
  auto av = act.values();
  for (std::size_t k = 0; k < ov.size(); ++k) ov[k] *= 1.0 - av[k] * av[k];
  return out;
}

void accumulate_gate(GateWeights& grad, const GateWeights& w, const Matrix& da, const Matrix& x,
                     const Matrix& h_prev, const Matrix* peephole_cell, Matrix& dx,
                     Matrix& dh_prev, Matrix* dpeephole_cell) {
  add_matmul_tn(grad.input, x, da);
  add_matmul_tn(grad.recurrent, h_prev, da);
  if (peephole_cell != nullptr) {
    add_matmul_tn(grad.peephole, *peephole_cell, da);
    add_matmul_nt(*dpeephole_cell, da, w.peephole);
  }
  if (!grad.bias.empty()) add_column_sums(grad.bias, da);
  add_matmul_nt(dx, da, w.input);
  add_matmul_nt(dh_prev, da, w.recurrent);
}

GateWeights make_gate(const ModelConfig& cfg, bool with_peephole, std::uint64_t seed,
                      std::uint64_t stream, bool random) {
  GateWeights g;
  if (random) {
    g.input = init_params(cfg.embed_dim, cfg.hidden, derive_seed(seed, stream));
    g.recurrent = init_params(cfg.hidden, cfg.hidden, derive_seed(seed, stream + 1));
    if (with_peephole) g.peephole = init_params(cfg.hidden, cfg.hidden, derive_seed(seed, stream + 2));
  } else {
    g.input = Matrix(cfg.embed_dim, cfg.hidden);
    g.recurrent = Matrix(cfg.hidden, cfg.hidden);
    if (with_peephole) g.peephole = Matrix(cfg.hidden, cfg.hidden);
  }
  if (cfg.use_bias) g.bias = Matrix(1, cfg.hidden);
  return g;
}

template <typename Self, typename Out>
void collect_tensors(Self& self, std::vector<Out>& out, bool include_head) {
  out.push_back({"embedding", &self.embedding});
  const std::pair<const char*, decltype(&self.lstm.input_gate)> gates[] = {
      {"lstm.input_gate", &self.lstm.input_gate},
      {"lstm.forget_gate", &self.lstm.forget_gate},
      {"lstm.candidate", &self.lstm.candidate},
      {"lstm.output_gate", &self.lstm.output_gate},
  };
  for (const auto& [prefix, gate] : gates) {
    const std::string p(prefix);
    out.push_back({p + ".input", &gate->input});
    out.push_back({p + ".recurrent", &gate->recurrent});
    if (!gate->peephole.empty()) out.push_back({p + ".peephole", &gate->peephole});
    if (!gate->bias.empty()) out.push_back({p + ".bias", &gate->bias});
  }
  if (include_head) {
    out.push_back({"head.weights", &self.head_weights});
    out.push_back({"head.bias", &self.head_bias});
  }
}

}  // namespace

std::string_view format_output_peephole(OutputPeephole p) {
  return p == OutputPeephole::current_cell ? "current" : "previous";
}

OutputPeephole parse_output_peephole(std::string_view text) {
  if (text == "current") return OutputPeephole::current_cell;
  if (text == "previous") return OutputPeephole::previous_cell;
  throw std::invalid_argument("output peephole must be 'current' or 'previous'");
}

void ModelConfig::validate() const {
  if (vocab_size == 0 || embed_dim == 0 || hidden == 0) {
    throw std::invalid_argument("model sizes must be positive");
  }
  if (n_out < 1 || n_out > 3) {
    throw std::invalid_argument("head must have 1, 2 or 3 nodes");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.embedding = init_params(config.vocab_size, config.embed_dim, derive_seed(seed, 0));
  p.lstm.input_gate = make_gate(config, true, seed, 10, true);
  p.lstm.forget_gate = make_gate(config, true, seed, 20, true);
  p.lstm.candidate = make_gate(config, false, seed, 30, true);
  p.lstm.output_gate = make_gate(config, true, seed, 40, true);
  p.reinit_head(derive_seed(seed, 50));
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.embedding = Matrix(config.vocab_size, config.embed_dim);
  p.lstm.input_gate = make_gate(config, true, 0, 0, false);
  p.lstm.forget_gate = make_gate(config, true, 0, 0, false);
  p.lstm.candidate = make_gate(config, false, 0, 0, false);
  p.lstm.output_gate = make_gate(config, true, 0, 0, false);
  p.head_weights = Matrix(config.hidden, static_cast<std::size_t>(config.n_out));
  p.head_bias = Matrix(1, static_cast<std::size_t>(config.n_out));
  return p;
}

void ModelParams::reinit_head(std::uint64_t seed) {
  head_weights = init_params(config.hidden, static_cast<std::size_t>(config.n_out), seed);
  head_bias = Matrix(1, static_cast<std::size_t>(config.n_out));
}

std::vector<NamedTensor> ModelParams::tensors() {
  std::vector<NamedTensor> out;
  collect_tensors(*this, out, true);
  return out;
}

std::vector<NamedConstTensor> ModelParams::tensors() const {
  std::vector<NamedConstTensor> out;
  collect_tensors(*this, out, true);
  return out;
}

std::vector<NamedConstTensor> ModelParams::body_tensors() const {
  std::vector<NamedConstTensor> out;
  collect_tensors(*this, out, false);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor->size();
  return n;
}

// ---------------------------------------------------------------------------

Matrix embed(std::span<const std::uint32_t> ids, const Matrix& embedding) {
  Matrix out(ids.size(), embedding.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= embedding.rows()) {
      throw std::out_of_range("token id " + std::to_string(ids[t]) + " outside embedding of " +
                              std::to_string(embedding.rows()) + " rows");
    }
    const auto src = embedding.row(ids[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

namespace {

Matrix dropout_scale(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  Matrix scale(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (double& v : scale.values()) v = rng.uniform() < rate ? 0.0 : keep;
  return scale;
}

}  // namespace

Matrix dropout_apply(const Matrix& x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0,1)");
  if (mode == Mode::inference || rate == 0.0) return x;
  Rng rng(seed);
  return hadamard(x, dropout_scale(x.rows(), x.cols(), rate, rng));
}

CellState lstm_step(const Matrix& x, const CellState& prev, const LstmParams& p,
                    OutputPeephole peephole) {
  StepActivations s = step_forward(x, prev.h, prev.c, p, peephole);
  return {std::move(s.h), std::move(s.c)};
}

CellState lstm_forward(std::span<const Matrix> inputs, const LstmParams& p,
                       OutputPeephole peephole) {
  if (inputs.empty()) throw std::invalid_argument("lstm_forward needs a non-empty sequence");
  CellState state = CellState::zeros(inputs.front().rows(), p.hidden());
  for (const auto& x : inputs) state = lstm_step(x, state, p, peephole);
  return state;
}

Matrix head_forward(const Matrix& h, const ModelParams& params) {
  const int n_out = params.config.n_out;
  if (n_out < 1 || n_out > 3) throw std::invalid_argument("head must have 1, 2 or 3 nodes");
  Matrix z(h.rows(), static_cast<std::size_t>(n_out));
  add_matmul(z, h, params.head_weights);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += params.head_bias(0, k);
    if (n_out == 1) {
      row[0] = sigmoid(row[0]);
    } else {
      const auto dist = softmax(row);
      std::copy(dist.begin(), dist.end(), row.begin());
    }
  }
  return z;
}

ForwardCache model_forward(const ModelParams& params, std::span<const Sequence> inputs, Mode mode,
                           std::uint64_t dropout_seed) {
  if (inputs.empty()) throw std::invalid_argument("model_forward needs a non-empty batch");
  const std::size_t batch = inputs.size();
  const std::size_t steps = inputs.front().size();
  if (steps == 0) throw std::invalid_argument("model_forward needs non-empty sequences");
  for (const auto& seq : inputs) {
    if (seq.size() != steps) throw ShapeError("batch sequences differ in length");
  }
  const auto& cfg = params.config;
  const bool drop = mode == Mode::training && cfg.dropout_rate > 0.0;

  ForwardCache cache;
  cache.inputs.assign(inputs.begin(), inputs.end());
  cache.steps.reserve(steps);
  Rng rng(dropout_seed);
  Matrix h(batch, cfg.hidden);
  Matrix c(batch, cfg.hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    Matrix x(batch, cfg.embed_dim);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto id = inputs[b][t];
      if (id >= params.embedding.rows()) {
        throw std::out_of_range("token id " + std::to_string(id) + " outside the embedding");
      }
      const auto src = params.embedding.row(id);
      std::copy(src.begin(), src.end(), x.row(b).begin());
    }
    if (drop) {
      cache.dropout_scale.push_back(dropout_scale(batch, cfg.embed_dim, cfg.dropout_rate, rng));
      x = hadamard(x, cache.dropout_scale.back());
    }
    StepActivations s = step_forward(x, h, c, params.lstm, cfg.output_peephole);
    h = s.h;
    c = s.c;
    cache.steps.push_back(std::move(s));
  }
  cache.probabilities = head_forward(h, params);
  return cache;
}

void check_classes(std::span<const int> classes, int n_out) {
  const int num_classes = n_out == 1 ? 2 : n_out;
  for (int y : classes) {
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("class " + std::to_string(y) + " does not fit a " +
                                  std::to_string(n_out) + "-node head");
    }
  }
}

double mean_loss(const Matrix& probabilities, std::span<const int> classes, LossKind loss) {
  if (probabilities.rows() != classes.size() || classes.empty()) {
    throw ShapeError("mean_loss: " + std::to_string(probabilities.rows()) + " predictions for " +
                     std::to_string(classes.size()) + " labels");
  }
  check_loss_head(loss, static_cast<int>(probabilities.cols()));
  double total = 0.0;
  for (std::size_t b = 0; b < classes.size(); ++b) {
    const auto row = probabilities.row(b);
    total += loss == LossKind::binary_crossentropy
                 ? binary_crossentropy(row[0], classes[b])
                 : categorical_crossentropy(row, static_cast<std::size_t>(classes[b]));
  }
  return total / static_cast<double>(classes.size());
}

ModelParams model_backward(const ModelParams& params, const ForwardCache& cache,
                           std::span<const int> classes, LossKind loss) {
  if (!cache.valid()) throw std::logic_error("model_backward called without a forward cache");
  const auto& cfg = params.config;
  check_loss_head(loss, cfg.n_out);
  check_classes(classes, cfg.n_out);
  const std::size_t batch = cache.inputs.size();
  if (classes.size() != batch) throw ShapeError("model_backward: label count != batch size");

  ModelParams grad = ModelParams::zeros(cfg);
  const double inv_batch = 1.0 / static_cast<double>(batch);

  // Head: gradient of the clamped cross-entropy with respect to the logits.
  const auto& probs = cache.probabilities;
  Matrix dz(batch, static_cast<std::size_t>(cfg.n_out));
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = probs.row(b);
    const int y = classes[b];
    if (cfg.n_out == 1) {
      const double p = row[0];
      const double target = y == 1 ? p : 1.0 - p;
      if (target >= kLogClamp && target <= 1.0 - kLogClamp) dz(b, 0) = (p - y) * inv_batch;
    } else {
      const double py = row[static_cast<std::size_t>(y)];
      if (py >= kLogClamp && py <= 1.0 - kLogClamp) {
        for (std::size_t k = 0; k < row.size(); ++k) {
          dz(b, k) = (row[k] - (static_cast<int>(k) == y ? 1.0 : 0.0)) * inv_batch;
        }
      }
    }
  }
  const std::size_t steps = cache.steps.size();
  const Matrix& h_last = cache.steps.back().h;
  add_matmul_tn(grad.head_weights, h_last, dz);
  add_column_sums(grad.head_bias, dz);

  Matrix dh(batch, cfg.hidden);
  add_matmul_nt(dh, dz, params.head_weights);
  Matrix dc_next(batch, cfg.hidden);
  const Matrix zeros(batch, cfg.hidden);
  const bool peep_current = cfg.output_peephole == OutputPeephole::current_cell;

  for (std::size_t t = steps; t-- > 0;) {
    const StepActivations& s = cache.steps[t];
    const Matrix& h_prev = t > 0 ? cache.steps[t - 1].h : zeros;
    const Matrix& c_prev = t > 0 ? cache.steps[t - 1].c : zeros;

    Matrix dx(batch, cfg.embed_dim);
    Matrix dh_prev(batch, cfg.hidden);
    Matrix dc_prev(batch, cfg.hidden);

    // h = o * tanh(c)
    const Matrix da_o = sigmoid_backward(hadamard(dh, s.tanh_c), s.o);
    Matrix dc = tanh_backward(hadamard(dh, s.o), s.tanh_c);
    dc += dc_next;
    if (peep_current) {
      accumulate_gate(grad.lstm.output_gate, params.lstm.output_gate, da_o, s.x, h_prev, &s.c, dx,
                      dh_prev, &dc);
    } else {
      accumulate_gate(grad.lstm.output_gate, params.lstm.output_gate, da_o, s.x, h_prev, &c_prev,
                      dx, dh_prev, &dc_prev);
    }

    // c = f * c_prev + i * g
    const Matrix da_i = sigmoid_backward(hadamard(dc, s.g), s.i);
    const Matrix da_f = sigmoid_backward(hadamard(dc, c_prev), s.f);
    const Matrix da_g = tanh_backward(hadamard(dc, s.i), s.g);
    dc_prev += hadamard(dc, s.f);
    accumulate_gate(grad.lstm.input_gate, params.lstm.input_gate, da_i, s.x, h_prev, &c_prev, dx,
                    dh_prev, &dc_prev);
    accumulate_gate(grad.lstm.forget_gate, params.lstm.forget_gate, da_f, s.x, h_prev, &c_prev,
                    dx, dh_prev, &dc_prev);
    accumulate_gate(grad.lstm.candidate, params.lstm.candidate, da_g, s.x, h_prev, nullptr, dx,
                    dh_prev, nullptr);

    if (!cache.dropout_scale.empty()) dx = hadamard(dx, cache.dropout_scale[t]);
    for (std::size_t b = 0; b < batch; ++b) {
      auto dst = grad.embedding.row(cache.inputs[b][t]);
      const auto src = dx.row(b);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
    dh = std::move(dh_prev);
    dc_next = std::move(dc_prev);
  }
  return grad;
}

int predicted_class(std::span<const double> probabilities) {
  if (probabilities.size() == 1) return probabilities[0] >= 0.5 ? 1 : 0;
  std::size_t best = 0;
  for (std::size_t k = 1; k < probabilities.size(); ++k) {
    if (probabilities[k] > probabilities[best]) best = k;
  }
  return static_cast<int>(best);
}

std::vector<int> predicted_classes(const Matrix& probabilities) {
  std::vector<int> out(probabilities.rows());
  for (std::size_t r = 0; r < probabilities.rows(); ++r) out[r] = predicted_class(probabilities.row(r));
  return out;
}

}  // namespace brsent
