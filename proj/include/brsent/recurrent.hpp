#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brsent/corpus.hpp"
#include "brsent/numerics.hpp"

namespace brsent {

// Which cell value the output gate's peephole reads: the freshly updated cell
// (conventional peephole LSTM) or the previous one.
enum class OutputPeephole { current_cell, previous_cell };

enum class Mode { training, inference };

std::string_view format_output_peephole(OutputPeephole p);
OutputPeephole parse_output_peephole(std::string_view text);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 128;
  std::size_t hidden = 128;
  int n_out = 1;
  double dropout_rate = 0.2;
  OutputPeephole output_peephole = OutputPeephole::current_cell;
  bool use_bias = false;

  // Throws std::invalid_argument on a non-positive size, a head outside
  // {1,2,3}, or a dropout rate outside [0,1).
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Weights feeding one gate. The cell candidate has no peephole.
struct GateWeights {
  Matrix input;      // embed_dim x hidden
  Matrix recurrent;  // hidden x hidden
  Matrix peephole;   // hidden x hidden, full matrix
  Matrix bias;       // 1 x hidden, only with ModelConfig::use_bias
};

struct LstmParams {
  GateWeights input_gate;
  GateWeights forget_gate;
  GateWeights candidate;
  GateWeights output_gate;

  std::size_t hidden() const { return input_gate.recurrent.rows(); }
  std::size_t input_dim() const { return input_gate.input.rows(); }
};

// h and c for a batch, each batch x hidden.
struct CellState {
  Matrix h;
  Matrix c;

  static CellState zeros(std::size_t batch, std::size_t hidden) {
    return {Matrix(batch, hidden), Matrix(batch, hidden)};
  }
};

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

struct NamedConstTensor {
  std::string name;
  const Matrix* tensor;
};

struct ModelParams {
  ModelConfig config;
  Matrix embedding;     // vocab_size x embed_dim
  LstmParams lstm;
  Matrix head_weights;  // hidden x n_out
  Matrix head_bias;     // 1 x n_out

  // Glorot-uniform weights from per-tensor seeds derived from `seed`; head
  // bias starts at zero.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  static ModelParams zeros(const ModelConfig& config);

  // Every tensor in checkpoint order. Bias tensors appear only when enabled.
  std::vector<NamedTensor> tensors();
  std::vector<NamedConstTensor> tensors() const;
  // Embedding plus LSTM tensors, i.e. everything except the head.
  std::vector<NamedConstTensor> body_tensors() const;

  // Fresh Glorot head weights and zero head bias.
  void reinit_head(std::uint64_t seed);
  std::size_t parameter_count() const;
};

// Row lookup, one output row per id; PAD looks up row 0 like any other id.
Matrix embed(std::span<const std::uint32_t> ids, const Matrix& embedding);

// Inverted dropout: in training mode each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate). Inference mode is identity.
Matrix dropout_apply(const Matrix& x, double rate, Mode mode, std::uint64_t seed);

// One step of the peephole LSTM for a batch of inputs (batch x input_dim).
CellState lstm_step(const Matrix& x, const CellState& prev, const LstmParams& p,
                    OutputPeephole peephole = OutputPeephole::current_cell);

// Folds lstm_step over the sequence from a zero state; returns the last state.
CellState lstm_forward(std::span<const Matrix> inputs, const LstmParams& p,
                       OutputPeephole peephole = OutputPeephole::current_cell);

// Sigmoid probability (n_out = 1) or softmax distribution per row.
Matrix head_forward(const Matrix& h, const ModelParams& params);

// Activations of one time step, kept for backpropagation.
struct StepActivations {
  Matrix x;  // after dropout
  Matrix i, f, g, o, c, tanh_c, h;
};

struct ForwardCache {
  std::vector<Sequence> inputs;
  std::vector<Matrix> dropout_scale;  // per step; empty without dropout
  std::vector<StepActivations> steps;
  Matrix probabilities;  // batch x n_out

  bool valid() const { return !steps.empty() && !inputs.empty(); }
};

// Forward pass over a batch of equal-length sequences. Training mode samples
// dropout masks from `dropout_seed`; the same seed reproduces the same masks.
ForwardCache model_forward(const ModelParams& params, std::span<const Sequence> inputs, Mode mode,
                           std::uint64_t dropout_seed = 0);

// Throws std::invalid_argument if a class does not fit the head.
void check_classes(std::span<const int> classes, int n_out);

double mean_loss(const Matrix& probabilities, std::span<const int> classes, LossKind loss);

// Gradients of the mean batch loss for every tensor, by backpropagation
// through time over all steps. Throws std::logic_error on an empty cache.
ModelParams model_backward(const ModelParams& params, const ForwardCache& cache,
                           std::span<const int> classes, LossKind loss);

// argmax with ties to the lowest index; a 1-node head predicts 1 when p >= 0.5.
int predicted_class(std::span<const double> probabilities);
std::vector<int> predicted_classes(const Matrix& probabilities);

}  // namespace brsent
