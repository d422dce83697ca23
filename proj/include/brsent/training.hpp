#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "brsent/annotations.hpp"
#include "brsent/numerics.hpp"
#include "brsent/recurrent.hpp"

namespace brsent {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerConfig {
  enum class Kind { sgd, adam };
  Kind kind = Kind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerConfig sgd(double lr) { return {Kind::sgd, lr, 0.9, 0.999, 1e-8}; }
  static OptimizerConfig adam(double lr = 1e-3) { return {Kind::adam, lr, 0.9, 0.999, 1e-8}; }
};

std::string_view format_optimizer(OptimizerConfig::Kind kind);
OptimizerConfig::Kind parse_optimizer(std::string_view text);

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::categorical_crossentropy;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_loss = 0.0;
  double acc = 0.0;
  double val_acc = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// epoch,loss,val_loss,acc,val_acc with round-trip precision.
void write_history_csv(const TrainingHistory& history, std::ostream& out);
TrainingHistory read_history_csv(std::istream& in);

// First and second moment estimates; not part of the model checksum.
struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t step = 0;
  std::optional<ModelParams> first_moment;
  std::optional<ModelParams> second_moment;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  void step(ModelParams& params, const ModelParams& grads);
  const OptimizerState& state() const { return state_; }
  void restore(OptimizerState state) { state_ = std::move(state); }

 private:
  OptimizerState state_;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Inference mode, no dropout.
Evaluation evaluate(const ModelParams& params, const LabeledSequences& data, LossKind loss,
                    std::size_t batch_size = 256);

// One forward/backward/update on a single batch in training mode.
double train_step(ModelParams& params, Optimizer& optimizer, std::span<const Sequence> inputs,
                  std::span<const int> classes, LossKind loss, std::uint64_t dropout_seed);

struct TrainResult {
  ModelParams params;
  TrainingHistory history;
  OptimizerState optimizer;
};

// Seeded per-epoch shuffle, minibatch updates, then full train/val metrics
// appended once per epoch. Throws std::invalid_argument on a label/head
// mismatch or bad config, TrainingError on a non-finite loss.
TrainResult train(ModelParams params, const LabeledSequences& train_set,
                  const LabeledSequences& val_set, const TrainConfig& cfg);

// CRC-32 over the raw bytes of the given tensors.
std::uint32_t tensor_checksum(const std::vector<NamedConstTensor>& tensors);
std::uint32_t body_checksum(const ModelParams& params);

struct TransferResult {
  ModelParams params;
  TrainingHistory phase_a;
  TrainingHistory phase_b;
  std::uint32_t phase_a_end_checksum = 0;  // embedding + LSTM after phase A
  std::uint32_t handoff_checksum = 0;      // embedding + LSTM entering phase B
};

struct TransferData {
  LabeledSequences train;
  LabeledSequences val;
};

// Train on phase A, optionally reinitialize only the head, then continue on
// phase B with the same embedding and LSTM weights.
TransferResult pretrain_transfer(ModelParams params, const TransferData& phase_a,
                                 const TransferData& phase_b, const TrainConfig& cfg_a,
                                 const TrainConfig& cfg_b, bool reinit_head);

// ---------------------------------------------------------------------------
// Checkpoints: <stem>.json manifest and <stem>.bin payload of little-endian
// float64 tensors in manifest order.

void save_checkpoint(const ModelParams& params, const std::filesystem::path& stem);
ModelParams load_checkpoint(const std::filesystem::path& stem);
// Also rejects any tensor whose shape differs from what `expected` implies.
ModelParams load_checkpoint(const std::filesystem::path& stem, const ModelConfig& expected);

// Optimizer sidecar: <stem>.opt.json and <stem>.opt.bin, same scheme.
void save_optimizer_state(const OptimizerState& state, const std::filesystem::path& stem);
OptimizerState load_optimizer_state(const std::filesystem::path& stem, const ModelConfig& model);

}  // namespace brsent
