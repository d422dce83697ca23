#include "brsent/training.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "byte_io.hpp"

namespace brsent {
namespace {

int classes_for_head(int n_out) { return n_out == 1 ? 2 : n_out; }

void check_dataset(const LabeledSequences& data, const ModelParams& params, const char* what) {
  if (data.sequences.size() != data.classes.size()) {
    throw std::invalid_argument(std::string(what) + ": sequence and label counts differ");
  }
  if (data.num_classes != 0 && data.num_classes != classes_for_head(params.config.n_out)) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(data.num_classes) +
                                " classes but the head has " +
                                std::to_string(params.config.n_out) + " nodes");
  }
  check_classes(data.classes, params.config.n_out);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view format_optimizer(OptimizerConfig::Kind kind) {
  return kind == OptimizerConfig::Kind::adam ? "adam" : "sgd";
}

OptimizerConfig::Kind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerConfig::Kind::adam;
  if (text == "sgd") return OptimizerConfig::Kind::sgd;
  throw std::invalid_argument("optimizer must be 'adam' or 'sgd'");
}

void write_history_csv(const TrainingHistory& history, std::ostream& out) {
  out << "epoch,loss,val_loss,acc,val_acc\n";
  for (const auto& r : history.records) {
    out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.val_loss) << ','
        << format_double(r.acc) << ',' << format_double(r.val_acc) << '\n';
  }
}

TrainingHistory read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,loss,val_loss,acc,val_acc", 0) != 0) {
    throw DataError("history CSV must start with 'epoch,loss,val_loss,acc,val_acc'");
  }
  TrainingHistory history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    EpochRecord r;
    char c1, c2, c3, c4;
    if (!(fields >> r.epoch >> c1 >> r.loss >> c2 >> r.val_loss >> c3 >> r.acc >> c4 >>
          r.val_acc) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw DataError("malformed history row '" + line + "'");
    }
    history.records.push_back(r);
  }
  return history;
}

// ---------------------------------------------------------------------------

Optimizer::Optimizer(OptimizerConfig config) {
  if (!(config.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  state_.config = config;
}

void Optimizer::step(ModelParams& params, const ModelParams& grads) {
  ++state_.step;
  const auto& cfg = state_.config;
  auto p_tensors = params.tensors();
  const auto g_tensors = grads.tensors();
  if (p_tensors.size() != g_tensors.size()) throw ShapeError("gradient layout mismatch");

  if (cfg.kind == OptimizerConfig::Kind::sgd) {
    for (std::size_t k = 0; k < p_tensors.size(); ++k) {
      auto p = p_tensors[k].tensor->values();
      const auto g = g_tensors[k].tensor->values();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg.lr * g[j];
    }
    return;
  }

  if (!state_.first_moment) {
    state_.first_moment = ModelParams::zeros(params.config);
    state_.second_moment = ModelParams::zeros(params.config);
  }
  auto m_tensors = state_.first_moment->tensors();
  auto v_tensors = state_.second_moment->tensors();
  const double t = static_cast<double>(state_.step);
  const double m_correction = 1.0 - std::pow(cfg.beta1, t);
  const double v_correction = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < p_tensors.size(); ++k) {
    auto p = p_tensors[k].tensor->values();
    const auto g = g_tensors[k].tensor->values();
    auto m = m_tensors[k].tensor->values();
    auto v = v_tensors[k].tensor->values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / m_correction;
      const double v_hat = v[j] / v_correction;
      p[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------

Evaluation evaluate(const ModelParams& params, const LabeledSequences& data, LossKind loss,
                    std::size_t batch_size) {
  check_loss_head(loss, params.config.n_out);
  check_dataset(data, params, "evaluation set");
  if (data.size() == 0) throw std::invalid_argument("cannot evaluate an empty dataset");
  if (batch_size == 0) batch_size = data.size();
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, data.size() - start);
    const std::span<const Sequence> inputs(data.sequences.data() + start, n);
    const ForwardCache cache = model_forward(params, inputs, Mode::inference);
    for (std::size_t b = 0; b < n; ++b) {
      const auto row = cache.probabilities.row(b);
      const int y = data.classes[start + b];
      loss_sum += loss == LossKind::binary_crossentropy
                      ? binary_crossentropy(row[0], y)
                      : categorical_crossentropy(row, static_cast<std::size_t>(y));
      if (predicted_class(row) == y) ++correct;
    }
  }
  const double n = static_cast<double>(data.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

double train_step(ModelParams& params, Optimizer& optimizer, std::span<const Sequence> inputs,
                  std::span<const int> classes, LossKind loss, std::uint64_t dropout_seed) {
  const ForwardCache cache = model_forward(params, inputs, Mode::training, dropout_seed);
  const double batch_loss = mean_loss(cache.probabilities, classes, loss);
  if (!std::isfinite(batch_loss)) throw TrainingError("non-finite batch loss");
  const ModelParams grads = model_backward(params, cache, classes, loss);
  optimizer.step(params, grads);
  return batch_loss;
}

TrainResult train(ModelParams params, const LabeledSequences& train_set,
                  const LabeledSequences& val_set, const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  Optimizer optimizer(cfg.optimizer);
  if (cfg.epochs == 0) return {std::move(params), {}, optimizer.state()};

  check_loss_head(cfg.loss, params.config.n_out);
  check_dataset(train_set, params, "training set");
  check_dataset(val_set, params, "validation set");
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw std::invalid_argument("training and validation sets must be non-empty");
  }
  if (cfg.batch_size == 0 || cfg.batch_size > train_set.size()) {
    throw std::invalid_argument("batch size " + std::to_string(cfg.batch_size) +
                                " must lie in [1, " + std::to_string(train_set.size()) + "]");
  }

  TrainingHistory history;
  std::vector<std::size_t> order(train_set.size());
  std::vector<Sequence> batch_inputs;
  std::vector<int> batch_classes;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    const std::uint64_t epoch_seed = derive_seed(cfg.seed ^ 0xD40B5EEDULL, static_cast<std::uint64_t>(epoch));
    std::uint64_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch_inputs.clear();
      batch_classes.clear();
      for (std::size_t k = start; k < start + n; ++k) {
        batch_inputs.push_back(train_set.sequences[order[k]]);
        batch_classes.push_back(train_set.classes[order[k]]);
      }
      const double loss = train_step(params, optimizer, batch_inputs, batch_classes, cfg.loss,
                                     derive_seed(epoch_seed, batch_index));
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
    }

    const Evaluation on_train = evaluate(params, train_set, cfg.loss);
    const Evaluation on_val = evaluate(params, val_set, cfg.loss);
    if (!std::isfinite(on_train.loss) || !std::isfinite(on_val.loss)) {
      throw TrainingError("non-finite epoch loss at epoch " + std::to_string(epoch));
    }
    history.records.push_back(
        {epoch, on_train.loss, on_val.loss, on_train.accuracy, on_val.accuracy});
  }
  return {std::move(params), std::move(history), optimizer.state()};
}

// ---------------------------------------------------------------------------

std::uint32_t tensor_checksum(const std::vector<NamedConstTensor>& tensors) {
  std::string bytes;
  for (const auto& t : tensors) {
    for (double v : t.tensor->values()) detail::put_le<double>(bytes, v);
  }
  return detail::crc32_of(bytes);
}

std::uint32_t body_checksum(const ModelParams& params) {
  return tensor_checksum(params.body_tensors());
}

TransferResult pretrain_transfer(ModelParams params, const TransferData& phase_a,
                                 const TransferData& phase_b, const TrainConfig& cfg_a,
                                 const TrainConfig& cfg_b, bool reinit_head) {
  if (phase_a.train.num_classes != phase_b.train.num_classes ||
      phase_a.val.num_classes != phase_b.val.num_classes) {
    throw std::invalid_argument("pre-training phases have different class counts (" +
                                std::to_string(phase_a.train.num_classes) + " vs " +
                                std::to_string(phase_b.train.num_classes) + ")");
  }
  TransferResult out;
  TrainResult first = train(std::move(params), phase_a.train, phase_a.val, cfg_a);
  out.phase_a = std::move(first.history);
  out.phase_a_end_checksum = body_checksum(first.params);

  ModelParams handoff = std::move(first.params);
  if (reinit_head && cfg_a.epochs > 0) handoff.reinit_head(derive_seed(cfg_b.seed, 0x4EAD));
  out.handoff_checksum = body_checksum(handoff);

  TrainResult second = train(std::move(handoff), phase_b.train, phase_b.val, cfg_b);
  out.phase_b = std::move(second.history);
  out.params = std::move(second.params);
  return out;
}

}  // namespace brsent
