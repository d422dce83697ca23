#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace brsent;

namespace {

LabeledSequences tiny_labeled(std::vector<int> classes, int num_classes) {
  return {support::tiny_batch(), std::move(classes), num_classes};
}

LabeledSequences random_labeled(std::mt19937_64& gen, std::size_t n, int num_classes,
                                std::size_t vocab = 10, std::size_t len = 5) {
  LabeledSequences out;
  out.num_classes = num_classes;
  for (std::size_t r = 0; r < n; ++r) {
    Sequence s(len);
    for (auto& id : s) id = static_cast<std::uint32_t>(gen() % vocab);
    out.sequences.push_back(s);
    out.classes.push_back(static_cast<int>(r % static_cast<std::size_t>(num_classes)));
  }
  return out;
}

TrainConfig quick_config(int epochs, LossKind loss, std::uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.optimizer = OptimizerConfig::adam(0.01);
  cfg.seed = seed;
  cfg.loss = loss;
  return cfg;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t t = 0; t < ta.size(); ++t) {
    if (!(*ta[t].tensor == *tb[t].tensor)) return false;
  }
  return true;
}

struct ToySplit {
  LabeledSequences train, val;
  std::size_t vocab_size;
};

ToySplit toy_split(int num_classes, LabelColumn column, double agreement, std::uint64_t seed) {
  SyntheticOptions opts;
  opts.num_classes = num_classes;
  opts.second_agreement = agreement;
  opts.seed = seed;
  const auto toy = support::toy_encoded(opts);
  const auto splits = split_shuffle(toy.dataset, {0.7, 0.15, 0.15}, derive_seed(seed, 1));
  const LabelMod mod = num_classes == 3 ? LabelMod::ambiguous_to_two : LabelMod::remove_ambiguous;
  return {apply_label_mod(splits.train, column, mod), apply_label_mod(splits.val, column, mod),
          toy.vocab_size};
}

}  // namespace

TEST_CASE("SGD step is params minus lr times gradient") {
  ModelParams p = ModelParams::init(support::tiny_config(2, OutputPeephole::current_cell), 1);
  const ModelParams before = p;
  ModelParams g = ModelParams::zeros(p.config);
  std::mt19937_64 gen(2);
  for (auto& t : g.tensors()) *t.tensor = support::random_matrix(t.tensor->rows(), t.tensor->cols(), gen);
  Optimizer opt(OptimizerConfig::sgd(0.1));
  opt.step(p, g);
  const auto tp = std::as_const(p).tensors(), tb = before.tensors(), tg = std::as_const(g).tensors();
  for (std::size_t t = 0; t < tp.size(); ++t) {
    for (std::size_t k = 0; k < tp[t].tensor->size(); ++k) {
      CHECK(tp[t].tensor->values()[k] ==
            doctest::Approx(tb[t].tensor->values()[k] - 0.1 * tg[t].tensor->values()[k]));
    }
  }
  CHECK(opt.state().step == 1);
  CHECK_FALSE(opt.state().first_moment);
}

TEST_CASE("Adam matches a scalar reference for two steps") {
  ModelConfig cfg = support::tiny_config(1, OutputPeephole::current_cell);
  ModelParams p = ModelParams::zeros(cfg);
  ModelParams g = ModelParams::zeros(cfg);
  Optimizer opt(OptimizerConfig::adam(0.01));
  const double g1 = 0.3, g2 = -0.7;
  g.head_bias(0, 0) = g1;
  opt.step(p, g);
  // First bias-corrected step moves by lr * g / (|g| + eps).
  double m = 0.1 * g1, v = 0.001 * g1 * g1, theta = 0.0;
  theta -= 0.01 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
  CHECK(p.head_bias(0, 0) == doctest::Approx(theta).epsilon(1e-14));
  g.head_bias(0, 0) = g2;
  opt.step(p, g);
  m = 0.9 * m + 0.1 * g2;
  v = 0.999 * v + 0.001 * g2 * g2;
  theta -= 0.01 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(p.head_bias(0, 0) == doctest::Approx(theta).epsilon(1e-14));
  CHECK(p.head_weights == Matrix(3, 1));
  REQUIRE(opt.state().second_moment);
  CHECK(opt.state().step == 2);
}

TEST_CASE("train with zero epochs returns params unchanged") {
  const ModelParams p = ModelParams::init(support::tiny_config(2, OutputPeephole::current_cell), 5);
  const auto data = tiny_labeled({0, 1}, 2);
  auto cfg = quick_config(0, LossKind::categorical_crossentropy);
  cfg.batch_size = 2;
  const TrainResult r = train(p, data, data, cfg);
  CHECK(same_params(r.params, p));
  CHECK(r.history.empty());
}

TEST_CASE("train is deterministic given the seed") {
  std::mt19937_64 gen(4);
  const auto data = random_labeled(gen, 24, 2);
  const auto val = random_labeled(gen, 8, 2);
  const ModelParams p = ModelParams::init(support::tiny_config(2, OutputPeephole::current_cell, 0.2), 5);
  const auto cfg = quick_config(3, LossKind::categorical_crossentropy);
  const TrainResult a = train(p, data, val, cfg);
  const TrainResult b = train(p, data, val, cfg);
  CHECK(same_params(a.params, b.params));
  std::ostringstream ha, hb;
  write_history_csv(a.history, ha);
  write_history_csv(b.history, hb);
  CHECK(ha.str() == hb.str());
  const TrainResult c = train(p, data, val, quick_config(3, LossKind::categorical_crossentropy, 4));
  CHECK_FALSE(same_params(a.params, c.params));
  CHECK(a.history.size() == 3);
  for (const auto& rec : a.history.records) {
    CHECK(std::isfinite(rec.loss));
    CHECK(std::isfinite(rec.val_loss));
    CHECK(rec.acc >= 0.0);
    CHECK(rec.acc <= 1.0);
    CHECK(rec.val_acc >= 0.0);
    CHECK(rec.val_acc <= 1.0);
  }
}

TEST_CASE("train rejects inconsistent inputs") {
  const ModelParams p = ModelParams::init(support::tiny_config(1, OutputPeephole::current_cell), 5);
  auto cfg = quick_config(1, LossKind::binary_crossentropy);
  cfg.batch_size = 2;
  const auto ok = tiny_labeled({0, 1}, 2);
  CHECK_NOTHROW(train(p, ok, ok, cfg));
  CHECK_THROWS_AS(train(p, tiny_labeled({0, 2}, 3), ok, cfg), std::invalid_argument);
  auto cat = cfg;
  cat.loss = LossKind::categorical_crossentropy;
  CHECK_THROWS_AS(train(p, ok, ok, cat), std::invalid_argument);
  auto big = cfg;
  big.batch_size = 3;
  CHECK_THROWS_AS(train(p, ok, ok, big), std::invalid_argument);
  auto zero_lr = cfg;
  zero_lr.optimizer.lr = 0.0;
  CHECK_THROWS_AS(train(p, ok, ok, zero_lr), std::invalid_argument);
  CHECK_THROWS_AS(train(p, LabeledSequences{}, ok, cfg), std::invalid_argument);
}

TEST_CASE("small-lr gradient steps decrease the loss monotonically") {
  for (auto loss : {LossKind::binary_crossentropy, LossKind::categorical_crossentropy}) {
    const int n_out = loss == LossKind::binary_crossentropy ? 1 : 3;
    ModelParams p = ModelParams::init(support::tiny_config(n_out, OutputPeephole::current_cell), 9);
    const auto batch = support::tiny_batch();
    const std::vector<int> classes{1, 0};
    Optimizer opt(OptimizerConfig::sgd(1e-4));
    double last = mean_loss(model_forward(p, batch, Mode::inference).probabilities, classes, loss);
    for (int step = 0; step < 10; ++step) {
      train_step(p, opt, batch, classes, loss, 0);
      const double now = mean_loss(model_forward(p, batch, Mode::inference).probabilities, classes, loss);
      CHECK(now < last + 1e-12);
      CHECK(now < last);
      last = now;
    }
  }
}

TEST_CASE("evaluate: tie-break, perfect fixture, purity") {
  ModelConfig cfg = support::tiny_config(3, OutputPeephole::current_cell);
  const ModelParams zero = ModelParams::zeros(cfg);
  std::mt19937_64 gen(6);
  LabeledSequences data = random_labeled(gen, 9, 3);
  data.classes = {0, 1, 2, 0, 1, 2, 0, 0, 1};
  const Evaluation e = evaluate(zero, data, LossKind::categorical_crossentropy);
  CHECK(e.accuracy == doctest::Approx(4.0 / 9.0));
  CHECK(e.loss == doctest::Approx(std::log(3.0)));

  cfg.n_out = 1;
  ModelParams sure = ModelParams::zeros(cfg);
  sure.head_bias(0, 0) = 60;
  LabeledSequences ones = random_labeled(gen, 6, 1);
  ones.num_classes = 2;
  ones.classes.assign(6, 1);
  const Evaluation perfect = evaluate(sure, ones, LossKind::binary_crossentropy);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.loss < 1e-6);

  // A zero model outputs exactly 0.5, which counts as class 1.
  const ModelParams half = ModelParams::zeros(cfg);
  CHECK(evaluate(half, ones, LossKind::binary_crossentropy).accuracy == 1.0);

  const ModelParams p = ModelParams::init(support::tiny_config(3, OutputPeephole::current_cell, 0.5), 1);
  const Evaluation first = evaluate(p, data, LossKind::categorical_crossentropy, 2);
  const Evaluation second = evaluate(p, data, LossKind::categorical_crossentropy, 7);
  CHECK(first.loss == second.loss);
  CHECK(first.accuracy == second.accuracy);
}

TEST_CASE("random-weight models sit at chance on balanced two-class data") {
  SyntheticOptions opts;
  opts.seed = 12;
  const auto toy = support::toy_encoded(opts);
  const auto data = apply_label_mod(toy.dataset, LabelColumn::first, LabelMod::remove_ambiguous);
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelParams p = ModelParams::init(support::toy_model(toy.vocab_size, 2), seed);
    sum += evaluate(p, data, LossKind::categorical_crossentropy).accuracy;
  }
  CHECK(std::abs(sum / 20 - 0.5) <= 0.05);
}

TEST_CASE("toy keyword corpus reaches train accuracy 0.99 within 50 epochs") {
  const ToySplit split = toy_split(2, LabelColumn::first, 1.0, 21);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.optimizer = OptimizerConfig::adam(0.01);
  cfg.seed = 5;
  cfg.loss = LossKind::categorical_crossentropy;
  const TrainResult r =
      train(ModelParams::init(support::toy_model(split.vocab_size, 2), 3), split.train, split.val, cfg);
  double best = 0;
  for (const auto& rec : r.history.records) best = std::max(best, rec.acc);
  CHECK(best >= 0.99);
}

TEST_CASE("history CSV") {
  TrainingHistory h;
  h.records = {{1, 0.7, 0.69, 0.5, 0.25}, {2, 0.1 + 0.2, 1.0 / 3.0, 1.0, 0.75}};
  std::ostringstream out;
  write_history_csv(h, out);
  const std::string text = out.str();
  CHECK(text.rfind("epoch,loss,val_loss,acc,val_acc\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  std::istringstream in(text);
  const TrainingHistory back = read_history_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back.records[1].loss == 0.1 + 0.2);
  CHECK(back.records[1].val_loss == 1.0 / 3.0);
  std::istringstream bad("epoch,loss\n1,2\n");
  CHECK_THROWS(read_history_csv(bad));
}

TEST_CASE("pretrain_transfer contracts") {
  const ToySplit a = toy_split(2, LabelColumn::first, 0.85, 8);
  const ToySplit b = toy_split(2, LabelColumn::second, 0.85, 8);
  const ModelParams init = ModelParams::init(support::toy_model(a.vocab_size, 2), 4);
  TrainConfig cfg_a = quick_config(2, LossKind::categorical_crossentropy, 10);
  TrainConfig cfg_b = quick_config(3, LossKind::categorical_crossentropy, 11);
  cfg_a.batch_size = cfg_b.batch_size = 16;

  const TransferResult r = pretrain_transfer(init, {a.train, a.val}, {b.train, b.val}, cfg_a, cfg_b, false);
  CHECK(r.phase_a.size() == 2);
  CHECK(r.phase_b.size() == 3);
  CHECK(r.handoff_checksum == r.phase_a_end_checksum);
  CHECK(r.handoff_checksum != body_checksum(init));

  // Zero pre-training epochs is plain training on phase B.
  TrainConfig none = cfg_a;
  none.epochs = 0;
  const TransferResult skipped =
      pretrain_transfer(init, {a.train, a.val}, {b.train, b.val}, none, cfg_b, false);
  const TrainResult plain = train(init, b.train, b.val, cfg_b);
  CHECK(skipped.phase_a.empty());
  CHECK(same_params(skipped.params, plain.params));
  CHECK(skipped.handoff_checksum == body_checksum(init));

  // Re-initializing the head leaves the body untouched at the handoff.
  const TransferResult fresh =
      pretrain_transfer(init, {a.train, a.val}, {b.train, b.val}, cfg_a, cfg_b, true);
  CHECK(fresh.handoff_checksum == r.phase_a_end_checksum);
  CHECK_FALSE(same_params(fresh.params, r.params));

  const ToySplit three = toy_split(3, LabelColumn::second, 0.85, 8);
  CHECK_THROWS_AS(pretrain_transfer(init, {a.train, a.val}, {three.train, three.val}, cfg_a, cfg_b,
                                    false),
                  std::invalid_argument);
}

TEST_CASE("optimizer state stays out of the model checksum") {
  const ModelParams p = ModelParams::init(support::tiny_config(2, OutputPeephole::current_cell), 3);
  const auto before = body_checksum(p);
  const auto all_before = tensor_checksum(p.tensors());
  Optimizer opt(OptimizerConfig::adam());
  ModelParams copy = p;
  opt.step(copy, ModelParams::zeros(p.config));
  CHECK(body_checksum(copy) == before);
  CHECK(tensor_checksum(std::as_const(copy).tensors()) == all_before);
}

TEST_CASE("checkpoint round trip is bit exact") {
  support::TempDir dir("ckpt");
  ModelConfig cfg = support::tiny_config(3, OutputPeephole::previous_cell, 0.3);
  cfg.use_bias = true;
  ModelParams p = ModelParams::init(cfg, 77);
  p.head_bias = Matrix{{0.1, -1e-300, 1.0 / 3.0}};
  save_checkpoint(p, dir.path() / "a");
  const ModelParams back = load_checkpoint(dir.path() / "a");
  CHECK(back.config == cfg);
  CHECK(same_params(back, p));
  save_checkpoint(back, dir.path() / "b");
  CHECK(support::slurp(dir.path() / "a.json") == support::slurp(dir.path() / "b.json"));
  CHECK(support::slurp(dir.path() / "a.bin") == support::slurp(dir.path() / "b.bin"));
  CHECK(support::slurp(dir.path() / "a.bin").size() == p.parameter_count() * 8);
  const auto manifest = nlohmann::json::parse(support::slurp(dir.path() / "a.json"));
  CHECK(manifest["tensors"][0]["name"] == "embedding");
  CHECK(manifest["config"]["output_peephole"] == "previous");
}

TEST_CASE("checkpoint corruption and shape errors") {
  support::TempDir dir("ckpt_bad");
  const ModelConfig three = support::tiny_config(3, OutputPeephole::current_cell);
  save_checkpoint(ModelParams::init(three, 1), dir.path() / "m");

  ModelConfig two = three;
  two.n_out = 2;
  try {
    load_checkpoint(dir.path() / "m", two);
    FAIL("expected a shape error");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("head.weights") != std::string::npos);
  }

  const std::string payload = support::slurp(dir.path() / "m.bin");
  std::ofstream(dir.path() / "m.bin", std::ios::binary) << payload.substr(0, payload.size() - 8);
  try {
    load_checkpoint(dir.path() / "m");
    FAIL("expected a checksum error");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
  std::string flipped = payload;
  flipped[100] = static_cast<char>(flipped[100] ^ 1);
  std::ofstream(dir.path() / "m.bin", std::ios::binary) << flipped;
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "m"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing"), CheckpointError);
}

TEST_CASE("optimizer state sidecar round trip") {
  support::TempDir dir("opt");
  const ModelConfig cfg = support::tiny_config(2, OutputPeephole::current_cell);
  ModelParams p = ModelParams::init(cfg, 2);
  Optimizer opt(OptimizerConfig::adam(0.02));
  const std::vector<int> classes{1, 0};
  train_step(p, opt, support::tiny_batch(), classes, LossKind::categorical_crossentropy, 3);
  save_optimizer_state(opt.state(), dir.path() / "m");
  const OptimizerState back = load_optimizer_state(dir.path() / "m", cfg);
  CHECK(back.step == 1);
  CHECK(back.config.lr == 0.02);
  REQUIRE(back.first_moment);
  CHECK(same_params(*back.first_moment, *opt.state().first_moment));
  CHECK(same_params(*back.second_moment, *opt.state().second_moment));

  // Resuming from the restored state matches continuing in memory.
  ModelParams q = p;
  Optimizer resumed(back.config);
  resumed.restore(back);
  train_step(p, opt, support::tiny_batch(), classes, LossKind::categorical_crossentropy, 4);
  train_step(q, resumed, support::tiny_batch(), classes, LossKind::categorical_crossentropy, 4);
  CHECK(same_params(p, q));
}
