#include "brsent/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "byte_io.hpp"
#include "json.hpp"

namespace brsent {

using nlohmann::json;

namespace {

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view format_dataset(DatasetTag d) {
  switch (d) {
    case DatasetTag::brbt:
      return "brbt";
    case DatasetTag::bangla:
      return "bangla";
    case DatasetTag::rb:
      return "rb";
  }
  return "?";
}

std::string_view format_text_mode(TextMode t) { return t == TextMode::pn ? "PN" : "FT"; }

std::string_view format_pretrain_order(PretrainOrder p) {
  switch (p) {
    case PretrainOrder::none:
      return "none";
    case PretrainOrder::label1_first:
      return "label1_first";
    case PretrainOrder::label2_first:
      return "label2_first";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (label_mod == LabelMod::ambiguous_to_two && loss != LossKind::categorical_crossentropy) {
    throw TagError("bin is incompatible with ato2: three classes need the categorical loss");
  }
  if (pretrain_order == PretrainOrder::label1_first && active_labels != LabelColumn::second) {
    throw TagError("pre-training on label1 requires label2 as the active column");
  }
  if (pretrain_order == PretrainOrder::label2_first && active_labels != LabelColumn::first) {
    throw TagError("pre-training on label2 requires label1 as the active column");
  }
}

int ExperimentConfig::n_out() const {
  if (label_mod == LabelMod::ambiguous_to_two) return 3;
  return loss == LossKind::binary_crossentropy ? 1 : 2;
}

int ExperimentConfig::num_classes() const {
  return label_mod == LabelMod::ambiguous_to_two ? 3 : 2;
}

std::optional<LabelColumn> ExperimentConfig::pretrain_column() const {
  if (pretrain_order == PretrainOrder::label1_first) return LabelColumn::first;
  if (pretrain_order == PretrainOrder::label2_first) return LabelColumn::second;
  return std::nullopt;
}

std::string ExperimentConfig::tag() const { return format_tag(*this); }

std::string format_tag(const ExperimentConfig& c) {
  std::string tag;
  tag += format_dataset(c.dataset);
  tag += c.loss == LossKind::binary_crossentropy ? "_bin" : "_cat";
  tag += '_';
  tag += format_text_mode(c.text_mode);
  tag += '_';
  tag += format_label_mod(c.label_mod);
  tag += c.vocab_tag == VocabTag::full ? "_1" : "_2";
  if (c.pretrain_order == PretrainOrder::label1_first) {
    tag += "_pre1";
  } else if (c.pretrain_order == PretrainOrder::label2_first) {
    tag += "_pre2";
  } else if (c.active_labels == LabelColumn::second) {
    tag += "_l2";
  }
  return tag;
}

ExperimentConfig parse_tag(std::string_view tag) {
  const auto parts = split_on(tag, '_');
  if (parts.size() != 5 && parts.size() != 6) {
    throw TagError("tag '" + std::string(tag) +
                   "' does not match <dataset>_<loss>_<text>_<labelmod>_<vocab>[_<column>]");
  }
  auto bad = [&](std::string_view field, const std::string& token, std::string_view allowed) {
    return TagError("tag '" + std::string(tag) + "': unknown " + std::string(field) + " '" +
                    token + "' (expected " + std::string(allowed) + ")");
  };
  ExperimentConfig c;
  const std::string dataset = lower_ascii(parts[0]);
  if (dataset == "brbt") {
    c.dataset = DatasetTag::brbt;
  } else if (dataset == "bangla") {
    c.dataset = DatasetTag::bangla;
  } else if (dataset == "rb") {
    c.dataset = DatasetTag::rb;
  } else {
    throw bad("dataset", parts[0], "brbt, bangla or rb");
  }
  if (parts[1] == "bin") {
    c.loss = LossKind::binary_crossentropy;
  } else if (parts[1] == "cat") {
    c.loss = LossKind::categorical_crossentropy;
  } else {
    throw bad("loss", parts[1], "bin or cat");
  }
  if (parts[2] == "PN") {
    c.text_mode = TextMode::pn;
  } else if (parts[2] == "FT") {
    c.text_mode = TextMode::ft;
  } else {
    throw bad("text mode", parts[2], "PN or FT");
  }
  if (parts[3] == "ra") {
    c.label_mod = LabelMod::remove_ambiguous;
  } else if (parts[3] == "ato2") {
    c.label_mod = LabelMod::ambiguous_to_two;
  } else {
    throw bad("label modification", parts[3], "ra or ato2");
  }
  if (parts[4] == "1") {
    c.vocab_tag = VocabTag::full;
  } else if (parts[4] == "2") {
    c.vocab_tag = VocabTag::fixed;
  } else {
    throw bad("vocabulary mode", parts[4], "1 or 2");
  }
  if (parts.size() == 6) {
    if (parts[5] == "l2") {
      c.active_labels = LabelColumn::second;
    } else if (parts[5] == "pre1") {
      c.pretrain_order = PretrainOrder::label1_first;
      c.active_labels = LabelColumn::second;
    } else if (parts[5] == "pre2") {
      c.pretrain_order = PretrainOrder::label2_first;
      c.active_labels = LabelColumn::first;
    } else {
      throw bad("label column", parts[5], "l2, pre1 or pre2");
    }
  }
  try {
    c.validate();
  } catch (const TagError& e) {
    throw TagError("tag '" + std::string(tag) + "': " + e.what());
  }
  return c;
}

std::vector<ExperimentConfig> enumerate_matrix(bool include_pretrain) {
  std::vector<ExperimentConfig> cells;
  for (auto dataset : {DatasetTag::brbt, DatasetTag::bangla, DatasetTag::rb}) {
    for (auto text : {TextMode::pn, TextMode::ft}) {
      for (auto [mod, loss] : {std::pair{LabelMod::remove_ambiguous, LossKind::binary_crossentropy},
                               std::pair{LabelMod::remove_ambiguous, LossKind::categorical_crossentropy},
                               std::pair{LabelMod::ambiguous_to_two, LossKind::categorical_crossentropy}}) {
        for (auto vocab : {VocabTag::full, VocabTag::fixed}) {
          ExperimentConfig c{dataset, text, loss, mod, vocab};
          if (!include_pretrain) {
            cells.push_back(c);
            continue;
          }
          c.pretrain_order = PretrainOrder::label1_first;
          c.active_labels = LabelColumn::second;
          cells.push_back(c);
          c.pretrain_order = PretrainOrder::label2_first;
          c.active_labels = LabelColumn::first;
          cells.push_back(c);
        }
      }
    }
  }
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.tag() < b.tag(); });
  return cells;
}

// ---------------------------------------------------------------------------
// Settings

SettingsMap read_settings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TagError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  SettingsMap values;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw TagError(path.string() + ": " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      values[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    return values;
  }
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(lines, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw TagError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    values[key] = value;
  }
  return values;
}

namespace {

const std::vector<std::string> kExperimentKeys = {"dataset",   "text_mode",     "loss_tag",
                                                  "label_mod", "vocab_tag",     "active_labels",
                                                  "pretrain_order"};

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw TagError("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw TagError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw TagError("config key '" + key + "': '" + v + "' is not a boolean");
}

}  // namespace

void apply_settings(const SettingsMap& values, RunSettings& s) {
  for (const auto& [key, v] : values) {
    try {
      if (key == "epochs") {
        s.train.epochs = static_cast<int>(to_unsigned(key, v));
      } else if (key == "batch_size") {
        s.train.batch_size = to_unsigned(key, v);
      } else if (key == "optimizer") {
        s.train.optimizer.kind = parse_optimizer(v);
      } else if (key == "lr") {
        s.train.optimizer.lr = to_double(key, v);
      } else if (key == "beta1") {
        s.train.optimizer.beta1 = to_double(key, v);
      } else if (key == "beta2") {
        s.train.optimizer.beta2 = to_double(key, v);
      } else if (key == "epsilon") {
        s.train.optimizer.epsilon = to_double(key, v);
      } else if (key == "seed") {
        s.master_seed = to_unsigned(key, v);
        s.train.seed = s.master_seed;
      } else if (key == "loss") {
        s.train.loss = parse_loss_kind(v);
      } else if (key == "pretrain_epochs") {
        s.pretrain_epochs = static_cast<int>(to_unsigned(key, v));
      } else if (key == "embed_dim") {
        s.model.embed_dim = to_unsigned(key, v);
      } else if (key == "hidden") {
        s.model.hidden = to_unsigned(key, v);
      } else if (key == "maxlen") {
        s.model.maxlen = to_unsigned(key, v);
      } else if (key == "dropout_rate") {
        s.model.dropout_rate = to_double(key, v);
      } else if (key == "output_peephole") {
        s.model.output_peephole = parse_output_peephole(v);
      } else if (key == "use_bias") {
        s.model.use_bias = to_bool(key, v);
      } else if (key == "train_ratio") {
        s.split.train = to_double(key, v);
      } else if (key == "val_ratio") {
        s.split.val = to_double(key, v);
      } else if (key == "test_ratio") {
        s.split.test = to_double(key, v);
      } else if (key == "fixed_vocab_cap") {
        s.fixed_vocab_cap = to_unsigned(key, v);
      } else if (key == "reinit_head") {
        s.reinit_head = to_bool(key, v);
      } else if (key == "lexicon") {
        s.lexicon = std::filesystem::path(v);
      } else if (key == "write_checkpoint") {
        s.write_checkpoint = to_bool(key, v);
      } else if (std::find(kExperimentKeys.begin(), kExperimentKeys.end(), key) ==
                 kExperimentKeys.end()) {
        throw TagError("unknown config key '" + key + "'");
      }
    } catch (const TagError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw TagError("config key '" + key + "': " + e.what());
    }
  }
}

std::optional<ExperimentConfig> experiment_from_settings(const SettingsMap& values) {
  const bool any = std::any_of(kExperimentKeys.begin(), kExperimentKeys.end(),
                               [&](const auto& k) { return values.contains(k); });
  if (!any) return std::nullopt;
  auto get = [&](const std::string& key, const std::string& fallback) {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  };
  std::string tag = get("dataset", "brbt") + "_" + get("loss_tag", "cat") + "_" +
                    get("text_mode", "PN") + "_" + get("label_mod", "ra") + "_" +
                    get("vocab_tag", "1");
  ExperimentConfig c = parse_tag(tag);
  const std::string order = get("pretrain_order", "none");
  if (order == "label1_first") {
    c.pretrain_order = PretrainOrder::label1_first;
  } else if (order == "label2_first") {
    c.pretrain_order = PretrainOrder::label2_first;
  } else if (order != "none") {
    throw TagError("pretrain_order must be none, label1_first or label2_first");
  }
  try {
    c.active_labels = parse_label_column(
        get("active_labels", c.pretrain_order == PretrainOrder::label1_first ? "label2" : "label1"));
  } catch (const std::invalid_argument& e) {
    throw TagError(e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

std::uint64_t cell_seed(std::uint64_t master_seed, std::string_view tag) {
  return derive_seed(master_seed, detail::crc32_of(std::string(tag)));
}

std::vector<TextSample> filter_dataset(std::span<const TextSample> corpus, DatasetTag dataset) {
  std::vector<TextSample> out;
  for (const auto& s : corpus) {
    const Script script = detect_script(s.raw_text);
    if (dataset == DatasetTag::brbt || (dataset == DatasetTag::bangla && script == Script::bangla) ||
        (dataset == DatasetTag::rb && script == Script::romanized)) {
      out.push_back(s);
    }
  }
  return out;
}

std::string select_text(const TextSample& sample, TextMode mode,
                        const ProperNounReplacer* replacer) {
  if (mode == TextMode::ft) return sample.raw_text;
  if (sample.modified_text) return *sample.modified_text;
  return replacer != nullptr ? replacer->apply(sample.raw_text) : sample.raw_text;
}

std::string ExperimentReport::to_json() const {
  auto sizes = [](const SplitSizes& s) {
    return json{{"train", s.train}, {"val", s.val}, {"test", s.test}};
  };
  json j;
  j["tag"] = config.tag();
  j["config"] = {{"dataset", format_dataset(config.dataset)},
                 {"text_mode", format_text_mode(config.text_mode)},
                 {"loss_tag", config.loss == LossKind::binary_crossentropy ? "bin" : "cat"},
                 {"label_mod", format_label_mod(config.label_mod)},
                 {"vocab_tag", static_cast<int>(config.vocab_tag)},
                 {"active_labels", format_label_column(config.active_labels)},
                 {"pretrain_order", format_pretrain_order(config.pretrain_order)}};
  j["seed"] = seed;
  j["model"] = {{"embed_dim", model.embed_dim},
                {"hidden", model.hidden},
                {"maxlen", model.maxlen},
                {"dropout_rate", model.dropout_rate},
                {"output_peephole", format_output_peephole(model.output_peephole)},
                {"use_bias", model.use_bias},
                {"n_out", config.n_out()}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"optimizer", format_optimizer(train.optimizer.kind)},
                {"lr", train.optimizer.lr},
                {"beta1", train.optimizer.beta1},
                {"beta2", train.optimizer.beta2},
                {"epsilon", train.optimizer.epsilon},
                {"seed", train.seed},
                {"loss", to_string(train.loss)}};
  j["corpus_rows"] = corpus_rows;
  j["split_rows"] = sizes(split_rows);
  j["labeled_rows"] = sizes(labeled_rows);
  j["vocab_size"] = vocab_size;
  j["num_classes"] = config.num_classes();
  j["chance"] = chance;
  j["test_accuracy"] = test_accuracy;
  j["test_loss"] = test_loss;
  j["margin_over_chance"] = margin_over_chance;
  j["epochs_completed"] = history.size();
  j["history"] = "history.csv";
  j["pretrain_history"] = pretrain_history ? json("pretrain_history.csv") : json(nullptr);
  j["wall_time_seconds"] = wall_seconds;
  return j.dump(2);
}

namespace {

ExperimentReport run_experiment_impl(const ExperimentConfig& config,
                                     std::span<const TextSample> corpus,
                                     const std::filesystem::path& out_dir,
                                     const RunSettings& settings) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  const std::string tag = config.tag();
  ExperimentReport report;
  report.config = config;
  report.seed = cell_seed(settings.master_seed, tag);
  report.model = settings.model;

  const std::vector<TextSample> rows = filter_dataset(corpus, config.dataset);
  if (rows.empty()) throw DataError("dataset filter left no rows");
  report.corpus_rows = rows.size();

  std::optional<ProperNounReplacer> replacer;
  if (settings.lexicon) replacer = ProperNounReplacer::from_file(*settings.lexicon);
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(rows.size());
  for (const auto& s : rows) {
    tokens.push_back(tokenize(normalize_text(
        select_text(s, config.text_mode, replacer ? &*replacer : nullptr))));
  }
  const Vocab vocab = build_vocab(tokens, config.vocab_tag == VocabTag::full
                                              ? VocabMode::full()
                                              : VocabMode::fixed(settings.fixed_vocab_cap));
  report.vocab_size = vocab.size();

  EncodedDataset encoded;
  encoded.maxlen = settings.model.maxlen;
  encoded.vocab_size = vocab.size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    encoded.sequences.push_back(encode(tokens[r], vocab, settings.model.maxlen));
    encoded.labels1.push_back(rows[r].label1);
    encoded.labels2.push_back(rows[r].label2);
    encoded.sample_ids.push_back(rows[r].id);
  }
  const DatasetSplits splits = split_shuffle(encoded, settings.split, derive_seed(report.seed, 1));
  report.split_rows = {splits.train.size(), splits.val.size(), splits.test.size()};

  const LabelColumn active = config.active_labels;
  const LabeledSequences train_set = apply_label_mod(splits.train, active, config.label_mod);
  const LabeledSequences val_set = apply_label_mod(splits.val, active, config.label_mod);
  const LabeledSequences test_set = apply_label_mod(splits.test, active, config.label_mod);
  report.labeled_rows = {train_set.size(), val_set.size(), test_set.size()};

  ModelConfig model_cfg;
  model_cfg.vocab_size = vocab.size();
  model_cfg.embed_dim = settings.model.embed_dim;
  model_cfg.hidden = settings.model.hidden;
  model_cfg.n_out = config.n_out();
  model_cfg.dropout_rate = settings.model.dropout_rate;
  model_cfg.output_peephole = settings.model.output_peephole;
  model_cfg.use_bias = settings.model.use_bias;
  ModelParams params = ModelParams::init(model_cfg, derive_seed(report.seed, 2));

  TrainConfig train_cfg = settings.train;
  train_cfg.loss = config.loss;
  train_cfg.seed = derive_seed(report.seed, 3);
  train_cfg.batch_size = std::min(train_cfg.batch_size, train_set.size());
  report.train = train_cfg;

  if (const auto pre_column = config.pretrain_column()) {
    TransferData phase_a{apply_label_mod(splits.train, *pre_column, config.label_mod),
                         apply_label_mod(splits.val, *pre_column, config.label_mod)};
    TrainConfig pre_cfg = train_cfg;
    pre_cfg.epochs = settings.pretrain_epochs.value_or(train_cfg.epochs);
    pre_cfg.seed = derive_seed(report.seed, 4);
    pre_cfg.batch_size = std::min(settings.train.batch_size, phase_a.train.size());
    TransferResult transfer =
        pretrain_transfer(std::move(params), phase_a, TransferData{train_set, val_set}, pre_cfg,
                          train_cfg, settings.reinit_head);
    params = std::move(transfer.params);
    report.history = std::move(transfer.phase_b);
    report.pretrain_history = std::move(transfer.phase_a);
  } else {
    TrainResult result = train(std::move(params), train_set, val_set, train_cfg);
    params = std::move(result.params);
    report.history = std::move(result.history);
  }

  const Evaluation test = evaluate(params, test_set, config.loss);
  report.test_accuracy = test.accuracy;
  report.test_loss = test.loss;
  report.chance = config.chance();
  report.margin_over_chance = report.test_accuracy - report.chance;

  const std::filesystem::path dir = out_dir / tag;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  if (!report.history.empty()) emit_curves(report.history, dir, tag);
  if (report.pretrain_history && !report.pretrain_history->empty()) {
    emit_curves(*report.pretrain_history, dir, tag + " (pre-training)", "pretrain_");
  }
  if (settings.write_checkpoint) save_checkpoint(params, dir / "checkpoint");
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::ofstream(dir / "report.json") << report.to_json() << '\n';
  return report;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config,
                                std::span<const TextSample> corpus,
                                const std::filesystem::path& out_dir,
                                const RunSettings& settings) {
  try {
    return run_experiment_impl(config, corpus, out_dir, settings);
  } catch (const TagError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(config.tag() + ": " + e.what());
  }
}

ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& corpus_path,
                                const std::filesystem::path& out_dir,
                                const RunSettings& settings) {
  std::vector<TextSample> corpus;
  try {
    corpus = load_corpus_jsonl(corpus_path);
  } catch (const std::exception& e) {
    throw DataError(config.tag() + ": " + e.what());
  }
  return run_experiment(config, corpus, out_dir, settings);
}

}  // namespace brsent
