#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "brsent/experiment.hpp"
#include "brsent/synthetic.hpp"
#include "json.hpp"

namespace brsent {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "out";
};

RunSettings load_settings(const CommonOptions& common, SettingsMap* raw = nullptr) {
  RunSettings settings;
  if (!common.config.empty()) {
    SettingsMap values = read_settings_file(common.config);
    apply_settings(values, settings);
    if (raw != nullptr) *raw = std::move(values);
  }
  if (common.seed) {
    settings.master_seed = *common.seed;
    settings.train.seed = *common.seed;
  }
  return settings;
}

DatasetTag parse_dataset_option(const std::string& text) {
  return parse_tag(text + "_cat_PN_ra_1").dataset;
}

int n_out_for(LossKind loss, LabelMod mod) {
  ExperimentConfig c;
  c.loss = loss;
  c.label_mod = mod;
  c.validate();
  return c.n_out();
}

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios r;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> r.train >> c1 >> r.val >> c2 >> r.test) || c1 != ',' || c2 != ',') {
    throw TagError("ratios must look like 0.7,0.15,0.15");
  }
  return r;
}

void print_report_line(std::ostream& out, const ExperimentReport& r) {
  out << std::left << std::setw(26) << r.config.tag() << std::right << std::fixed
      << std::setprecision(4) << " acc " << r.test_accuracy << "  chance " << r.chance
      << "  margin " << std::showpos << r.margin_over_chance << std::noshowpos << '\n';
  out.unsetf(std::ios::fixed);
}

// ---------------------------------------------------------------------------

int cmd_prepare(const CommonOptions& common, const std::string& corpus_path,
                const std::string& dataset, const std::string& text_mode,
                const std::string& vocab_mode, std::size_t cap, std::optional<std::size_t> maxlen,
                const std::string& lexicon, std::ostream& out) {
  const RunSettings settings = load_settings(common);
  const auto corpus = load_corpus_jsonl(corpus_path);
  const CorpusStats stats = corpus_stats(corpus);
  const auto rows = filter_dataset(corpus, parse_dataset_option(dataset));
  if (rows.empty()) throw DataError("dataset filter left no rows");
  if (text_mode != "PN" && text_mode != "FT") throw TagError("--text-mode must be PN or FT");
  const TextMode mode = text_mode == "PN" ? TextMode::pn : TextMode::ft;
  std::optional<ProperNounReplacer> replacer;
  if (!lexicon.empty()) replacer = ProperNounReplacer::from_file(lexicon);

  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : rows) {
    tokens.push_back(tokenize(normalize_text(select_text(s, mode, replacer ? &*replacer : nullptr))));
  }
  VocabMode vm;
  if (vocab_mode == "full") {
    vm = VocabMode::full();
  } else if (vocab_mode == "fixed") {
    vm = VocabMode::fixed(cap);
  } else {
    throw TagError("--vocab must be full or fixed");
  }
  const Vocab vocab = build_vocab(tokens, vm);
  EncodedDataset ds;
  ds.maxlen = maxlen.value_or(settings.model.maxlen);
  ds.vocab_size = vocab.size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ds.sequences.push_back(encode(tokens[r], vocab, ds.maxlen));
    ds.labels1.push_back(rows[r].label1);
    ds.labels2.push_back(rows[r].label2);
    ds.sample_ids.push_back(rows[r].id);
  }
  fs::create_directories(common.out);
  write_encoded(ds, vocab, fs::path(common.out) / "dataset.enc");
  std::ofstream tsv(fs::path(common.out) / "vocab.tsv");
  write_vocab_tsv(vocab, tsv);

  out << "corpus rows   " << stats.total << '\n';
  for (const auto& [source, count] : stats.per_source) {
    out << "  " << std::left << std::setw(10) << format_source(source) << std::right << count
        << '\n';
  }
  out << "  bangla    " << stats.bangla << "\n  romanized " << stats.romanized << '\n';
  out << "encoded rows  " << ds.size() << " (maxlen " << ds.maxlen << ")\n";
  out << "vocab size    " << vocab.size() << '\n';
  return 0;
}

int cmd_split(const CommonOptions& common, const std::string& input, const std::string& ratios,
              std::ostream& out) {
  const RunSettings settings = load_settings(common);
  SplitRatios r = ratios.empty() ? settings.split : parse_ratios(ratios);
  const EncodedFile file = read_encoded(fs::path(input));
  DatasetSplits splits;
  try {
    splits = split_shuffle(file.dataset, r, settings.master_seed);
  } catch (const std::invalid_argument& e) {
    throw TagError(e.what());
  }
  fs::create_directories(common.out);
  write_encoded(splits.train, file.vocab, fs::path(common.out) / "train.enc");
  write_encoded(splits.val, file.vocab, fs::path(common.out) / "val.enc");
  write_encoded(splits.test, file.vocab, fs::path(common.out) / "test.enc");
  out << "train " << splits.train.size() << "\nval   " << splits.val.size() << "\ntest  "
      << splits.test.size() << '\n';
  return 0;
}

int cmd_agree(const CommonOptions& common, const std::string& corpus_path, bool as_json,
              bool write_file, std::ostream& out) {
  const auto corpus = load_corpus_jsonl(corpus_path);
  std::vector<Label> first, second;
  for (const auto& s : corpus) {
    first.push_back(s.label1);
    second.push_back(s.label2);
  }
  if (first.empty()) throw DataError("corpus is empty");
  const AgreementReport report = confusion_matrix(first, second);
  out << (as_json ? report.to_json() + "\n" : report.to_table());
  if (write_file) {
    fs::create_directories(common.out);
    std::ofstream(fs::path(common.out) / "agreement.json") << report.to_json() << '\n';
  }
  return 0;
}

LabeledSequences labeled_from_file(const EncodedFile& file, const std::string& column,
                                   const std::string& label_mod) {
  return apply_label_mod(file.dataset, parse_label_column(column), parse_label_mod(label_mod));
}

int cmd_train(const CommonOptions& common, const std::string& train_path,
              const std::string& val_path, const std::string& column,
              const std::string& label_mod, const std::string& loss_text,
              std::optional<int> epochs, const std::string& init, std::ostream& out) {
  RunSettings settings = load_settings(common);
  if (epochs) settings.train.epochs = *epochs;
  const LossKind loss = parse_loss_kind(loss_text);
  const LabelMod mod = parse_label_mod(label_mod);
  const int n_out = n_out_for(loss, mod);

  const EncodedFile train_file = read_encoded(fs::path(train_path));
  const EncodedFile val_file = read_encoded(fs::path(val_path));
  if (!(train_file.vocab == val_file.vocab)) {
    throw DataError("training and validation files use different vocabularies");
  }
  const LabeledSequences train_set = labeled_from_file(train_file, column, label_mod);
  const LabeledSequences val_set = labeled_from_file(val_file, column, label_mod);

  ModelConfig cfg;
  cfg.vocab_size = train_file.vocab.size();
  cfg.embed_dim = settings.model.embed_dim;
  cfg.hidden = settings.model.hidden;
  cfg.n_out = n_out;
  cfg.dropout_rate = settings.model.dropout_rate;
  cfg.output_peephole = settings.model.output_peephole;
  cfg.use_bias = settings.model.use_bias;
  ModelParams params = init.empty() ? ModelParams::init(cfg, derive_seed(settings.master_seed, 2))
                                    : load_checkpoint(init, cfg);

  TrainConfig tc = settings.train;
  tc.loss = loss;
  tc.seed = derive_seed(settings.master_seed, 3);
  tc.batch_size = std::min(tc.batch_size, train_set.size());
  TrainResult result = train(std::move(params), train_set, val_set, tc);

  const fs::path dir(common.out);
  fs::create_directories(dir);
  save_checkpoint(result.params, dir / "checkpoint");
  save_optimizer_state(result.optimizer, dir / "checkpoint");
  if (!result.history.empty()) emit_curves(result.history, dir, "train");
  if (!result.history.empty()) {
    const auto& last = result.history.records.back();
    out << "epochs " << result.history.size() << "  loss " << last.loss << "  val_loss "
        << last.val_loss << "  acc " << last.acc << "  val_acc " << last.val_acc << '\n';
  }
  out << "checkpoint " << (dir / "checkpoint").string() << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path, const std::string& column,
             const std::string& label_mod, std::ostream& out) {
  const ModelParams params = load_checkpoint(checkpoint);
  const EncodedFile file = read_encoded(fs::path(data_path));
  if (file.vocab.size() != params.config.vocab_size) {
    throw DataError("dataset vocabulary does not match the checkpoint");
  }
  const LabeledSequences data = labeled_from_file(file, column, label_mod);
  const LossKind loss = params.config.n_out == 1 ? LossKind::binary_crossentropy
                                                 : LossKind::categorical_crossentropy;
  const Evaluation e = evaluate(params, data, loss);
  nlohmann::json j{{"rows", data.size()},
                   {"loss", e.loss},
                   {"accuracy", e.accuracy},
                   {"chance", 1.0 / (params.config.n_out == 1 ? 2 : params.config.n_out)}};
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_run(const CommonOptions& common, const std::string& tag, const std::string& corpus,
            std::ostream& out) {
  SettingsMap raw;
  const RunSettings settings = load_settings(common, &raw);
  ExperimentConfig config;
  if (!tag.empty()) {
    config = parse_tag(tag);
  } else if (auto from_file = experiment_from_settings(raw)) {
    config = *from_file;
  } else {
    throw TagError("run needs an experiment tag or experiment keys in --config");
  }
  if (corpus.empty()) throw TagError("run needs --corpus");
  const ExperimentReport report = run_experiment(config, fs::path(corpus), common.out, settings);
  print_report_line(out, report);
  out << "outputs in " << (fs::path(common.out) / config.tag()).string() << '\n';
  return 0;
}

int cmd_matrix(const CommonOptions& common, const std::string& corpus_path, bool dry_run,
               bool pretrain, unsigned jobs, std::ostream& out, std::ostream& err) {
  const auto cells = enumerate_matrix(pretrain);
  if (dry_run) {
    for (const auto& c : cells) out << c.tag() << '\n';
    return 0;
  }
  if (corpus_path.empty()) throw TagError("matrix needs --corpus unless --dry-run is given");
  const RunSettings settings = load_settings(common);
  const auto corpus = load_corpus_jsonl(corpus_path);

  std::vector<std::optional<ExperimentReport>> reports(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      try {
        reports[k] = run_experiment(cells[k], corpus, common.out, settings);
      } catch (const std::exception& e) {
        failures[k] = e.what();
      }
    }
  };
  jobs = std::max(1u, jobs);
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(common.out);
  std::ofstream summary(fs::path(common.out) / "summary.csv");
  summary << "tag,test_accuracy,test_loss,chance,margin_over_chance\n";
  int status = 0;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!reports[k]) {
      err << "FAILED " << failures[k] << '\n';
      status = 2;
      continue;
    }
    const auto& r = *reports[k];
    print_report_line(out, r);
    summary << r.config.tag() << ',' << r.test_accuracy << ',' << r.test_loss << ',' << r.chance
            << ',' << r.margin_over_chance << '\n';
  }
  return status;
}

int cmd_plot(const CommonOptions& common, const std::string& history_path, const std::string& title,
             std::ostream& out) {
  std::ifstream in(history_path);
  if (!in) throw DataError("cannot open " + history_path);
  const TrainingHistory history = read_history_csv(in);
  if (history.empty()) throw DataError("history is empty");
  emit_curves(history, common.out, title.empty() ? fs::path(history_path).stem().string() : title);
  out << "wrote " << (fs::path(common.out) / "loss.svg").string() << " and "
      << (fs::path(common.out) / "acc.svg").string() << '\n';
  return 0;
}

int cmd_synth(const CommonOptions& common, SyntheticOptions opts, const std::string& scripts,
              std::ostream& out) {
  if (common.seed) opts.seed = *common.seed;
  if (scripts == "romanized") {
    opts.scripts = SyntheticOptions::Scripts::romanized;
  } else if (scripts == "bangla") {
    opts.scripts = SyntheticOptions::Scripts::bangla;
  } else if (scripts == "mixed") {
    opts.scripts = SyntheticOptions::Scripts::mixed;
  } else {
    throw TagError("--scripts must be romanized, bangla or mixed");
  }
  std::vector<TextSample> corpus;
  try {
    corpus = make_keyword_corpus(opts);
  } catch (const std::invalid_argument& e) {
    throw TagError(e.what());
  }
  fs::create_directories(common.out);
  const fs::path path = fs::path(common.out) / "corpus.jsonl";
  std::ofstream file(path);
  write_corpus_jsonl(corpus, file);
  out << "wrote " << corpus.size() << " samples to " << path.string() << '\n';
  return 0;
}

}  // namespace

int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bangla / Romanized Bangla sentiment toolkit", "brsent"};
  app.require_subcommand(1);
  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--config", common.config, "Settings file (JSON or key = value lines)");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
  };

  std::string corpus, dataset = "brbt", text_mode = "PN", vocab_mode = "full", lexicon;
  std::size_t cap = 500;
  std::optional<std::size_t> maxlen;
  auto* prepare = app.add_subcommand("prepare", "Normalize, tokenize and encode a JSONL corpus");
  prepare->add_option("--corpus", corpus, "Corpus JSONL")->required();
  prepare->add_option("--dataset", dataset, "brbt, bangla or rb")->capture_default_str();
  prepare->add_option("--text-mode", text_mode, "PN or FT")->capture_default_str();
  prepare->add_option("--vocab", vocab_mode, "full or fixed")->capture_default_str();
  prepare->add_option("--cap", cap, "Fixed vocabulary cap")->capture_default_str();
  prepare->add_option("--maxlen", maxlen, "Sequence length");
  prepare->add_option("--lexicon", lexicon, "Proper-noun lexicon for rows without PN text");
  add_common(prepare);

  std::string input, ratios;
  auto* split = app.add_subcommand("split", "Shuffle and split an encoded dataset");
  split->add_option("--input", input, "Encoded dataset")->required();
  split->add_option("--ratios", ratios, "train,val,test fractions (default 0.7,0.15,0.15)");
  add_common(split);

  bool as_json = false;
  auto* agree = app.add_subcommand("agree", "Annotator agreement report");
  agree->add_option("--corpus", corpus, "Corpus JSONL")->required();
  agree->add_flag("--json", as_json, "Print JSON instead of the table");
  add_common(agree);

  std::string train_path, val_path, column = "label1", label_mod = "ra", loss = "cat", init;
  std::optional<int> epochs;
  auto* train_cmd = app.add_subcommand("train", "Train on encoded train/val files");
  train_cmd->add_option("--train", train_path, "Encoded training set")->required();
  train_cmd->add_option("--val", val_path, "Encoded validation set")->required();
  train_cmd->add_option("--labels", column, "label1 or label2")->capture_default_str();
  train_cmd->add_option("--label-mod", label_mod, "ra or ato2")->capture_default_str();
  train_cmd->add_option("--loss", loss, "bin or cat")->capture_default_str();
  train_cmd->add_option("--epochs", epochs, "Epoch count (overrides the config)");
  train_cmd->add_option("--init", init, "Checkpoint stem to continue from");
  add_common(train_cmd);

  std::string checkpoint, data_path;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on an encoded file");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint stem")->required();
  eval_cmd->add_option("--data", data_path, "Encoded dataset")->required();
  eval_cmd->add_option("--labels", column, "label1 or label2")->capture_default_str();
  eval_cmd->add_option("--label-mod", label_mod, "ra or ato2")->capture_default_str();
  add_common(eval_cmd);

  std::string tag;
  auto* run = app.add_subcommand("run", "Run one experiment tag end to end");
  run->add_option("tag", tag, "Experiment tag, e.g. bangla_cat_PN_ra_1");
  run->add_option("--corpus", corpus, "Corpus JSONL");
  add_common(run);

  bool dry_run = false, pretrain = false;
  unsigned jobs = 1;
  auto* matrix = app.add_subcommand("matrix", "Run every experiment tag");
  matrix->add_option("--corpus", corpus, "Corpus JSONL");
  matrix->add_flag("--dry-run", dry_run, "Only list the tags");
  matrix->add_flag("--pretrain", pretrain, "Use the 72 pre-training cells");
  matrix->add_option("--jobs", jobs, "Parallel cells")->capture_default_str();
  add_common(matrix);

  std::string history, title;
  auto* plot = app.add_subcommand("plot", "Render loss/accuracy SVGs from a history CSV");
  plot->add_option("--history", history, "history.csv")->required();
  plot->add_option("--title", title, "Plot title");
  add_common(plot);

  SyntheticOptions synth_opts;
  std::string scripts = "romanized";
  auto* synth = app.add_subcommand("synth", "Write a synthetic keyword corpus");
  synth->add_option("--samples", synth_opts.samples)->capture_default_str();
  synth->add_option("--classes", synth_opts.num_classes, "2 or 3")->capture_default_str();
  synth->add_option("--scripts", scripts, "romanized, bangla or mixed")->capture_default_str();
  synth->add_option("--agreement", synth_opts.second_agreement, "Share of matching label2")
      ->capture_default_str();
  add_common(synth);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (!args.empty() && !args.front().starts_with('-') &&
        app.get_subcommand_no_throw(args.front()) == nullptr) {
      err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
      return 1;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (prepare->parsed()) {
      return cmd_prepare(common, corpus, dataset, text_mode, vocab_mode, cap, maxlen, lexicon, out);
    }
    if (split->parsed()) return cmd_split(common, input, ratios, out);
    if (agree->parsed()) return cmd_agree(common, corpus, as_json, agree->count("--out") > 0, out);
    if (train_cmd->parsed()) {
      return cmd_train(common, train_path, val_path, column, label_mod, loss, epochs, init, out);
    }
    if (eval_cmd->parsed()) return cmd_eval(checkpoint, data_path, column, label_mod, out);
    if (run->parsed()) return cmd_run(common, tag, corpus, out);
    if (matrix->parsed()) return cmd_matrix(common, corpus, dry_run, pretrain, jobs, out, err);
    if (plot->parsed()) return cmd_plot(common, history, title, out);
    if (synth->parsed()) return cmd_synth(common, synth_opts, scripts, out);
  } catch (const TagError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace brsent
