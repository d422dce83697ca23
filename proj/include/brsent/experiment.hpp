#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brsent/annotations.hpp"
#include "brsent/corpus.hpp"
#include "brsent/recurrent.hpp"
#include "brsent/training.hpp"

namespace brsent {

// Malformed or illegal experiment tag / configuration value.
class TagError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DatasetTag { brbt, bangla, rb };
enum class TextMode { pn, ft };
enum class VocabTag { full = 1, fixed = 2 };
enum class PretrainOrder { none, label1_first, label2_first };

// One cell of the experiment matrix.
//
// Tag grammar: <dataset>_<loss>_<text>_<labelmod>_<vocab>[_<column>]
//   dataset   brbt | bangla | rb          (parsed case-insensitively)
//   loss      bin | cat
//   text      PN | FT
//   labelmod  ra | ato2
//   vocab     1 (every corpus token) | 2 (capped at 500)
//   column    l2    train and test on the second annotation
//             pre1  pre-train on the first annotation, then the second
//             pre2  pre-train on the second annotation, then the first
// Without a suffix the first annotation is used and nothing is pre-trained.
struct ExperimentConfig {
  DatasetTag dataset = DatasetTag::brbt;
  TextMode text_mode = TextMode::pn;
  LossKind loss = LossKind::categorical_crossentropy;
  LabelMod label_mod = LabelMod::remove_ambiguous;
  VocabTag vocab_tag = VocabTag::full;
  LabelColumn active_labels = LabelColumn::first;
  PretrainOrder pretrain_order = PretrainOrder::none;

  // Throws TagError naming the violated rule.
  void validate() const;
  int n_out() const;
  int num_classes() const;
  double chance() const { return 1.0 / num_classes(); }
  std::string tag() const;
  std::optional<LabelColumn> pretrain_column() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_tag(std::string_view tag);
std::string format_tag(const ExperimentConfig& config);

// 36 cells without pre-training, or the 72 pre-training cells (both annotator
// orders), sorted by tag string.
std::vector<ExperimentConfig> enumerate_matrix(bool include_pretrain);

std::string_view format_dataset(DatasetTag d);
std::string_view format_text_mode(TextMode t);
std::string_view format_pretrain_order(PretrainOrder p);

// ---------------------------------------------------------------------------

struct ModelSettings {
  std::size_t embed_dim = 128;
  std::size_t hidden = 128;
  std::size_t maxlen = 128;
  double dropout_rate = 0.2;
  OutputPeephole output_peephole = OutputPeephole::current_cell;
  bool use_bias = false;
};

struct RunSettings {
  ModelSettings model;
  TrainConfig train;  // loss and seed are overridden per cell
  std::optional<int> pretrain_epochs;  // defaults to train.epochs
  SplitRatios split;
  std::uint64_t master_seed = 0;
  std::size_t fixed_vocab_cap = 500;
  bool reinit_head = false;
  std::optional<std::filesystem::path> lexicon;
  bool write_checkpoint = true;
};

// Flat key/value settings as read from a config file. Keys mirror the field
// names of TrainConfig, ModelSettings, RunSettings and ExperimentConfig.
using SettingsMap = std::map<std::string, std::string>;

// JSON object when the file starts with '{', otherwise `key = value` lines
// with '#' comments. Throws TagError on syntax errors.
SettingsMap read_settings_file(const std::filesystem::path& path);
// Applies recognised run keys; throws TagError on an unknown key or bad value.
void apply_settings(const SettingsMap& values, RunSettings& settings);
// Builds an experiment config from dataset/text_mode/loss_tag/label_mod/
// vocab_tag/active_labels/pretrain_order keys, if any are present.
std::optional<ExperimentConfig> experiment_from_settings(const SettingsMap& values);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::size_t corpus_rows = 0;
  SplitSizes split_rows;     // before the label transform
  SplitSizes labeled_rows;   // after it
  std::size_t vocab_size = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double chance = 0.0;
  double margin_over_chance = 0.0;
  TrainingHistory history;
  std::optional<TrainingHistory> pretrain_history;
  double wall_seconds = 0.0;
  ModelSettings model;
  TrainConfig train;

  std::string to_json() const;
};

// Per-cell seed from the master seed and the tag.
std::uint64_t cell_seed(std::uint64_t master_seed, std::string_view tag);

// Rows whose raw text passes the dataset's script filter.
std::vector<TextSample> filter_dataset(std::span<const TextSample> corpus, DatasetTag dataset);

// FT -> raw text. PN -> modified text, or the raw text run through the
// lexicon replacer when no modified text exists.
std::string select_text(const TextSample& sample, TextMode mode,
                        const ProperNounReplacer* replacer);

// Filter, normalize, tokenize, build vocab, encode, split, transform labels,
// train (with the optional pre-training phase), evaluate on the test split and
// write everything under out_dir/<tag>/. Errors are rethrown as DataError
// prefixed with the tag.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                std::span<const TextSample> corpus,
                                const std::filesystem::path& out_dir, const RunSettings& settings);
ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& corpus_path,
                                const std::filesystem::path& out_dir, const RunSettings& settings);

// ---------------------------------------------------------------------------
// Curves

struct CurveSeries {
  std::string name;
  std::vector<double> values;  // one per epoch
};

std::string render_curve_svg(std::string_view title, std::string_view y_label,
                             std::span<const CurveSeries> series);

// Writes <prefix>history.csv, <prefix>loss.svg and <prefix>acc.svg into
// out_dir. Throws std::invalid_argument on an empty history.
void emit_curves(const TrainingHistory& history, const std::filesystem::path& out_dir,
                 std::string_view title, std::string_view prefix = "");

// ---------------------------------------------------------------------------

// Entry point for the brsent tool. Exit 0 on success, 1 on usage errors,
// 2 on data errors.
int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace brsent
