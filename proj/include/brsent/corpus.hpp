#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "brsent/label.hpp"

namespace brsent {

enum class Source { facebook, twitter, youtube, news, review, other };

Source parse_source(std::string_view text);
std::string_view format_source(Source source);

struct TextSample {
  std::int64_t id = 0;
  std::string raw_text;                      // full text, nothing removed
  std::optional<std::string> modified_text;  // proper nouns already replaced by <PN>
  Label label1 = Label::negative;
  Label label2 = Label::negative;
  Source source = Source::other;
};

// Reads the JSON Lines corpus format. Throws DataError naming the line on any
// malformed record, blank raw text, or duplicate id.
std::vector<TextSample> parse_corpus_jsonl(std::istream& in);
std::vector<TextSample> load_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(std::span<const TextSample> samples, std::ostream& out);

struct CorpusStats {
  std::size_t total = 0;
  std::map<Source, std::size_t> per_source;
  std::size_t bangla = 0;
  std::size_t romanized = 0;
};

// Throws DataError if the per-source or per-script counts do not add up.
CorpusStats corpus_stats(std::span<const TextSample> samples);

// ---------------------------------------------------------------------------
// Script detection

enum class Script { bangla, romanized };

// Bangla iff more than half of the letters are in the Bangla block
// (U+0980..U+09FF minus digits and currency/fraction signs). Letters are those
// Bangla code points plus Latin-script letters. No letters at all -> romanized.
Script detect_script(std::string_view text);

// ---------------------------------------------------------------------------
// Normalization and tokenization

inline constexpr std::string_view kProperNounTag = "<PN>";

struct NormalizeOptions {
  std::vector<std::string> emoticons;
  std::vector<std::pair<char32_t, char32_t>> emoji_ranges;
  bool strip_hashtags = true;
  bool lowercase_latin = true;

  // Tables compiled in from data/normalization.txt.
  static const NormalizeOptions& defaults();
  static NormalizeOptions parse(std::string_view table);
  static NormalizeOptions from_file(const std::filesystem::path& path);
};

// NFC, emoji code points removed, hashtag and emoticon tokens removed, Latin
// lowercased (except the literal <PN>), whitespace collapsed and trimmed.
std::string normalize_text(std::string_view raw,
                           const NormalizeOptions& opts = NormalizeOptions::defaults());

// Whitespace split, then strip .,!?;:"'()[]{}| and the danda from both ends.
std::vector<std::string> tokenize(std::string_view text);

// Token-level lexicon replacement for data that has no pre-tagged text.
// Matching ignores Latin case and surrounding punctuation.
class ProperNounReplacer {
 public:
  ProperNounReplacer() = default;
  explicit ProperNounReplacer(std::span<const std::string> lexicon);
  static ProperNounReplacer from_file(const std::filesystem::path& path);

  std::string apply(std::string_view text) const;
  bool empty() const { return names_.empty(); }

 private:
  std::vector<std::string> names_;  // normalized, sorted
};

// ---------------------------------------------------------------------------
// Vocabulary

struct VocabMode {
  enum class Kind { full, fixed };
  Kind kind = Kind::full;
  std::size_t cap = 0;

  static VocabMode full() { return {Kind::full, 0}; }
  static VocabMode fixed(std::size_t cap);
  friend bool operator==(const VocabMode&, const VocabMode&) = default;
};

class Vocab {
 public:
  static constexpr std::uint32_t kPadId = 0;
  static constexpr std::uint32_t kOovId = 1;
  static constexpr std::uint32_t kPnId = 2;
  static constexpr std::size_t kReserved = 3;
  static constexpr std::string_view kPadToken = "<PAD>";
  static constexpr std::string_view kOovToken = "<OOV>";

  // Tokens in id order; the first three must be the reserved tokens.
  Vocab(VocabMode mode, std::vector<std::string> tokens, std::vector<std::uint64_t> frequencies);

  VocabMode mode() const { return mode_; }
  std::size_t size() const { return tokens_.size(); }
  std::optional<std::uint32_t> find(std::string_view token) const;
  std::uint32_t id_of(std::string_view token) const { return find(token).value_or(kOovId); }
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::uint64_t frequency(std::uint32_t id) const { return frequencies_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& frequencies() const { return frequencies_; }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.mode_ == b.mode_ && a.tokens_ == b.tokens_ && a.frequencies_ == b.frequencies_;
  }

 private:
  VocabMode mode_;
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> frequencies_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Non-reserved ids by descending frequency, ties by first occurrence.
// Throws DataError when every token list is empty.
Vocab build_vocab(std::span<const std::vector<std::string>> token_lists, VocabMode mode);

// token<TAB>id<TAB>frequency, one line per id.
void write_vocab_tsv(const Vocab& vocab, std::ostream& out);

// ---------------------------------------------------------------------------
// Encoding and splitting

using Sequence = std::vector<std::uint32_t>;

// Unknown tokens map to OOV; keeps the last maxlen tokens and left-pads with PAD.
Sequence encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t maxlen);

struct EncodedDataset {
  std::vector<Sequence> sequences;
  std::vector<Label> labels1;
  std::vector<Label> labels2;
  std::vector<std::int64_t> sample_ids;
  std::size_t maxlen = 0;
  std::size_t vocab_size = 0;

  std::size_t size() const { return sequences.size(); }
  // Throws DataError when a row length, id or label array breaks the invariants.
  void validate() const;
  friend bool operator==(const EncodedDataset&, const EncodedDataset&) = default;
};

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct DatasetSplits {
  EncodedDataset train;
  EncodedDataset val;
  EncodedDataset test;
};

// Seeded permutation, then contiguous slices of floor(n*train), floor(n*val)
// and the remainder. Throws std::invalid_argument on bad ratios, DataError on
// an empty slice.
DatasetSplits split_shuffle(const EncodedDataset& dataset, const SplitRatios& ratios,
                            std::uint64_t seed);

EncodedDataset select_rows(const EncodedDataset& dataset, std::span<const std::size_t> rows);

// Single-line JSON header, '\n', then rows*maxlen little-endian uint32 ids.
void write_encoded(const EncodedDataset& dataset, const Vocab& vocab, std::ostream& out);
void write_encoded(const EncodedDataset& dataset, const Vocab& vocab,
                   const std::filesystem::path& path);

struct EncodedFile {
  EncodedDataset dataset;
  Vocab vocab;
};
EncodedFile read_encoded(std::istream& in);
EncodedFile read_encoded(const std::filesystem::path& path);

}  // namespace brsent
