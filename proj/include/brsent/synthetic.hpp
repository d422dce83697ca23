#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "brsent/corpus.hpp"

namespace brsent {

// Toy sentiment corpus: each post is random filler with one keyword drawn
// from its class's keyword set, so the label is recoverable from a single
// token. Class 0 -> "0", class 1 -> "1", class 2 -> "A".
struct SyntheticOptions {
  enum class Scripts { romanized, bangla, mixed };

  std::size_t samples = 200;
  int num_classes = 2;  // 2 or 3
  Scripts scripts = Scripts::romanized;
  std::size_t min_filler = 4;
  std::size_t max_filler = 10;
  // Share of rows whose second label equals the first; the rest get a
  // different class. Exactly round(samples * (1 - agreement)) rows disagree.
  double second_agreement = 1.0;
  // Share of rows mentioning a name: raw text keeps it, modified text has <PN>.
  double proper_noun_rate = 0.3;
  // Share of rows with an emoticon or hashtag appended to the raw text.
  double decoration_rate = 0.2;
  std::uint64_t seed = 0;
};

std::vector<TextSample> make_keyword_corpus(const SyntheticOptions& opts);

}  // namespace brsent
