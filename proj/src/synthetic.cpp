#include "brsent/synthetic.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string_view>

#include "brsent/numerics.hpp"

namespace brsent {
namespace {

struct Lexicon {
  std::array<std::vector<std::string_view>, 3> keywords;
  std::vector<std::string_view> filler;
  std::vector<std::string_view> names;
};

const Lexicon& romanized_lexicon() {
  static const Lexicon lex{
      {{{"kharap", "baje", "faltu", "jogonno", "bisri"},
        {"bhalo", "darun", "shundor", "chomotkar", "osadharon"},
        {"hoyto", "jani", "naki", "kemon", "bolbo"}}},
      {"ami", "tumi", "se", "aj", "kal", "gan", "set", "gula", "khub", "ekta",
       "chilo", "hobe", "kotha", "din", "shob", "amader", "ei", "oi", "bari", "kaj",
       "pore", "age", "rasta", "bus", "khela", "boi", "chobi", "mobile", "dam", "dokan"},
      {"Rahim", "Karim", "Dhaka", "Symphony", "Shakib", "Tamim"},
  };
  return lex;
}

const Lexicon& bangla_lexicon() {
  static const Lexicon lex{
      {{{"খারাপ", "বাজে", "ফালতু", "জঘন্য", "বিশ্রী"},
        {"ভালো", "দারুণ", "সুন্দর", "চমৎকার", "অসাধারণ"},
        {"হয়তো", "জানি", "নাকি", "কেমন", "বলব"}}},
      {"আমি", "তুমি", "সে", "আজ", "কাল", "গান", "সেট", "খুব", "একটা", "ছিল",
       "হবে", "কথা", "দিন", "সব", "আমাদের", "এই", "ওই", "বাড়ি", "কাজ", "পরে",
       "আগে", "রাস্তা", "বাস", "খেলা", "বই", "ছবি", "মোবাইল", "দাম", "দোকান", "মানুষ"},
      {"রহিম", "করিম", "ঢাকা", "সাকিব", "তামিম"},
  };
  return lex;
}

constexpr std::string_view kDecorations[] = {":)", ":(", "#bangla", "<3", "#news", "😀"};
constexpr Source kSources[] = {Source::facebook, Source::twitter, Source::youtube,
                               Source::news, Source::review};

Label class_label(int cls) {
  return cls == 0 ? Label::negative : cls == 1 ? Label::positive : Label::ambiguous;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.below(items.size())];
}

}  // namespace

std::vector<TextSample> make_keyword_corpus(const SyntheticOptions& opts) {
  if (opts.num_classes != 2 && opts.num_classes != 3) {
    throw std::invalid_argument("synthetic corpus supports 2 or 3 classes");
  }
  if (opts.min_filler > opts.max_filler) throw std::invalid_argument("min_filler > max_filler");
  if (!(opts.second_agreement >= 0.0 && opts.second_agreement <= 1.0)) {
    throw std::invalid_argument("second_agreement must lie in [0, 1]");
  }
  Rng rng(opts.seed);
  const std::size_t n = opts.samples;

  std::vector<int> classes(n);
  for (std::size_t r = 0; r < n; ++r) classes[r] = static_cast<int>(r % opts.num_classes);
  for (std::size_t i = n; i > 1; --i) std::swap(classes[i - 1], classes[rng.below(i)]);

  const auto disagreements = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * (1.0 - opts.second_agreement)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<bool> disagree(n, false);
  for (std::size_t k = 0; k < disagreements && k < n; ++k) disagree[order[k]] = true;

  std::vector<TextSample> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    bool bangla = opts.scripts == SyntheticOptions::Scripts::bangla;
    if (opts.scripts == SyntheticOptions::Scripts::mixed) bangla = rng.uniform() < 0.5;
    const Lexicon& lex = bangla ? bangla_lexicon() : romanized_lexicon();

    const std::size_t filler = opts.min_filler + rng.below(opts.max_filler - opts.min_filler + 1);
    std::vector<std::string> raw_words;
    for (std::size_t k = 0; k < filler; ++k) raw_words.emplace_back(pick(lex.filler, rng));
    const int cls = classes[r];
    raw_words.insert(raw_words.begin() + static_cast<std::ptrdiff_t>(rng.below(filler + 1)),
                     std::string(pick(lex.keywords[static_cast<std::size_t>(cls)], rng)));
    std::vector<std::string> mod_words = raw_words;
    if (rng.uniform() < opts.proper_noun_rate) {
      const auto at = static_cast<std::ptrdiff_t>(rng.below(raw_words.size() + 1));
      raw_words.insert(raw_words.begin() + at, std::string(pick(lex.names, rng)));
      mod_words.insert(mod_words.begin() + at, std::string(kProperNounTag));
    }
    if (rng.uniform() < opts.decoration_rate) {
      raw_words.emplace_back(kDecorations[rng.below(std::size(kDecorations))]);
    }

    TextSample s;
    s.id = static_cast<std::int64_t>(r + 1);
    for (const auto& w : raw_words) s.raw_text += (s.raw_text.empty() ? "" : " ") + w;
    std::string modified;
    for (const auto& w : mod_words) modified += (modified.empty() ? "" : " ") + w;
    s.modified_text = std::move(modified);
    s.label1 = class_label(cls);
    int second = cls;
    if (disagree[r]) {
      second = (cls + 1 + static_cast<int>(rng.below(opts.num_classes - 1))) % opts.num_classes;
    }
    s.label2 = class_label(second);
    s.source = kSources[r % std::size(kSources)];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace brsent
