#include "brsent/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "brsent/numerics.hpp"
#include "json.hpp"

namespace brsent {

using nlohmann::json;

namespace {

constexpr std::pair<Source, std::string_view> kSourceNames[] = {
    {Source::facebook, "facebook"}, {Source::twitter, "twitter"}, {Source::youtube, "youtube"},
    {Source::news, "news"},         {Source::review, "review"},   {Source::other, "other"},
};

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\v\f") == std::string_view::npos;
}

}  // namespace

Source parse_source(std::string_view text) {
  for (const auto& [source, name] : kSourceNames) {
    if (name == text) return source;
  }
  throw DataError("unknown source '" + std::string(text) + "'");
}

std::string_view format_source(Source source) {
  for (const auto& [s, name] : kSourceNames) {
    if (s == source) return name;
  }
  return "other";
}

std::vector<TextSample> parse_corpus_jsonl(std::istream& in) {
  std::vector<TextSample> samples;
  std::unordered_set<std::int64_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const std::string where = "corpus line " + std::to_string(lineno) + ": ";
    TextSample s;
    try {
      const json obj = json::parse(line);
      s.id = obj.at("id").get<std::int64_t>();
      s.raw_text = obj.at("raw").get<std::string>();
      if (obj.contains("modified") && !obj.at("modified").is_null()) {
        s.modified_text = obj.at("modified").get<std::string>();
      }
      s.label1 = parse_label(obj.at("label1").get<std::string>());
      s.label2 = parse_label(obj.at("label2").get<std::string>());
      s.source = obj.contains("source") ? parse_source(obj.at("source").get<std::string>())
                                        : Source::other;
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (blank(s.raw_text)) throw DataError(where + "raw text is empty");
    if (!seen.insert(s.id).second) {
      throw DataError(where + "duplicate id " + std::to_string(s.id));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<TextSample> load_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return parse_corpus_jsonl(in);
}

void write_corpus_jsonl(std::span<const TextSample> samples, std::ostream& out) {
  for (const auto& s : samples) {
    json obj;
    obj["id"] = s.id;
    obj["raw"] = s.raw_text;
    obj["modified"] = s.modified_text ? json(*s.modified_text) : json(nullptr);
    obj["label1"] = format_label(s.label1);
    obj["label2"] = format_label(s.label2);
    obj["source"] = format_source(s.source);
    out << obj.dump() << '\n';
  }
}

CorpusStats corpus_stats(std::span<const TextSample> samples) {
  CorpusStats stats;
  stats.total = samples.size();
  for (const auto& s : samples) {
    ++stats.per_source[s.source];
    if (detect_script(s.raw_text) == Script::bangla) {
      ++stats.bangla;
    } else {
      ++stats.romanized;
    }
  }
  std::size_t by_source = 0;
  for (const auto& [source, count] : stats.per_source) by_source += count;
  if (by_source != stats.total || stats.bangla + stats.romanized != stats.total) {
    throw DataError("corpus statistics do not add up to the sample count");
  }
  return stats;
}

// ---------------------------------------------------------------------------

VocabMode VocabMode::fixed(std::size_t cap) {
  if (cap == 0) throw std::invalid_argument("fixed vocabulary cap must be positive");
  return {Kind::fixed, cap};
}

Vocab::Vocab(VocabMode mode, std::vector<std::string> tokens,
             std::vector<std::uint64_t> frequencies)
    : mode_(mode), tokens_(std::move(tokens)), frequencies_(std::move(frequencies)) {
  if (tokens_.size() < kReserved || tokens_[kPadId] != kPadToken ||
      tokens_[kOovId] != kOovToken || tokens_[kPnId] != kProperNounTag) {
    throw DataError("vocabulary does not start with the reserved tokens");
  }
  if (frequencies_.size() != tokens_.size()) {
    throw DataError("vocabulary token and frequency lists differ in length");
  }
  if (mode_.kind == VocabMode::Kind::fixed && tokens_.size() > mode_.cap + kReserved) {
    throw DataError("vocabulary exceeds its fixed cap");
  }
  for (std::uint32_t id = 0; id < tokens_.size(); ++id) {
    if (!index_.emplace(tokens_[id], id).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[id] + "'");
    }
  }
}

std::optional<std::uint32_t> Vocab::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocab build_vocab(std::span<const std::vector<std::string>> token_lists, VocabMode mode) {
  struct Entry {
    std::uint64_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::vector<std::uint64_t> reserved(Vocab::kReserved, 0);
  std::size_t position = 0;
  for (const auto& tokens : token_lists) {
    for (const auto& token : tokens) {
      ++position;
      if (token == Vocab::kPadToken) {
        ++reserved[Vocab::kPadId];
      } else if (token == Vocab::kOovToken) {
        ++reserved[Vocab::kOovId];
      } else if (token == kProperNounTag) {
        ++reserved[Vocab::kPnId];
      } else {
        auto [it, inserted] = counts.try_emplace(token, Entry{0, position});
        ++it->second.count;
      }
    }
  }
  if (position == 0) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, Entry>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });
  if (mode.kind == VocabMode::Kind::fixed && ranked.size() > mode.cap) ranked.resize(mode.cap);

  std::vector<std::string> tokens{std::string(Vocab::kPadToken), std::string(Vocab::kOovToken),
                                  std::string(kProperNounTag)};
  std::vector<std::uint64_t> frequencies = reserved;
  for (auto& [token, entry] : ranked) {
    tokens.push_back(std::move(token));
    frequencies.push_back(entry.count);
  }
  return Vocab(mode, std::move(tokens), std::move(frequencies));
}

void write_vocab_tsv(const Vocab& vocab, std::ostream& out) {
  for (std::uint32_t id = 0; id < vocab.size(); ++id) {
    out << vocab.token(id) << '\t' << id << '\t' << vocab.frequency(id) << '\n';
  }
}

// ---------------------------------------------------------------------------

Sequence encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t maxlen) {
  if (maxlen == 0) throw std::invalid_argument("maxlen must be at least 1");
  Sequence out(maxlen, Vocab::kPadId);
  const std::size_t kept = std::min(tokens.size(), maxlen);
  const auto tail = tokens.subspan(tokens.size() - kept);
  for (std::size_t k = 0; k < kept; ++k) out[maxlen - kept + k] = vocab.id_of(tail[k]);
  return out;
}

void EncodedDataset::validate() const {
  if (maxlen == 0 || vocab_size == 0) throw DataError("dataset needs positive maxlen and vocab");
  if (labels1.size() != sequences.size() || labels2.size() != sequences.size() ||
      sample_ids.size() != sequences.size()) {
    throw DataError("dataset label/id arrays do not match the sequence count");
  }
  for (std::size_t r = 0; r < sequences.size(); ++r) {
    if (sequences[r].size() != maxlen) {
      throw DataError("row " + std::to_string(r) + " has length " +
                      std::to_string(sequences[r].size()) + ", expected " +
                      std::to_string(maxlen));
    }
    for (auto id : sequences[r]) {
      if (id >= vocab_size) {
        throw DataError("row " + std::to_string(r) + " holds id " + std::to_string(id) +
                        " outside the vocabulary");
      }
    }
  }
}

EncodedDataset select_rows(const EncodedDataset& dataset, std::span<const std::size_t> rows) {
  EncodedDataset out;
  out.maxlen = dataset.maxlen;
  out.vocab_size = dataset.vocab_size;
  out.sequences.reserve(rows.size());
  for (auto r : rows) {
    out.sequences.push_back(dataset.sequences.at(r));
    out.labels1.push_back(dataset.labels1.at(r));
    out.labels2.push_back(dataset.labels2.at(r));
    out.sample_ids.push_back(dataset.sample_ids.at(r));
  }
  return out;
}

DatasetSplits split_shuffle(const EncodedDataset& dataset, const SplitRatios& ratios,
                            std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be positive and sum to 1");
  }
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.val));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DataError("split of " + std::to_string(n) + " rows leaves an empty partition");
  }
  const std::span<const std::size_t> all(order);
  return {select_rows(dataset, all.subspan(0, n_train)),
          select_rows(dataset, all.subspan(n_train, n_val)),
          select_rows(dataset, all.subspan(n_train + n_val))};
}

}  // namespace brsent
