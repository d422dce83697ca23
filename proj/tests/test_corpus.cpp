#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

using namespace brsent;

namespace {

// Random posts drawn from pieces that exercise every normalization rule.
std::string random_post(std::mt19937_64& gen) {
  static const std::vector<std::string> pieces = {
      "Nice", "song", ":)", ":-(", "#music", "#", "<PN>", "<pn>", "অনেক", "ভালো", "হয়েছে",
      "গান!", "KEMON", "aChE", "😀", "👍🏽", "❤️", "x😀y", ":D", ";)", "<3", "XD", "é",
      "é", "set,", "(ok)", "\t", "  ", " ", "।", "Ünïcödé", "#হ্যাশ", "<PN>!"};
  std::string s;
  const std::size_t n = gen() % 12;
  for (std::size_t k = 0; k < n; ++k) {
    s += pieces[gen() % pieces.size()];
    s += (gen() % 3 == 0) ? "" : " ";
  }
  return s;
}

EncodedDataset numbered_dataset(std::size_t n) {
  EncodedDataset ds;
  ds.maxlen = 2;
  ds.vocab_size = n + 3;
  for (std::size_t r = 0; r < n; ++r) {
    ds.sequences.push_back({0, static_cast<std::uint32_t>(r % (n + 3))});
    ds.labels1.push_back(static_cast<Label>(r % 3));
    ds.labels2.push_back(static_cast<Label>((r + 1) % 3));
    ds.sample_ids.push_back(static_cast<std::int64_t>(r + 1));
  }
  return ds;
}

}  // namespace

TEST_CASE("normalize_text examples") {
  CHECK(normalize_text("Nice song :) #music") == "nice song");
  CHECK(normalize_text("অনেক ভালো হয়েছে গান!") == "অনেক ভালো হয়েছে গান!");
  CHECK(normalize_text("<PN> er set gula kemon?") == "<PN> er set gula kemon?");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("  :( #a  ") == "");
  CHECK(normalize_text("Great 😀👍 Phone") == "great phone");
  CHECK(normalize_text("Hi:)") == "hi:)");
  CHECK(normalize_text("KHUB   bhalo\t\nLaglo") == "khub bhalo laglo");
  // Decomposed e + combining acute composes to U+00E9.
  CHECK(normalize_text("Café") == "café");
}

TEST_CASE("normalize_text is idempotent") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::string post = random_post(gen);
    const std::string once = normalize_text(post);
    CHECK_MESSAGE(normalize_text(once) == once, post);
  }
}

TEST_CASE("normalization table parsing") {
  const auto opts = NormalizeOptions::parse("# comment\nemoticon :)\nemoji 1F600 1F64F\n");
  CHECK(opts.emoticons == std::vector<std::string>{":)"});
  REQUIRE(opts.emoji_ranges.size() == 1);
  CHECK(opts.emoji_ranges[0].first == U'\U0001F600');
  CHECK(normalize_text("a :) :( 😀", opts) == "a :(");
  CHECK_THROWS(NormalizeOptions::parse("emoji zz\n"));
  CHECK_THROWS(NormalizeOptions::parse("bogus line\n"));
  const auto& d = NormalizeOptions::defaults();
  for (const char* e : {":)", ":(", ":D", ";)", ":-)", ":P", "<3"}) {
    CHECK(std::find(d.emoticons.begin(), d.emoticons.end(), e) != d.emoticons.end());
  }
}

TEST_CASE("tokenize examples") {
  CHECK(tokenize("nice song") == std::vector<std::string>{"nice", "song"});
  CHECK(tokenize("অনেক ভালো হয়েছে গান!") ==
        std::vector<std::string>{"অনেক", "ভালো", "হয়েছে", "গান"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("<PN>, kemon?") == std::vector<std::string>{"<PN>", "kemon"});
  CHECK(tokenize("ami। tumi ... (se)") == std::vector<std::string>{"ami", "tumi", "se"});
  CHECK(tokenize("don't") == std::vector<std::string>{"don't"});
}

TEST_CASE("tokenize after normalize: no whitespace, <PN> atomic") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto tokens = tokenize(normalize_text(random_post(gen)));
    for (const auto& t : tokens) {
      CHECK_FALSE(t.empty());
      CHECK(t.find_first_of(" \t\n\r") == std::string::npos);
    }
  }
  // Space-separated tags, bare or with trailing punctuation, come out whole.
  const std::vector<std::string> pieces{"<PN>", "<PN>!", "Hi", "ভালো", ":)", "#x", "(<PN>)"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string post;
    std::size_t tags = 0;
    for (std::size_t k = gen() % 8; k > 0; --k) {
      const auto& p = pieces[gen() % pieces.size()];
      tags += p.find("<PN>") != std::string::npos;
      post += p + " ";
    }
    const auto tokens = tokenize(normalize_text(post));
    CHECK(static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(),
                                              std::string(kProperNounTag))) == tags);
  }
}

TEST_CASE("detect_script") {
  CHECK(detect_script("অনেক ভালো হয়েছে গান!") == Script::bangla);
  CHECK(detect_script("onek bhalo hoyeche gan") == Script::romanized);
  CHECK(detect_script("ভালো song ok") == Script::romanized);
  CHECK(detect_script("ভালো গান ok") == Script::bangla);
  // Half and half is not more than half.
  CHECK(detect_script("ভা ab") == Script::romanized);
  // Bangla digits are not letters.
  CHECK(detect_script("১২৩৪৫ ok") == Script::romanized);
  CHECK(detect_script("12345 !!") == Script::romanized);
}

TEST_CASE("proper noun lexicon replacer") {
  const std::vector<std::string> names{"Rahim", "ঢাকা"};
  const ProperNounReplacer r(names);
  CHECK(r.apply("rahim er bari ঢাকা, RAHIM!") == "<PN> er bari <PN>, <PN>!");
  CHECK(r.apply("rahimer bari") == "rahimer bari");
  CHECK(ProperNounReplacer().apply("Rahim") == "Rahim");
}

TEST_CASE("build_vocab examples") {
  const std::vector<std::vector<std::string>> one{{"a", "b", "a"}};
  const Vocab v = build_vocab(one, VocabMode::full());
  CHECK(v.size() == 5);
  CHECK(v.token(0) == "<PAD>");
  CHECK(v.token(1) == "<OOV>");
  CHECK(v.token(2) == "<PN>");
  CHECK(v.id_of("a") == 3);
  CHECK(v.id_of("b") == 4);
  CHECK(v.frequency(3) == 2);

  const std::vector<std::vector<std::string>> two{{"a", "b", "a", "c"}};
  const Vocab capped = build_vocab(two, VocabMode::fixed(1));
  CHECK(capped.size() == 4);
  CHECK(capped.find("a") == 3u);
  CHECK_FALSE(capped.find("b"));
  CHECK_FALSE(capped.find("c"));

  const std::vector<std::vector<std::string>> empty{{}};
  CHECK_THROWS_AS(build_vocab(empty, VocabMode::full()), DataError);
  CHECK_THROWS(VocabMode::fixed(0));
}

TEST_CASE("build_vocab ranking oracle on random corpora") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::string>> lists(1 + gen() % 5);
    for (auto& l : lists) {
      const std::size_t n = gen() % 12;
      for (std::size_t k = 0; k < n; ++k) l.push_back(std::string(1, static_cast<char>('a' + gen() % 8)));
    }
    lists.front().push_back("z");
    // Oracle: count and remember first positions, then sort.
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> seen;
    std::size_t pos = 0;
    for (const auto& l : lists) {
      for (const auto& t : l) {
        auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& e) { return e.first == t; });
        if (it == seen.end()) {
          seen.push_back({t, {1, pos}});
        } else {
          ++it->second.first;
        }
        ++pos;
      }
    }
    std::sort(seen.begin(), seen.end(), [](const auto& a, const auto& b) {
      return a.second.first != b.second.first ? a.second.first > b.second.first
                                              : a.second.second < b.second.second;
    });
    const std::size_t cap = 1 + gen() % 6;
    const Vocab full = build_vocab(lists, VocabMode::full());
    const Vocab fixed = build_vocab(lists, VocabMode::fixed(cap));
    REQUIRE(full.size() == seen.size() + 3);
    CHECK(fixed.size() == std::min(cap, seen.size()) + 3);
    for (std::size_t k = 0; k < seen.size(); ++k) {
      CHECK(full.token(static_cast<std::uint32_t>(k + 3)) == seen[k].first);
      CHECK(full.frequency(static_cast<std::uint32_t>(k + 3)) == seen[k].second.first);
    }
    // Full mode never yields OOV for a corpus token.
    for (const auto& l : lists) {
      for (auto id : encode(l, full, l.size() + 1)) CHECK(id != Vocab::kOovId);
    }
  }
}

TEST_CASE("reserved-looking corpus tokens map to reserved ids") {
  const std::vector<std::vector<std::string>> lists{{"<PN>", "x", "<PN>", "<PAD>"}};
  const Vocab v = build_vocab(lists, VocabMode::full());
  CHECK(v.size() == 4);
  CHECK(v.id_of("<PN>") == Vocab::kPnId);
  CHECK(v.frequency(Vocab::kPnId) == 2);
  CHECK(v.id_of("<PAD>") == Vocab::kPadId);
}

TEST_CASE("encode examples") {
  const std::vector<std::vector<std::string>> lists{{"a", "a", "b"}};
  const Vocab v = build_vocab(lists, VocabMode::full());
  CHECK(encode(std::vector<std::string>{"a", "b"}, v, 4) == Sequence{0, 0, 3, 4});
  CHECK(encode(std::vector<std::string>{}, v, 3) == Sequence{0, 0, 0});
  CHECK(encode(std::vector<std::string>{"x", "a"}, v, 2) == Sequence{1, 3});
  CHECK(encode(std::vector<std::string>{"a", "b", "x", "b"}, v, 2) == Sequence{1, 4});
  CHECK_THROWS(encode(std::vector<std::string>{"a"}, v, 0));
}

TEST_CASE("split_shuffle sizes, determinism and errors") {
  const EncodedDataset ds = numbered_dataset(10);
  const auto s = split_shuffle(ds, {}, 4);
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 2);
  const auto again = split_shuffle(ds, {}, 4);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
  CHECK_THROWS_AS(split_shuffle(ds, {0.5, 0.5, 0.5}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_shuffle(ds, {1.0, 0.0, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_shuffle(numbered_dataset(3), {}, 1), DataError);
}

TEST_CASE("split_shuffle partitions the input") {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 7 + gen() % 200;
    const EncodedDataset ds = numbered_dataset(n);
    const auto s = split_shuffle(ds, {}, gen());
    std::vector<std::int64_t> ids;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      for (std::size_t r = 0; r < part->size(); ++r) {
        ids.push_back(part->sample_ids[r]);
        // Labels travel with their row.
        const auto orig = static_cast<std::size_t>(part->sample_ids[r] - 1);
        CHECK(part->labels1[r] == ds.labels1[orig]);
        CHECK(part->labels2[r] == ds.labels2[orig]);
        CHECK(part->sequences[r] == ds.sequences[orig]);
      }
    }
    std::sort(ids.begin(), ids.end());
    CHECK(ids == ds.sample_ids);
  }
}

TEST_CASE("corpus JSONL parsing") {
  std::istringstream ok(
      R"j({"id":1,"raw":"Bhalo :)","modified":null,"label1":"1","label2":"A","source":"facebook"})j"
      "\n\n"
      R"j({"id":2,"raw":"ভালো","modified":"<PN> ভালো","label1":"0","label2":"0","source":"news"})j"
      "\n");
  const auto rows = parse_corpus_jsonl(ok);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].label2 == Label::ambiguous);
  CHECK_FALSE(rows[0].modified_text);
  CHECK(rows[1].modified_text == "<PN> ভালো");
  CHECK(rows[1].source == Source::news);

  std::ostringstream written;
  write_corpus_jsonl(rows, written);
  std::istringstream back(written.str());
  const auto again = parse_corpus_jsonl(back);
  REQUIRE(again.size() == 2);
  CHECK(again[1].raw_text == rows[1].raw_text);

  auto fails = [](const std::string& text) {
    std::istringstream in(text);
    return parse_corpus_jsonl(in);
  };
  CHECK_THROWS_AS(fails(R"j({"id":1,"raw":"  ","label1":"1","label2":"1","source":"facebook"})j"),
                  DataError);
  CHECK_THROWS_AS(fails(R"j({"id":1,"raw":"a","label1":"2","label2":"1","source":"facebook"})j"),
                  DataError);
  CHECK_THROWS_AS(fails("{not json"), DataError);
  CHECK_THROWS_AS(
      fails(R"j({"id":1,"raw":"a","label1":"1","label2":"1","source":"facebook"})j"
            "\n"
            R"j({"id":1,"raw":"b","label1":"1","label2":"1","source":"facebook"})j"),
      DataError);
}

TEST_CASE("agreement fixture statistics") {
  const auto corpus = load_corpus_jsonl(support::fixture("agreement_corpus.jsonl"));
  const CorpusStats stats = corpus_stats(corpus);
  CHECK(stats.total == 9337);
  CHECK(stats.per_source.at(Source::facebook) == 4621);
  CHECK(stats.per_source.at(Source::twitter) == 2610);
  CHECK(stats.per_source.at(Source::youtube) == 801);
  CHECK(stats.per_source.at(Source::news) == 1255);
  CHECK(stats.per_source.at(Source::review) == 50);
  CHECK(stats.bangla == 6698);
  CHECK(stats.romanized == 2639);
}

TEST_CASE("encoded dataset round trip and corruption") {
  const std::vector<std::vector<std::string>> lists{{"ami", "bhalo"}, {"tumi"}};
  const Vocab v = build_vocab(lists, VocabMode::fixed(500));
  EncodedDataset ds;
  ds.maxlen = 3;
  ds.vocab_size = v.size();
  for (std::size_t r = 0; r < lists.size(); ++r) {
    ds.sequences.push_back(encode(lists[r], v, 3));
    ds.labels1.push_back(Label::positive);
    ds.labels2.push_back(Label::ambiguous);
    ds.sample_ids.push_back(static_cast<std::int64_t>(10 + r));
  }
  std::stringstream buf;
  write_encoded(ds, v, buf);
  const std::string bytes = buf.str();
  CHECK(bytes.size() == bytes.find('\n') + 1 + 2 * 3 * 4);
  // Body is little-endian uint32: row 0 = [0, 3, 4].
  const std::size_t body = bytes.find('\n') + 1;
  CHECK(static_cast<unsigned char>(bytes[body + 4]) == 3);
  CHECK(static_cast<unsigned char>(bytes[body + 7]) == 0);

  std::istringstream in(bytes);
  const EncodedFile back = read_encoded(in);
  CHECK(back.dataset == ds);
  CHECK(back.vocab == v);

  std::string corrupt = bytes;
  corrupt[body + 4] = 5;
  std::istringstream bad(corrupt);
  CHECK_THROWS_AS(read_encoded(bad), DataError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS(read_encoded(truncated), DataError);
}

TEST_CASE("vocab TSV export") {
  const std::vector<std::vector<std::string>> lists{{"b", "a", "b"}};
  std::ostringstream out;
  write_vocab_tsv(build_vocab(lists, VocabMode::full()), out);
  CHECK(out.str() == "<PAD>\t0\t0\n<OOV>\t1\t0\n<PN>\t2\t0\nb\t3\t2\na\t4\t1\n");
}

TEST_CASE("EncodedDataset::validate") {
  EncodedDataset ds = numbered_dataset(4);
  CHECK_NOTHROW(ds.validate());
  ds.sequences[1].push_back(0);
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = numbered_dataset(4);
  ds.sequences[0][0] = static_cast<std::uint32_t>(ds.vocab_size);
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = numbered_dataset(4);
  ds.labels2.pop_back();
  CHECK_THROWS_AS(ds.validate(), DataError);
}
