#include <fstream>
#include <iterator>

#include <zlib.h>

#include "brsent/corpus.hpp"
#include "byte_io.hpp"
#include "json.hpp"

namespace brsent {

using nlohmann::json;

namespace detail {
std::uint32_t crc32_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}
}  // namespace detail

namespace {

constexpr std::string_view kEncodedFormat = "brsent-encoded";

std::string labels_string(const std::vector<Label>& labels) {
  std::string out;
  out.reserve(labels.size());
  for (auto l : labels) out += format_label(l);
  return out;
}

std::vector<Label> parse_labels_string(const std::string& text) {
  std::vector<Label> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(parse_label(std::string_view(&c, 1)));
  return out;
}

}  // namespace

void write_encoded(const EncodedDataset& dataset, const Vocab& vocab, std::ostream& out) {
  dataset.validate();
  if (dataset.vocab_size != vocab.size()) {
    throw DataError("dataset vocab_size does not match the vocabulary");
  }
  std::string body;
  body.reserve(dataset.size() * dataset.maxlen * 4);
  for (const auto& row : dataset.sequences) {
    for (auto id : row) detail::put_le<std::uint32_t>(body, id);
  }
  json header;
  header["format"] = kEncodedFormat;
  header["version"] = 1;
  header["rows"] = dataset.size();
  header["maxlen"] = dataset.maxlen;
  header["vocab_size"] = dataset.vocab_size;
  header["vocab"] = {
      {"mode", vocab.mode().kind == VocabMode::Kind::full ? "full" : "fixed"},
      {"cap", vocab.mode().cap},
      {"tokens", vocab.tokens()},
      {"frequencies", vocab.frequencies()},
  };
  header["sample_ids"] = dataset.sample_ids;
  header["labels1"] = labels_string(dataset.labels1);
  header["labels2"] = labels_string(dataset.labels2);
  header["body_bytes"] = body.size();
  header["body_crc32"] = detail::crc32_of(body);
  out << header.dump() << '\n';
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw DataError("failed writing encoded dataset");
}

void write_encoded(const EncodedDataset& dataset, const Vocab& vocab,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_encoded(dataset, vocab, out);
}

EncodedFile read_encoded(std::istream& in) {
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("encoded dataset has no header");
  const std::string body{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    const json header = json::parse(header_line);
    if (header.at("format").get<std::string>() != kEncodedFormat) {
      throw DataError("not an encoded dataset");
    }
    const auto rows = header.at("rows").get<std::size_t>();
    const auto maxlen = header.at("maxlen").get<std::size_t>();
    if (body.size() != header.at("body_bytes").get<std::size_t>() ||
        body.size() != rows * maxlen * 4 ||
        detail::crc32_of(body) != header.at("body_crc32").get<std::uint32_t>()) {
      throw DataError("encoded dataset body is truncated or corrupt");
    }
    const auto& v = header.at("vocab");
    const VocabMode mode = v.at("mode").get<std::string>() == "full"
                               ? VocabMode::full()
                               : VocabMode::fixed(v.at("cap").get<std::size_t>());
    Vocab vocab(mode, v.at("tokens").get<std::vector<std::string>>(),
                v.at("frequencies").get<std::vector<std::uint64_t>>());

    EncodedDataset ds;
    ds.maxlen = maxlen;
    ds.vocab_size = header.at("vocab_size").get<std::size_t>();
    ds.sample_ids = header.at("sample_ids").get<std::vector<std::int64_t>>();
    ds.labels1 = parse_labels_string(header.at("labels1").get<std::string>());
    ds.labels2 = parse_labels_string(header.at("labels2").get<std::string>());
    ds.sequences.assign(rows, Sequence(maxlen));
    std::size_t offset = 0;
    for (auto& row : ds.sequences) {
      for (auto& id : row) {
        id = detail::get_le<std::uint32_t>(body.data() + offset);
        offset += 4;
      }
    }
    ds.validate();
    if (ds.vocab_size != vocab.size()) throw DataError("header vocab_size mismatch");
    return {std::move(ds), std::move(vocab)};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed encoded dataset header: ") + e.what());
  }
}

EncodedFile read_encoded(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_encoded(in);
}

}  // namespace brsent
