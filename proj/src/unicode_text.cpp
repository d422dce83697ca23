#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include "brsent/corpus.hpp"
#include "normalization_table.hpp"

namespace brsent {
namespace {

std::u32string to_u32(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    out.push_back(c < 0 ? U'�' : static_cast<char32_t>(c));
  }
  return out;
}

std::string to_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    std::uint8_t buf[4];
    std::int32_t n = 0;
    U8_APPEND_UNSAFE(buf, n, static_cast<UChar32>(c));
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
  }
  return out;
}

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  const auto source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
  icu::UnicodeString result = normalizer->normalize(source, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
  std::string out;
  result.toUTF8String(out);
  return out;
}

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

bool is_latin(char32_t c) {
  UErrorCode status = U_ZERO_ERROR;
  return uscript_getScript(static_cast<UChar32>(c), &status) == USCRIPT_LATIN &&
         U_SUCCESS(status);
}

const std::u32string kTag = U"<PN>";

bool tag_at(std::u32string_view s, std::size_t pos) {
  return s.substr(pos, kTag.size()) == kTag;
}

// Lowercases Latin code points, copying every <PN> verbatim.
std::u32string lower_latin(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (tag_at(s, i)) {
      out += kTag;
      i += kTag.size();
      continue;
    }
    const char32_t c = s[i++];
    out.push_back(is_latin(c) ? static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))) : c);
  }
  return out;
}

std::vector<std::u32string> split_space(std::u32string_view s) {
  std::vector<std::u32string> tokens;
  std::u32string current;
  for (char32_t c : s) {
    if (is_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

constexpr std::u32string_view kStripChars = U".,!?;:\"'()[]{}|।";

bool strippable(char32_t c) { return kStripChars.find(c) != std::u32string_view::npos; }

std::u32string_view strip_punct(std::u32string_view token) {
  std::size_t first = 0;
  std::size_t last = token.size();
  while (first < last && strippable(token[first])) ++first;
  while (last > first && strippable(token[last - 1])) --last;
  return token.substr(first, last - first);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

// ---------------------------------------------------------------------------

NormalizeOptions NormalizeOptions::parse(std::string_view table) {
  NormalizeOptions opts;
  std::istringstream in{std::string(table)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto space = text.find(' ');
    const std::string directive = text.substr(0, space);
    const std::string rest = space == std::string::npos ? "" : trim(text.substr(space + 1));
    if (directive == "emoticon" && !rest.empty()) {
      opts.emoticons.push_back(rest);
    } else if (directive == "emoji") {
      std::istringstream fields(rest);
      std::string lo, hi;
      fields >> lo >> hi;
      try {
        const auto first = static_cast<char32_t>(std::stoul(lo, nullptr, 16));
        const auto last = static_cast<char32_t>(std::stoul(hi, nullptr, 16));
        if (last < first) throw std::invalid_argument("reversed");
        opts.emoji_ranges.emplace_back(first, last);
      } catch (const std::exception&) {
        throw DataError("normalization table line " + std::to_string(lineno) +
                        ": bad emoji range '" + rest + "'");
      }
    } else {
      throw DataError("normalization table line " + std::to_string(lineno) +
                      ": unknown entry '" + text + "'");
    }
  }
  return opts;
}

const NormalizeOptions& NormalizeOptions::defaults() {
  static const NormalizeOptions opts = parse(detail::kNormalizationTable);
  return opts;
}

NormalizeOptions NormalizeOptions::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open normalization table " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string normalize_text(std::string_view raw, const NormalizeOptions& opts) {
  std::u32string text = to_u32(nfc(raw));
  std::erase_if(text, [&](char32_t c) {
    return std::any_of(opts.emoji_ranges.begin(), opts.emoji_ranges.end(),
                       [c](const auto& r) { return c >= r.first && c <= r.second; });
  });

  std::unordered_set<std::u32string> emoticons;
  for (const auto& e : opts.emoticons) emoticons.insert(lower_latin(to_u32(e)));

  std::u32string out;
  for (const auto& token : split_space(text)) {
    if (opts.strip_hashtags && token.front() == U'#') continue;
    const std::u32string lowered = lower_latin(token);
    if (emoticons.contains(lowered)) continue;
    if (!out.empty()) out.push_back(U' ');
    out += opts.lowercase_latin ? lowered : token;
  }
  return nfc(to_utf8(out));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (const auto& piece : split_space(to_u32(text))) {
    const auto core = strip_punct(piece);
    if (!core.empty()) tokens.push_back(to_utf8(core));
  }
  return tokens;
}

Script detect_script(std::string_view text) {
  std::size_t bangla = 0;
  std::size_t letters = 0;
  for (char32_t c : to_u32(text)) {
    const bool in_block = c >= 0x0980 && c <= 0x09FF;
    const bool digit_or_sign = (c >= 0x09E6 && c <= 0x09EF) || (c >= 0x09F2 && c <= 0x09FB);
    if (in_block && !digit_or_sign) {
      ++bangla;
      ++letters;
    } else if (is_latin(c) && u_isalpha(static_cast<UChar32>(c))) {
      ++letters;
    }
  }
  return 2 * bangla > letters ? Script::bangla : Script::romanized;
}

// ---------------------------------------------------------------------------

ProperNounReplacer::ProperNounReplacer(std::span<const std::string> lexicon) {
  for (const auto& name : lexicon) {
    const std::u32string lowered = lower_latin(to_u32(nfc(trim(name))));
    const auto core = strip_punct(lowered);
    if (!core.empty()) names_.push_back(to_utf8(core));
  }
  std::sort(names_.begin(), names_.end());
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
}

ProperNounReplacer ProperNounReplacer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open proper-noun lexicon " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const std::string name = trim(line);
    if (!name.empty() && name.front() != '#') names.push_back(name);
  }
  return ProperNounReplacer(names);
}

std::string ProperNounReplacer::apply(std::string_view text) const {
  std::u32string out;
  for (const auto& piece : split_space(to_u32(nfc(text)))) {
    if (!out.empty()) out.push_back(U' ');
    const auto core = strip_punct(piece);
    const std::string key = to_utf8(lower_latin(core));
    if (core.empty() || !std::binary_search(names_.begin(), names_.end(), key)) {
      out += piece;
      continue;
    }
    const std::size_t offset = static_cast<std::size_t>(core.data() - piece.data());
    out += piece.substr(0, offset);
    out += kTag;
    out += piece.substr(offset + core.size());
  }
  return to_utf8(out);
}

}  // namespace brsent
