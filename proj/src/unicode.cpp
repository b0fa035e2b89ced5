#include "subxfer/unicode.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "subxfer/error.hpp"

namespace subxfer {

std::size_t utf8_char_length(std::string_view text, std::size_t pos) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  if (lead >= 0xC2 && lead <= 0xDF) {
    len = 2;
  } else if (lead >= 0xE0 && lead <= 0xEF) {
    len = 3;
  } else if (lead >= 0xF0 && lead <= 0xF4) {
    len = 4;
  } else {
    return 1;
  }
  if (pos + len > text.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(text[pos + k]) & 0xC0) != 0x80) return 1;
  }
  // Reject overlongs, surrogates and code points above U+10FFFF.
  const auto second = static_cast<unsigned char>(text[pos + 1]);
  if (lead == 0xE0 && second < 0xA0) return 1;
  if (lead == 0xED && second > 0x9F) return 1;
  if (lead == 0xF0 && second < 0x90) return 1;
  if (lead == 0xF4 && second > 0x8F) return 1;
  return len;
}

std::vector<std::string_view> utf8_chars(std::string_view text) {
  std::vector<std::string_view> chars;
  chars.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t len = utf8_char_length(text, pos);
    chars.push_back(text.substr(pos, len));
    pos += len;
  }
  return chars;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < text.size(); pos += utf8_char_length(text, pos)) ++n;
  return n;
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string unicode_normalize(std::string_view text, const NormalizeOptions& options) {
  if (!options.nfc && !options.lowercase) return std::string(text);
  icu::UnicodeString ustr = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (options.lowercase) ustr.toLower(icu::Locale::getRoot());
  if (options.nfc) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error(std::string("ICU NFC unavailable: ") + u_errorName(status));
    ustr = nfc->normalize(ustr, status);
    if (U_FAILURE(status)) throw Error(std::string("NFC normalization failed: ") + u_errorName(status));
  }
  std::string out;
  ustr.toUTF8String(out);
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (std::size_t pos = 0; pos < text.size();) {
    if (is_ascii_space(text[pos])) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
      ++pos;
      continue;
    }
    if (text.compare(pos, kWordMarker.size(), kWordMarker) == 0) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
      pos += kWordMarker.size();
      continue;
    }
    const std::size_t len = utf8_char_length(text, pos);
    current.append(text.substr(pos, len));
    pos += len;
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string normalize_text(std::string_view text, const NormalizeOptions& options) {
  return join_words(split_words(unicode_normalize(text, options)));
}

}  // namespace subxfer
