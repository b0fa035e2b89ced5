#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace subxfer {

/// U+2581 LOWER ONE EIGHTH BLOCK, the word-boundary marker.
inline constexpr std::string_view kWordMarker = "\xE2\x96\x81";

struct NormalizeOptions {
  bool nfc = true;
  bool lowercase = false;
};

/// Byte length of the UTF-8 sequence starting at `pos`. Malformed sequences
/// count as a single byte so every input splits into characters.
std::size_t utf8_char_length(std::string_view text, std::size_t pos);

/// Splits into characters (code points, or single bytes for malformed input).
std::vector<std::string_view> utf8_chars(std::string_view text);

std::size_t utf8_length(std::string_view text);

bool is_ascii_space(char c);

/// NFC composition and/or full Unicode lowercasing via ICU.
std::string unicode_normalize(std::string_view text, const NormalizeOptions& options);

/// Whitespace tokenization. ASCII whitespace and the word marker both
/// separate words; empty words are dropped.
std::vector<std::string> split_words(std::string_view text);

std::string join_words(const std::vector<std::string>& words);

/// unicode_normalize followed by whitespace collapsing.
std::string normalize_text(std::string_view text, const NormalizeOptions& options);

}  // namespace subxfer
