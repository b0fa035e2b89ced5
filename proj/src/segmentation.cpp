#include <map>

#include "subxfer/tokenizer.hpp"
#include "subxfer/unicode.hpp"

namespace subxfer {

std::string annotate(std::string_view text) {
  std::string out;
  for (const auto& word : split_words(text)) {
    out += kWordMarker;
    out += word;
  }
  return out;
}

std::string decode(std::span<const std::string> tokens) {
  std::string joined;
  for (const auto& t : tokens) joined += t;
  std::string out;
  out.reserve(joined.size());
  for (std::size_t pos = 0; pos < joined.size();) {
    if (joined.compare(pos, kWordMarker.size(), kWordMarker) == 0) {
      out.push_back(' ');
      pos += kWordMarker.size();
    } else {
      out.push_back(joined[pos++]);
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(out.begin());
  return out;
}

std::vector<WordCount> count_words(std::span<const std::string> lines) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& line : lines) {
    for (const auto& w : split_words(line)) ++counts[std::string(kWordMarker) + w];
  }
  std::vector<WordCount> words;
  words.reserve(counts.size());
  for (auto& [w, c] : counts) words.push_back({w, c});
  return words;
}

Segmentation encode(const TokenizerModel& model, std::string_view text) {
  return std::visit([&](const auto& m) { return m.encode(text); }, model);
}

Vocab vocab_of(const TokenizerModel& model) {
  return std::visit([](const auto& m) -> Vocab { return m.vocab(); }, model);
}

}  // namespace subxfer
