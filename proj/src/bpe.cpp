#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"
#include "subxfer/tokenizer.hpp"
#include "subxfer/unicode.hpp"

namespace subxfer {

namespace {

/// Initial symbols of an annotated word: the marker fused to the first
/// character, then one symbol per remaining character.
std::vector<std::string> initial_symbols(std::string_view annotated_word) {
  std::string_view body = annotated_word;
  const bool marked = body.substr(0, kWordMarker.size()) == kWordMarker;
  if (marked) body.remove_prefix(kWordMarker.size());
  std::vector<std::string> symbols;
  for (auto ch : utf8_chars(body)) symbols.emplace_back(ch);
  if (marked) {
    if (symbols.empty()) {
      symbols.emplace_back(kWordMarker);
    } else {
      symbols.front().insert(0, kWordMarker);
    }
  }
  return symbols;
}

using SymbolId = std::uint32_t;
using PairKey = std::uint64_t;

PairKey make_key(SymbolId l, SymbolId r) { return (static_cast<PairKey>(l) << 32) | r; }
SymbolId key_left(PairKey k) { return static_cast<SymbolId>(k >> 32); }
SymbolId key_right(PairKey k) { return static_cast<SymbolId>(k & 0xFFFFFFFFu); }

class BpeTrainer {
 public:
  BpeTrainer(std::span<const std::string> lines, const BpeTrainOptions& options) : options_(options) {
    for (const auto& wc : count_words(lines)) {
      std::vector<SymbolId> ids;
      for (auto& s : initial_symbols(wc.word)) ids.push_back(intern(s));
      words_.push_back(std::move(ids));
      counts_.push_back(wc.count);
    }
  }

  BpeModel run() {
    if (words_.empty()) throw ValidationError("BPE training corpus is empty");
    std::vector<std::string> alphabet = symbols_;
    std::sort(alphabet.begin(), alphabet.end());
    Vocab vocab(alphabet);
    if (options_.vocab_size <= vocab.size()) {
      throw ValidationError("BPE target vocabulary size " + std::to_string(options_.vocab_size) +
                            " must exceed the alphabet size " + std::to_string(vocab.size()));
    }

    std::map<PairKey, std::int64_t> initial;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      const auto& s = words_[w];
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const PairKey k = make_key(s[i], s[i + 1]);
        initial[k] += static_cast<std::int64_t>(counts_[w]);
        occurrences_[k].push_back(static_cast<std::uint32_t>(w));
      }
    }
    for (auto& [k, c] : initial) set_count(k, c);

    std::vector<MergePair> merges;
    while (vocab.size() < options_.vocab_size && !queue_.empty()) {
      const auto [best_count, best] = *queue_.begin();
      if (best_count < static_cast<std::int64_t>(options_.min_pair_frequency)) break;
      const SymbolId left = key_left(best);
      const SymbolId right = key_right(best);
      const SymbolId merged = intern(symbols_[left] + symbols_[right]);
      merges.emplace_back(symbols_[left], symbols_[right]);
      vocab.insert(symbols_[merged]);
      apply(best, left, right, merged);
    }
    return BpeModel(std::move(merges), std::move(vocab));
  }

 private:
  struct QueueOrder {
    const std::vector<std::string>* symbols;
    bool operator()(const std::pair<std::int64_t, PairKey>& a, const std::pair<std::int64_t, PairKey>& b) const {
      if (a.first != b.first) return a.first > b.first;
      const auto& al = (*symbols)[key_left(a.second)];
      const auto& bl = (*symbols)[key_left(b.second)];
      if (al != bl) return al < bl;
      return (*symbols)[key_right(a.second)] < (*symbols)[key_right(b.second)];
    }
  };

  SymbolId intern(const std::string& s) {
    auto [it, inserted] = symbol_ids_.emplace(s, static_cast<SymbolId>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  void set_count(PairKey k, std::int64_t c) {
    auto it = pair_counts_.find(k);
    if (it != pair_counts_.end()) {
      queue_.erase({it->second, k});
      if (c <= 0) {
        pair_counts_.erase(it);
        return;
      }
      it->second = c;
    } else {
      if (c <= 0) return;
      pair_counts_.emplace(k, c);
    }
    queue_.insert({c, k});
  }

  void apply(PairKey best, SymbolId left, SymbolId right, SymbolId merged) {
    auto word_ids = std::move(occurrences_[best]);
    occurrences_.erase(best);
    std::sort(word_ids.begin(), word_ids.end());
    word_ids.erase(std::unique(word_ids.begin(), word_ids.end()), word_ids.end());

    std::map<PairKey, std::int64_t> delta;
    for (auto w : word_ids) {
      auto& s = words_[w];
      const auto c = static_cast<std::int64_t>(counts_[w]);
      bool present = false;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) present = present || (s[i] == left && s[i + 1] == right);
      if (!present) continue;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) delta[make_key(s[i], s[i + 1])] -= c;
      std::vector<SymbolId> out;
      out.reserve(s.size());
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
          out.push_back(merged);
          i += 2;
        } else {
          out.push_back(s[i++]);
        }
      }
      s = std::move(out);
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const PairKey k = make_key(s[i], s[i + 1]);
        delta[k] += c;
        if (s[i] == merged || s[i + 1] == merged) occurrences_[k].push_back(w);
      }
    }
    for (const auto& [k, d] : delta) {
      if (d == 0) continue;
      auto it = pair_counts_.find(k);
      set_count(k, (it == pair_counts_.end() ? 0 : it->second) + d);
    }
  }

  BpeTrainOptions options_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, SymbolId> symbol_ids_;
  std::vector<std::vector<SymbolId>> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<PairKey, std::int64_t> pair_counts_;
  std::unordered_map<PairKey, std::vector<std::uint32_t>> occurrences_;
  std::set<std::pair<std::int64_t, PairKey>, QueueOrder> queue_{QueueOrder{&symbols_}};
};

}  // namespace

std::size_t BpeModel::PairHash::operator()(const MergePair& p) const noexcept {
  const std::size_t h = std::hash<std::string>{}(p.first);
  return h ^ (std::hash<std::string>{}(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

BpeModel::BpeModel(std::vector<MergePair> merges, Vocab vocab) : merges_(std::move(merges)), vocab_(std::move(vocab)) {
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    if (!ranks_.emplace(merges_[r], r).second) {
      throw ValidationError("duplicate BPE merge '" + merges_[r].first + " " + merges_[r].second + "'");
    }
  }
}

std::vector<std::string> BpeModel::apply_merges(std::string_view annotated_word) const {
  auto symbols = initial_symbols(annotated_word);
  while (symbols.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find({symbols[i], symbols[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == merges_.size()) break;
    const auto& [left, right] = merges_[best_rank];
    std::vector<std::string> out;
    out.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        out.push_back(left + right);
        i += 2;
      } else {
        out.push_back(std::move(symbols[i++]));
      }
    }
    symbols = std::move(out);
  }
  return symbols;
}

Segmentation BpeModel::encode(std::string_view text) const {
  Segmentation seg;
  seg.text = annotate(text);
  std::size_t word_begin = 0;
  while (word_begin < seg.text.size()) {
    std::size_t word_end = seg.text.find(kWordMarker, word_begin + kWordMarker.size());
    if (word_end == std::string::npos) word_end = seg.text.size();
    std::size_t offset = word_begin;
    for (auto& sym : apply_merges(std::string_view(seg.text).substr(word_begin, word_end - word_begin))) {
      seg.spans.push_back({offset, offset + sym.size()});
      offset += sym.size();
      seg.tokens.push_back(std::move(sym));
    }
    word_begin = word_end;
  }
  return seg;
}

BpeModel train_bpe(std::span<const std::string> lines, const BpeTrainOptions& options) {
  return BpeTrainer(lines, options).run();
}

void write_bpe(const BpeModel& model, const std::filesystem::path& merges_path,
               const std::filesystem::path& vocab_path) {
  atomic_write(merges_path, [&](std::ostream& out) {
    for (const auto& [l, r] : model.merges()) out << l << ' ' << r << '\n';
  });
  write_vocab(model.vocab(), vocab_path);
}

BpeModel read_bpe(const std::filesystem::path& merges_path, const std::filesystem::path& vocab_path) {
  const auto lines = read_lines(merges_path);
  std::vector<MergePair> merges;
  merges.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 == line.size() ||
        line.find(' ', space + 1) != std::string::npos) {
      throw FormatError(merges_path.string() + ": expected 'left right'", i + 1);
    }
    merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return BpeModel(std::move(merges), read_vocab(vocab_path));
}

}  // namespace subxfer
