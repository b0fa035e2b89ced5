#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <map>
#include <set>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"
#include "subxfer/tokenizer.hpp"
#include "subxfer/unicode.hpp"

namespace subxfer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// Character boundaries of a word: offsets[i] is the byte offset of char i,
/// offsets.back() == word.size().
std::vector<std::size_t> char_offsets(std::string_view word) {
  std::vector<std::size_t> offsets{0};
  for (std::size_t pos = 0; pos < word.size();) {
    pos += utf8_char_length(word, pos);
    offsets.push_back(pos);
  }
  return offsets;
}

/// Lookup from piece text to its position in a piece vector. Views point
/// into the vector's strings, so the vector must outlive the index.
class PieceIndex {
 public:
  explicit PieceIndex(const std::vector<Piece>& pieces) {
    map_.reserve(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      map_.emplace(pieces[i].token, i);
      max_chars_ = std::max(max_chars_, utf8_length(pieces[i].token));
    }
  }

  std::optional<std::size_t> find(std::string_view s) const {
    auto it = map_.find(s);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t max_chars() const { return max_chars_; }

 private:
  std::unordered_map<std::string_view, std::size_t> map_;
  std::size_t max_chars_ = 1;
};

/// Calls fn(begin_char, end_char, piece_id) for every usable lattice edge.
template <typename Fn>
void for_each_edge(std::string_view word, const std::vector<std::size_t>& offsets, const PieceIndex& index,
                   const std::vector<Piece>& pieces, std::size_t excluded, Fn&& fn) {
  const std::size_t n = offsets.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t last = std::min(n, i + index.max_chars());
    for (std::size_t j = i + 1; j <= last; ++j) {
      auto id = index.find(word.substr(offsets[i], offsets[j] - offsets[i]));
      if (!id || *id == excluded || pieces[*id].log_prob == kNegInf) continue;
      fn(i, j, *id);
    }
  }
}

struct Edge {
  std::size_t begin;
  std::size_t end;
  std::size_t piece;
};

std::vector<Edge> lattice_edges(std::string_view word, const std::vector<std::size_t>& offsets,
                                const PieceIndex& index, const std::vector<Piece>& pieces,
                                std::size_t excluded = std::numeric_limits<std::size_t>::max()) {
  std::vector<Edge> edges;
  for_each_edge(word, offsets, index, pieces, excluded,
                [&](std::size_t b, std::size_t e, std::size_t p) { edges.push_back({b, e, p}); });
  return edges;
}

/// Best-scoring path through the lattice; empty when the word cannot be
/// covered. Returns piece ids left to right and the path score.
std::pair<std::vector<std::size_t>, double> viterbi_path(std::size_t n, const std::vector<Edge>& edges,
                                                         const std::vector<Piece>& pieces) {
  std::vector<double> score(n + 1, kNegInf);
  std::vector<const Edge*> back(n + 1, nullptr);
  score[0] = 0.0;
  // Edges are generated in increasing begin order, so a single sweep works.
  for (const auto& e : edges) {
    if (score[e.begin] == kNegInf) continue;
    const double s = score[e.begin] + pieces[e.piece].log_prob;
    if (s > score[e.end]) {
      score[e.end] = s;
      back[e.end] = &e;
    }
  }
  std::vector<std::size_t> path;
  if (score[n] == kNegInf) return {path, kNegInf};
  for (std::size_t pos = n; pos > 0; pos = back[pos]->begin) path.push_back(back[pos]->piece);
  std::reverse(path.begin(), path.end());
  return {path, score[n]};
}

double e_step(const std::vector<Piece>& pieces, std::span<const WordCount> words, EStep mode,
              std::vector<double>& expected) {
  const PieceIndex index(pieces);
  expected.assign(pieces.size(), 0.0);
  double loglik = 0.0;
  for (const auto& wc : words) {
    const auto offsets = char_offsets(wc.word);
    const std::size_t n = offsets.size() - 1;
    const auto edges = lattice_edges(wc.word, offsets, index, pieces);
    const auto weight = static_cast<double>(wc.count);
    if (mode == EStep::Viterbi) {
      auto [path, s] = viterbi_path(n, edges, pieces);
      if (path.empty()) throw Error("piece inventory cannot segment '" + wc.word + "'");
      for (auto p : path) expected[p] += weight;
      loglik += weight * s;
      continue;
    }
    std::vector<double> alpha(n + 1, kNegInf);
    std::vector<double> beta(n + 1, kNegInf);
    alpha[0] = 0.0;
    for (const auto& e : edges) alpha[e.end] = log_add(alpha[e.end], alpha[e.begin] + pieces[e.piece].log_prob);
    beta[n] = 0.0;
    for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
      beta[it->begin] = log_add(beta[it->begin], pieces[it->piece].log_prob + beta[it->end]);
    }
    const double z = alpha[n];
    if (z == kNegInf) throw Error("piece inventory cannot segment '" + wc.word + "'");
    for (const auto& e : edges) {
      expected[e.piece] += weight * std::exp(alpha[e.begin] + pieces[e.piece].log_prob + beta[e.end] - z);
    }
    loglik += weight * z;
  }
  return loglik;
}

void m_step(std::vector<Piece>& pieces, const std::vector<double>& expected) {
  double total = 0.0;
  for (double c : expected) total += c;
  const double log_total = std::log(total);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    pieces[i].log_prob = expected[i] > 0.0 ? std::log(expected[i]) - log_total : kNegInf;
  }
}

void renormalize(std::vector<Piece>& pieces) {
  double z = kNegInf;
  for (const auto& p : pieces) z = log_add(z, p.log_prob);
  for (auto& p : pieces) p.log_prob -= z;
}

class UnigramTrainer {
 public:
  UnigramTrainer(std::span<const std::string> lines, const UnigramTrainOptions& options)
      : options_(options), words_(count_words(lines)) {}

  UnigramTrainResult run() {
    if (words_.empty()) throw ValidationError("unigram training corpus is empty");
    if (options_.em_rounds == 0) throw ValidationError("unigram training needs at least one EM round");
    if (!(options_.shrink_factor > 0.0 && options_.shrink_factor < 1.0)) {
      throw ValidationError("shrink factor must lie in (0, 1)");
    }
    if (options_.seed_size < options_.vocab_size) throw ValidationError("seed size must be at least the vocabulary size");

    UnigramTrainResult result;
    std::map<std::string, std::uint64_t> char_freq;
    std::unordered_map<std::string, std::uint64_t> sub_freq;
    for (const auto& wc : words_) {
      const auto offsets = char_offsets(wc.word);
      const std::size_t n = offsets.size() - 1;
      for (std::size_t i = 0; i < n; ++i) {
        char_freq[wc.word.substr(offsets[i], offsets[i + 1] - offsets[i])] += wc.count;
        for (std::size_t len = 2; len <= options_.max_piece_chars && i + len <= n; ++len) {
          sub_freq[wc.word.substr(offsets[i], offsets[i + len] - offsets[i])] += wc.count;
        }
      }
    }

    std::size_t non_marker_chars = char_freq.size() - (char_freq.count(std::string(kWordMarker)) ? 1 : 0);
    if (non_marker_chars <= 1 || options_.vocab_size <= char_freq.size()) {
      result.warnings.push_back(non_marker_chars <= 1
                                    ? "degenerate corpus: a single distinct character; emitting a character-only model"
                                    : "target vocabulary size " + std::to_string(options_.vocab_size) +
                                          " does not exceed the " + std::to_string(char_freq.size()) +
                                          " distinct characters; emitting a character-only model");
      std::vector<Piece> pieces;
      for (const auto& [ch, f] : char_freq) pieces.push_back({ch, std::log(static_cast<double>(f))});
      renormalize(pieces);
      result.model = UnigramModel(std::move(pieces));
      return result;
    }

    std::vector<std::pair<std::string, std::uint64_t>> subs;
    for (auto& [s, f] : sub_freq) {
      if (f >= options_.min_seed_frequency) subs.emplace_back(s, f);
    }
    std::sort(subs.begin(), subs.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const std::size_t sub_budget =
        options_.seed_size > char_freq.size() ? options_.seed_size - char_freq.size() : 0;
    if (subs.size() > sub_budget) subs.resize(sub_budget);

    std::vector<Piece> pieces;
    for (const auto& [ch, f] : char_freq) {
      pieces.push_back({ch, std::log(static_cast<double>(f))});
      required_.insert(ch);
    }
    for (const auto& [s, f] : subs) pieces.push_back({s, std::log(static_cast<double>(f))});
    renormalize(pieces);

    while (true) {
      run_unigram_em(pieces, words_, options_.em_rounds, options_.estep);
      std::erase_if(pieces, [&](const Piece& p) { return p.log_prob == kNegInf && !required_.count(p.token); });
      if (pieces.size() <= options_.vocab_size) break;
      prune(pieces);
    }

    // Hard-count EM can starve a character; keep it usable.
    double min_finite = 0.0;
    for (const auto& p : pieces) {
      if (p.log_prob != kNegInf) min_finite = std::min(min_finite, p.log_prob);
    }
    for (auto& p : pieces) {
      if (p.log_prob == kNegInf) p.log_prob = min_finite - std::log(2.0);
    }
    renormalize(pieces);
    result.model = UnigramModel(std::move(pieces));
    return result;
  }

 private:
  void prune(std::vector<Piece>& pieces) {
    const PieceIndex index(pieces);
    std::vector<double> freq(pieces.size(), 0.0);
    for (const auto& wc : words_) {
      const auto offsets = char_offsets(wc.word);
      auto [path, s] = viterbi_path(offsets.size() - 1, lattice_edges(wc.word, offsets, index, pieces), pieces);
      for (auto p : path) freq[p] += static_cast<double>(wc.count);
    }
    double total = 0.0;
    for (double f : freq) total += f;

    struct Candidate {
      double loss;
      std::size_t id;
    };
    std::vector<Candidate> candidates;
    std::vector<Piece> kept;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (required_.count(pieces[i].token)) {
        kept.push_back(pieces[i]);
        continue;
      }
      if (freq[i] == 0.0) {
        candidates.push_back({kNegInf, i});
        continue;
      }
      // Cost of re-segmenting every use of this piece with its best
      // alternative built from the remaining pieces.
      const auto& token = pieces[i].token;
      const auto offsets = char_offsets(token);
      auto [alt, alt_score] = viterbi_path(offsets.size() - 1, lattice_edges(token, offsets, index, pieces, i), pieces);
      const double logprob_sp = std::log(freq[i]) - std::log(total);
      const double logsum_alt = std::log(total + freq[i] * (static_cast<double>(alt.size()) - 1.0));
      double logprob_alt = 0.0;
      for (auto a : alt) logprob_alt += std::log(freq[a] + freq[i]) - logsum_alt;
      candidates.push_back({freq[i] * (logprob_sp - logprob_alt), i});
    }
    const std::size_t shrunk = static_cast<std::size_t>(std::floor(static_cast<double>(pieces.size()) * options_.shrink_factor));
    std::size_t keep = std::max(options_.vocab_size, shrunk);
    if (keep >= pieces.size()) keep = pieces.size() - 1;
    const std::size_t keep_optional = keep > kept.size() ? keep - kept.size() : 0;
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.loss != b.loss) return a.loss > b.loss;
      return pieces[a.id].token < pieces[b.id].token;
    });
    for (std::size_t k = 0; k < candidates.size() && k < keep_optional; ++k) kept.push_back(pieces[candidates[k].id]);
    renormalize(kept);
    pieces = std::move(kept);
  }

  UnigramTrainOptions options_;
  std::vector<WordCount> words_;
  std::set<std::string> required_;
};

}  // namespace

std::vector<double> run_unigram_em(std::vector<Piece>& pieces, std::span<const WordCount> words, std::size_t rounds,
                                   EStep estep) {
  std::vector<double> history;
  std::vector<double> expected;
  for (std::size_t r = 0; r < rounds; ++r) {
    history.push_back(e_step(pieces, words, estep, expected));
    m_step(pieces, expected);
  }
  history.push_back(e_step(pieces, words, estep, expected));
  return history;
}

UnigramTrainResult train_unigram(std::span<const std::string> lines, const UnigramTrainOptions& options) {
  return UnigramTrainer(lines, options).run();
}

// ---------------------------------------------------------------------------

UnigramModel::UnigramModel(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  std::sort(pieces_.begin(), pieces_.end(), [](const Piece& a, const Piece& b) {
    return a.log_prob != b.log_prob ? a.log_prob > b.log_prob : a.token < b.token;
  });
  double min_lp = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    if (p.token.empty()) throw ValidationError("unigram piece must be non-empty");
    if (!std::isfinite(p.log_prob)) throw ValidationError("unigram piece '" + p.token + "' has a non-finite score");
    if (!index_.emplace(p.token, i).second) throw ValidationError("duplicate unigram piece '" + p.token + "'");
    max_piece_chars_ = std::max(max_piece_chars_, utf8_length(p.token));
    min_lp = std::min(min_lp, p.log_prob);
  }
  unknown_log_prob_ = min_lp - 10.0;
}

Vocab UnigramModel::vocab() const {
  std::vector<std::string> tokens;
  tokens.reserve(pieces_.size());
  for (const auto& p : pieces_) tokens.push_back(p.token);
  return Vocab(std::move(tokens));
}

Segmentation UnigramModel::encode(std::string_view text) const {
  Segmentation seg;
  seg.text = annotate(text);
  const auto offsets = char_offsets(seg.text);
  const std::size_t n = offsets.size() - 1;

  struct Best {
    double score = kNegInf;
    std::size_t tokens = 0;
    std::size_t len = 0;
  };
  std::vector<Best> best(n + 1);
  best[n].score = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    Best b;
    bool char_known = false;
    auto consider = [&](std::size_t len, double lp) {
      const double s = lp + best[i + len].score;
      const std::size_t t = best[i + len].tokens + 1;
      if (s > b.score || (s == b.score && (t < b.tokens || (t == b.tokens && len > b.len)))) b = {s, t, len};
    };
    const std::size_t last = std::min(n - i, max_piece_chars_);
    for (std::size_t len = 1; len <= last; ++len) {
      auto it = index_.find(seg.text.substr(offsets[i], offsets[i + len] - offsets[i]));
      if (it == index_.end()) continue;
      if (len == 1) char_known = true;
      consider(len, pieces_[it->second].log_prob);
    }
    if (!char_known) consider(1, unknown_log_prob_);
    best[i] = b;
  }
  for (std::size_t i = 0; i < n; i += best[i].len) {
    const Span span{offsets[i], offsets[i + best[i].len]};
    seg.spans.push_back(span);
    seg.tokens.push_back(seg.text.substr(span.begin, span.end - span.begin));
  }
  return seg;
}

UnigramModel uniform_unigram(const Vocab& vocab) {
  std::vector<Piece> pieces;
  const double lp = -std::log(static_cast<double>(std::max<std::size_t>(vocab.size(), 1)));
  for (const auto& t : vocab.tokens()) pieces.push_back({t, lp});
  return UnigramModel(std::move(pieces));
}

void write_unigram(const UnigramModel& model, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    char buf[64];
    for (const auto& p : model.pieces()) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), p.log_prob);
      out << p.token << '\t';
      out.write(buf, ptr - buf);
      out << '\n';
    }
  });
}

UnigramModel read_unigram(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::vector<Piece> pieces;
  pieces.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError(path.string() + ": expected 'piece<TAB>log-prob'", i + 1);
    }
    double lp = 0.0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, lp);
    if (ec != std::errc() || ptr != last || !std::isfinite(lp)) {
      throw FormatError(path.string() + ": bad log-prob", i + 1);
    }
    pieces.push_back({line.substr(0, tab), lp});
  }
  try {
    return UnigramModel(std::move(pieces));
  } catch (const ValidationError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace subxfer
