// Brute-force reference implementations. Each one enumerates the full
// hypothesis space instead of using dynamic programming, so agreement with
// the library is evidence of correctness rather than of shared code.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "subxfer/tokenizer.hpp"
#include "subxfer/unicode.hpp"
#include "subxfer/word_aligner.hpp"

namespace oracle {

using subxfer::TokenId;

// ---------------------------------------------------------------------------
// BPE: recount every pair from scratch before each merge.

inline std::vector<std::string> bpe_symbols(const std::string& annotated) {
  std::vector<std::string> out;
  std::string_view body = annotated;
  body.remove_prefix(subxfer::kWordMarker.size());
  for (auto ch : subxfer::utf8_chars(body)) out.emplace_back(ch);
  if (out.empty()) {
    out.emplace_back(subxfer::kWordMarker);
  } else {
    out.front().insert(0, subxfer::kWordMarker);
  }
  return out;
}

inline std::vector<subxfer::MergePair> naive_bpe(const std::vector<std::string>& lines, std::size_t vocab_size,
                                                 std::uint64_t min_freq) {
  std::vector<std::vector<std::string>> words;
  std::vector<std::uint64_t> counts;
  std::map<std::string, std::uint64_t> wc;
  for (const auto& line : lines) {
    for (const auto& w : subxfer::split_words(line)) ++wc[std::string(subxfer::kWordMarker) + w];
  }
  std::map<std::string, int> vocab;
  for (const auto& [w, c] : wc) {
    words.push_back(bpe_symbols(w));
    counts.push_back(c);
    for (const auto& s : words.back()) vocab[s];
  }
  std::vector<subxfer::MergePair> merges;
  while (vocab.size() < vocab_size) {
    std::map<subxfer::MergePair, std::uint64_t> pairs;
    for (std::size_t w = 0; w < words.size(); ++w) {
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i) pairs[{words[w][i], words[w][i + 1]}] += counts[w];
    }
    if (pairs.empty()) break;
    // std::map iterates pairs in byte order, so the first maximum wins ties.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    if (best->second < min_freq) break;
    const auto [l, r] = best->first;
    merges.push_back(best->first);
    vocab[l + r];
    for (auto& s : words) {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == l && s[i + 1] == r) {
          out.push_back(l + r);
          i += 2;
        } else {
          out.push_back(s[i++]);
        }
      }
      s = std::move(out);
    }
  }
  return merges;
}

// ---------------------------------------------------------------------------
// Unigram: enumerate every segmentation of a word.

inline void for_each_segmentation(const std::vector<std::string>& chars, const std::map<std::string, double>& logp,
                                  const std::function<void(const std::vector<std::string>&)>& visit) {
  std::vector<std::string> path;
  std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == chars.size()) {
      visit(path);
      return;
    }
    std::string piece;
    for (std::size_t end = pos; end < chars.size(); ++end) {
      piece += chars[end];
      if (logp.count(piece)) {
        path.push_back(piece);
        rec(end + 1);
        path.pop_back();
      }
    }
  };
  rec(0);
}

inline std::vector<std::string> chars_of(const std::string& word) {
  std::vector<std::string> out;
  for (auto c : subxfer::utf8_chars(word)) out.emplace_back(c);
  return out;
}

/// One EM round by enumeration. Returns the marginal log-likelihood under the
/// input distribution and replaces `logp` by the re-estimate.
inline double unigram_em_round(std::map<std::string, double>& logp, const std::vector<subxfer::WordCount>& words) {
  std::map<std::string, double> expected;
  double loglik = 0.0;
  for (const auto& wc : words) {
    std::vector<std::pair<std::vector<std::string>, double>> segs;
    double z = 0.0;
    for_each_segmentation(chars_of(wc.word), logp, [&](const std::vector<std::string>& path) {
      double s = 0.0;
      for (const auto& p : path) s += logp.at(p);
      segs.emplace_back(path, std::exp(s));
      z += std::exp(s);
    });
    loglik += static_cast<double>(wc.count) * std::log(z);
    for (const auto& [path, p] : segs) {
      for (const auto& piece : path) expected[piece] += static_cast<double>(wc.count) * p / z;
    }
  }
  double total = 0.0;
  for (const auto& [k, v] : expected) total += v;
  for (auto& [k, v] : logp) {
    const auto it = expected.find(k);
    v = it == expected.end() || it->second <= 0.0 ? -INFINITY : std::log(it->second / total);
  }
  return loglik;
}

struct BestSegmentation {
  std::vector<std::string> tokens;
  double score = -INFINITY;
};

/// Maximum score; ties to fewer tokens, then to the longer first token, and
/// so on left to right.
inline BestSegmentation best_segmentation(const std::string& word, const std::map<std::string, double>& logp) {
  BestSegmentation best;
  bool found = false;
  for_each_segmentation(chars_of(word), logp, [&](const std::vector<std::string>& path) {
    double s = 0.0;
    for (const auto& p : path) s += logp.at(p);
    bool better = !found || s > best.score;
    if (found && s == best.score) {
      if (path.size() != best.tokens.size()) {
        better = path.size() < best.tokens.size();
      } else {
        for (std::size_t i = 0; i < path.size(); ++i) {
          if (path[i].size() != best.tokens[i].size()) {
            better = path[i].size() > best.tokens[i].size();
            break;
          }
        }
      }
    }
    if (better) {
      best = {path, s};
      found = true;
    }
  });
  return best;
}

// ---------------------------------------------------------------------------
// Model 1: enumerate every alignment function a: source -> {NULL} + target.

struct Model1Oracle {
  std::map<std::pair<TokenId, TokenId>, double> counts;  // (e, f)
  double log_likelihood = 0.0;
};

inline Model1Oracle model1_brute_force(const subxfer::AlignerCorpus& corpus, const subxfer::TranslationTable& t,
                                       double null_prior) {
  Model1Oracle out;
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto& f = corpus.source[n];
    const auto& e = corpus.target[n];
    const std::size_t l = e.size();
    const std::size_t J = f.size();
    std::vector<std::size_t> a(J, 0);
    std::map<std::pair<TokenId, TokenId>, double> local;
    double z = 0.0;
    while (true) {
      double p = 1.0;
      for (std::size_t j = 0; j < J; ++j) {
        const TokenId ej = a[j] == 0 ? subxfer::kNullWord : e[a[j] - 1];
        p *= (a[j] == 0 ? null_prior : (1.0 - null_prior) / static_cast<double>(l)) * t.prob(ej, f[j]);
      }
      z += p;
      for (std::size_t j = 0; j < J; ++j) {
        local[{a[j] == 0 ? subxfer::kNullWord : e[a[j] - 1], f[j]}] += p;
      }
      std::size_t j = 0;
      while (j < J && ++a[j] > l) a[j++] = 0;
      if (j == J) break;
    }
    out.log_likelihood += std::log(z);
    for (const auto& [k, v] : local) out.counts[k] += v / z;
  }
  return out;
}

// ---------------------------------------------------------------------------
// HMM: enumerate every state path. a_j = 0 is a NULL step that keeps the last
// real position; a_j = i > 0 jumps to target position i.

inline double path_probability(const subxfer::HmmModel& m, const std::vector<TokenId>& f,
                               const std::vector<TokenId>& e, const std::vector<std::size_t>& a, bool floor) {
  const std::size_t l = e.size();
  std::size_t last = 0;
  double p = 1.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const TokenId ej = a[j] == 0 ? subxfer::kNullWord : e[a[j] - 1];
    double emit = m.translation.prob(ej, f[j]);
    if (floor) emit = std::max(emit, 1e-12);
    if (a[j] == 0) {
      p *= m.jumps.null_mass * emit;
    } else {
      double z = 0.0;
      for (std::size_t i = 1; i <= l; ++i) {
        z += m.jumps.weights[m.jumps.bucket(static_cast<long>(i) - static_cast<long>(last))];
      }
      const double w = m.jumps.weights[m.jumps.bucket(static_cast<long>(a[j]) - static_cast<long>(last))];
      p *= (1.0 - m.jumps.null_mass) * w / z * emit;
      last = a[j];
    }
  }
  return p;
}

inline void for_each_path(std::size_t J, std::size_t l, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> a(J, 0);
  while (true) {
    visit(a);
    std::size_t j = 0;
    while (j < J && ++a[j] > l) a[j++] = 0;
    if (j == J) break;
  }
}

inline double hmm_log_likelihood(const subxfer::HmmModel& m, const std::vector<TokenId>& f,
                                 const std::vector<TokenId>& e) {
  double z = 0.0;
  for_each_path(f.size(), e.size(), [&](const std::vector<std::size_t>& a) { z += path_probability(m, f, e, a, false); });
  return std::log(z);
}

/// Posterior lexical counts (e, f) over a corpus.
inline std::map<std::pair<TokenId, TokenId>, double> hmm_lex_counts(const subxfer::HmmModel& m,
                                                                    const subxfer::AlignerCorpus& corpus) {
  std::map<std::pair<TokenId, TokenId>, double> counts;
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto& f = corpus.source[n];
    const auto& e = corpus.target[n];
    std::map<std::pair<TokenId, TokenId>, double> local;
    double z = 0.0;
    for_each_path(f.size(), e.size(), [&](const std::vector<std::size_t>& a) {
      const double p = path_probability(m, f, e, a, false);
      z += p;
      for (std::size_t j = 0; j < f.size(); ++j) local[{a[j] == 0 ? subxfer::kNullWord : e[a[j] - 1], f[j]}] += p;
    });
    for (const auto& [k, v] : local) counts[k] += v / z;
  }
  return counts;
}

/// Highest-probability path with probabilities floored at 1e-12.
inline std::vector<std::size_t> hmm_best_path(const subxfer::HmmModel& m, const std::vector<TokenId>& f,
                                              const std::vector<TokenId>& e, double* best_prob = nullptr) {
  std::vector<std::size_t> best;
  double bp = -1.0;
  for_each_path(f.size(), e.size(), [&](const std::vector<std::size_t>& a) {
    const double p = path_probability(m, f, e, a, true);
    if (p > bp) {
      bp = p;
      best = a;
    }
  });
  if (best_prob) *best_prob = bp;
  return best;
}

}  // namespace oracle
