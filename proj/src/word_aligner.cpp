#include "subxfer/word_aligner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "subxfer/error.hpp"
#include "subxfer/parallel.hpp"

namespace subxfer {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr TokenId kUnknownId = static_cast<TokenId>(-1);

void check_null_prior(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("NULL prior must lie in [0, 1)");
}

std::vector<TokenId> lookup(const Vocab& vocab, const std::vector<std::string>& words) {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.find(w).value_or(kUnknownId));
  return ids;
}

}  // namespace

AlignerCorpus index_corpus(std::span<const SentencePair> pairs, bool reverse) {
  AlignerCorpus corpus;
  corpus.target_vocab.insert(kNullToken);
  corpus.source.reserve(pairs.size());
  corpus.target.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto& src = reverse ? p.target : p.source;
    const auto& tgt = reverse ? p.source : p.target;
    std::vector<TokenId> s, t;
    for (const auto& w : src) s.push_back(corpus.source_vocab.insert(w));
    for (const auto& w : tgt) t.push_back(corpus.target_vocab.insert(w));
    corpus.source.push_back(std::move(s));
    corpus.target.push_back(std::move(t));
  }
  return corpus;
}

// ---------------------------------------------------------------------------

TranslationTable::TranslationTable(const AlignerCorpus& corpus)
    : source_vocab_(corpus.source_vocab), target_vocab_(corpus.target_vocab) {
  std::vector<std::vector<TokenId>> rows(target_vocab_.size());
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    for (TokenId f : corpus.source[n]) {
      rows[kNullWord].push_back(f);
      for (TokenId e : corpus.target[n]) rows[e].push_back(f);
    }
  }
  row_start_.assign(rows.size() + 1, 0);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    auto& r = rows[e];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    row_start_[e + 1] = row_start_[e] + r.size();
  }
  columns_.reserve(row_start_.back());
  for (auto& r : rows) columns_.insert(columns_.end(), r.begin(), r.end());
  const double uniform = source_vocab_.empty() ? 0.0 : 1.0 / static_cast<double>(source_vocab_.size());
  values_.assign(columns_.size(), uniform);
}

std::size_t TranslationTable::slot(TokenId e, TokenId f) const {
  if (static_cast<std::size_t>(e) + 1 >= row_start_.size()) return npos;
  const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(row_start_[e]);
  const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(row_start_[e + 1]);
  auto it = std::lower_bound(first, last, f);
  if (it == last || *it != f) return npos;
  return static_cast<std::size_t>(it - columns_.begin());
}

double TranslationTable::prob(TokenId e, TokenId f) const {
  const std::size_t s = slot(e, f);
  return s == npos ? 0.0 : values_[s];
}

std::span<const TokenId> TranslationTable::row_columns(TokenId e) const {
  return std::span<const TokenId>(columns_).subspan(row_start_.at(e), row_start_.at(e + 1) - row_start_[e]);
}

std::span<const double> TranslationTable::row_values(TokenId e) const {
  return std::span<const double>(values_).subspan(row_start_.at(e), row_start_.at(e + 1) - row_start_[e]);
}

void TranslationTable::set_normalized(std::span<const double> counts) {
  if (counts.size() != values_.size()) throw Error("count vector does not match translation table layout");
  for (std::size_t e = 0; e + 1 < row_start_.size(); ++e) {
    double total = 0.0;
    for (std::size_t s = row_start_[e]; s < row_start_[e + 1]; ++s) total += counts[s];
    for (std::size_t s = row_start_[e]; s < row_start_[e + 1]; ++s) values_[s] = total > 0.0 ? counts[s] / total : 0.0;
  }
}

void write_translation_table(const TranslationTable& table, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    char buf[64];
    for (TokenId e = 0; e < table.num_conditioning(); ++e) {
      const auto cols = table.row_columns(e);
      const auto vals = table.row_values(e);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (vals[k] <= 0.0) continue;
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), vals[k]);
        out << table.target_vocab().token(e) << '\t' << table.source_vocab().token(cols[k]) << '\t';
        out.write(buf, ptr - buf);
        out << '\n';
      }
    }
  });
}

// ---------------------------------------------------------------------------

namespace {

struct Model1SentenceCounts {
  std::vector<std::pair<std::size_t, double>> lex;
  double log_likelihood = 0.0;
};

Model1SentenceCounts model1_sentence(const TranslationTable& table, std::span<const TokenId> source,
                                     std::span<const TokenId> target, double null_prior) {
  Model1SentenceCounts out;
  const double real_prior = (1.0 - null_prior) / static_cast<double>(target.size());
  std::vector<std::size_t> slots(target.size() + 1);
  std::vector<double> scores(target.size() + 1);
  out.lex.reserve(source.size() * (target.size() + 1));
  for (TokenId f : source) {
    slots[0] = table.slot(kNullWord, f);
    scores[0] = null_prior * (slots[0] == TranslationTable::npos ? 0.0 : table.values()[slots[0]]);
    double denom = scores[0];
    for (std::size_t i = 0; i < target.size(); ++i) {
      slots[i + 1] = table.slot(target[i], f);
      scores[i + 1] = real_prior * (slots[i + 1] == TranslationTable::npos ? 0.0 : table.values()[slots[i + 1]]);
      denom += scores[i + 1];
    }
    if (!(denom > 0.0)) throw Error("Model 1: source word has zero probability under every target word");
    out.log_likelihood += std::log(denom);
    for (std::size_t i = 0; i <= target.size(); ++i) {
      if (scores[i] > 0.0) out.lex.emplace_back(slots[i], scores[i] / denom);
    }
  }
  return out;
}

}  // namespace

ExpectedCounts model1_expected_counts(const AlignerCorpus& corpus, const TranslationTable& table, double null_prior,
                                      std::size_t threads) {
  check_null_prior(null_prior);
  ExpectedCounts ec;
  ec.counts.assign(table.num_entries(), 0.0);
  ordered_parallel_reduce<Model1SentenceCounts>(
      corpus.size(), threads,
      [&](std::size_t n) { return model1_sentence(table, corpus.source[n], corpus.target[n], null_prior); },
      [&](const Model1SentenceCounts& s) {
        for (const auto& [slot, v] : s.lex) ec.counts[slot] += v;
        ec.log_likelihood += s.log_likelihood;
      });
  return ec;
}

Model1Result train_model1(const AlignerCorpus& corpus, const Model1Options& options) {
  if (corpus.size() == 0) throw ValidationError("cannot train Model 1 on an empty corpus");
  if (options.iterations < 1) throw ValidationError("Model 1 needs at least one iteration");
  check_null_prior(options.null_prior);
  Model1Result result{TranslationTable(corpus), {}};
  for (std::size_t it = 0; it < options.iterations; ++it) {
    auto ec = model1_expected_counts(corpus, result.table, options.null_prior, options.threads);
    result.log_likelihood.push_back(ec.log_likelihood);
    result.table.set_normalized(ec.counts);
  }
  result.log_likelihood.push_back(
      model1_expected_counts(corpus, result.table, options.null_prior, options.threads).log_likelihood);
  return result;
}

AlignmentLinks viterbi_align(const TranslationTable& table, std::span<const TokenId> source,
                             std::span<const TokenId> target, double null_prior) {
  check_null_prior(null_prior);
  AlignmentLinks links;
  if (target.empty()) return links;
  const double real_prior = (1.0 - null_prior) / static_cast<double>(target.size());
  for (std::size_t j = 0; j < source.size(); ++j) {
    const double null_score = null_prior * std::max(table.prob(kNullWord, source[j]), kProbFloor);
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double s = real_prior * std::max(table.prob(target[i], source[j]), kProbFloor);
      if (s > best) {
        best = s;
        best_i = i;
      }
    }
    if (best >= null_score) links.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(best_i)});
  }
  return links;
}

AlignmentLinks viterbi_align(const TranslationTable& table, const SentencePair& pair, double null_prior,
                             bool reverse) {
  const auto& src = reverse ? pair.target : pair.source;
  const auto& tgt = reverse ? pair.source : pair.target;
  auto links = viterbi_align(table, lookup(table.source_vocab(), src), lookup(table.target_vocab(), tgt), null_prior);
  if (reverse) links = transpose(links);
  canonicalize(links);
  return links;
}

AlignmentLinks transpose(const AlignmentLinks& links) {
  AlignmentLinks out;
  out.reserve(links.size());
  for (const auto& l : links) out.push_back({l.target, l.source});
  canonicalize(out);
  return out;
}

}  // namespace subxfer
