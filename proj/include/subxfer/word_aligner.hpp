#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "subxfer/corpus_io.hpp"
#include "subxfer/vocab.hpp"

namespace subxfer {

/// Integer view of a parallel corpus for alignment. Source words are the
/// aligned side (f); target words are the conditioning side (e). Target id 0
/// is the NULL word.
struct AlignerCorpus {
  Vocab source_vocab;
  Vocab target_vocab;
  std::vector<std::vector<TokenId>> source;
  std::vector<std::vector<TokenId>> target;

  std::size_t size() const noexcept { return source.size(); }
};

inline constexpr TokenId kNullWord = 0;
inline constexpr const char* kNullToken = "<NULL>";

/// Ids are assigned in first-seen order. With `reverse` the roles of the two
/// sides are swapped (align target words given source words).
AlignerCorpus index_corpus(std::span<const SentencePair> pairs, bool reverse = false);

/// Sparse t(f|e): for each conditioning word e (NULL included) a sorted list
/// of the source words it co-occurred with.
class TranslationTable {
 public:
  TranslationTable() = default;
  /// Builds the co-occurrence structure with uniform t(f|e) = 1/|V_f|.
  explicit TranslationTable(const AlignerCorpus& corpus);

  /// t(f|e); 0 when the pair never co-occurred or ids are out of range.
  double prob(TokenId e, TokenId f) const;
  /// Position of (e, f) in the flat value array, or npos.
  std::size_t slot(TokenId e, TokenId f) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t num_conditioning() const noexcept { return row_start_.empty() ? 0 : row_start_.size() - 1; }
  std::size_t num_entries() const noexcept { return values_.size(); }
  std::span<const TokenId> row_columns(TokenId e) const;
  std::span<const double> row_values(TokenId e) const;

  std::span<const double> values() const noexcept { return values_; }
  /// Replaces values by per-row normalized `counts` (same layout). Rows with
  /// zero mass are cleared to 0.
  void set_normalized(std::span<const double> counts);

  const Vocab& source_vocab() const noexcept { return source_vocab_; }
  const Vocab& target_vocab() const noexcept { return target_vocab_; }

  friend bool operator==(const TranslationTable&, const TranslationTable&) = default;

 private:
  Vocab source_vocab_;
  Vocab target_vocab_;
  std::vector<std::size_t> row_start_;
  std::vector<TokenId> columns_;
  std::vector<double> values_;
};

/// TSV dump: e \t f \t t(f|e) for every non-zero entry.
void write_translation_table(const TranslationTable& table, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// IBM Model 1

struct Model1Options {
  std::size_t iterations = 5;
  /// Prior probability that a source word is generated by NULL.
  double null_prior = 0.2;
  std::size_t threads = 1;
};

struct Model1Result {
  TranslationTable table;
  /// Corpus log-likelihood under the initial table and after every
  /// iteration (iterations + 1 values).
  std::vector<double> log_likelihood;
};

Model1Result train_model1(const AlignerCorpus& corpus, const Model1Options& options = {});

/// One Model 1 E-step: expected link counts per table slot plus the corpus
/// log-likelihood. Accumulated in sentence order.
struct ExpectedCounts {
  std::vector<double> counts;
  double log_likelihood = 0.0;
};
ExpectedCounts model1_expected_counts(const AlignerCorpus& corpus, const TranslationTable& table, double null_prior,
                                      std::size_t threads = 1);

// ---------------------------------------------------------------------------
// HMM alignment model

/// Distribution over jump widths in [-max_jump, max_jump] (wider jumps share
/// the boundary bucket) plus the mass of moving to a NULL state. Sums to 1.
struct JumpDistribution {
  int max_jump = 5;
  double null_mass = 0.2;
  std::vector<double> weights;  // 2 * max_jump + 1 buckets, index = jump + max_jump

  static JumpDistribution uniform(int max_jump, double null_mass);
  std::size_t bucket(long jump) const;
  double total() const;
};

struct HmmModel {
  TranslationTable translation;
  JumpDistribution jumps;
};

struct HmmOptions {
  std::size_t iterations = 5;
  int max_jump = 5;
  /// Fixed probability of entering a NULL state at each step.
  double null_prior = 0.2;
  std::size_t threads = 1;
};

struct HmmResult {
  HmmModel model;
  /// Log-likelihood before each iteration and after the last one.
  std::vector<double> log_likelihood;
};

/// Forward-backward EM starting from a Model 1 table and uniform jumps.
HmmResult train_hmm(const AlignerCorpus& corpus, const TranslationTable& model1, const HmmOptions& options = {});

/// Transition probability from "last real position" `from` (0 = sentence
/// start) to real target position `to` (1-based) in a target sentence of
/// length `target_length`, excluding the NULL mass.
double hmm_transition(const JumpDistribution& jumps, std::size_t target_length, std::size_t from, std::size_t to);

/// Scaled forward pass; returns log P(source | target).
double hmm_sentence_log_likelihood(const HmmModel& model, std::span<const TokenId> source,
                                   std::span<const TokenId> target);
double hmm_corpus_log_likelihood(const HmmModel& model, const AlignerCorpus& corpus, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Decoding

/// Each source word gets its best target position or NULL; NULL emits no
/// link. Ties go to the smaller target index, and real positions beat NULL.
AlignmentLinks viterbi_align(const HmmModel& model, std::span<const TokenId> source, std::span<const TokenId> target);
AlignmentLinks viterbi_align(const TranslationTable& table, std::span<const TokenId> source,
                             std::span<const TokenId> target, double null_prior = 0.2);

/// String-level decoding. Words unseen in training get probability floor
/// 1e-12. The pair is read in the same orientation the model was trained in.
AlignmentLinks viterbi_align(const HmmModel& model, const SentencePair& pair, bool reverse = false);
AlignmentLinks viterbi_align(const TranslationTable& table, const SentencePair& pair, double null_prior = 0.2,
                             bool reverse = false);

enum class Symmetrization { Intersection, Union, GrowDiagFinalAnd };

Symmetrization parse_symmetrization(std::string_view name);

/// Combines source->target links with target->source links. Both inputs use
/// (source index, target index) orientation. Throws ValidationError when an
/// index is outside the sentence lengths.
AlignmentLinks symmetrize(const AlignmentLinks& forward, const AlignmentLinks& reverse, Symmetrization mode,
                          std::size_t source_length, std::size_t target_length);

/// Swaps source and target indices.
AlignmentLinks transpose(const AlignmentLinks& links);

}  // namespace subxfer
