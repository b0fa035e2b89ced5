#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "subxfer/vocab.hpp"

namespace subxfer {

/// Byte offsets [begin, end) into Segmentation::text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

/// Sub-word tokens of one sentence. `text` is the marker-annotated input
/// ("▁w1▁w2..."); spans tile it exactly and tokens are the spanned bytes.
struct Segmentation {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<Span> spans;
};

/// "a  b" -> "▁a▁b". Whitespace and pre-existing markers separate words.
std::string annotate(std::string_view text);

/// Concatenates tokens, maps each marker back to a space and drops the
/// leading one.
std::string decode(std::span<const std::string> tokens);

/// Distinct marker-annotated words of a corpus with occurrence counts,
/// sorted by word bytes.
struct WordCount {
  std::string word;
  std::uint64_t count = 0;
};
std::vector<WordCount> count_words(std::span<const std::string> lines);

// ---------------------------------------------------------------------------
// BPE

using MergePair = std::pair<std::string, std::string>;

struct BpeTrainOptions {
  std::size_t vocab_size = 50000;
  std::uint64_t min_pair_frequency = 2;
};

/// Merge list plus the vocabulary it induces. The marker is fused to the
/// first character of every word before merging ("▁a" is one symbol).
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(std::vector<MergePair> merges, Vocab vocab);

  const std::vector<MergePair>& merges() const noexcept { return merges_; }
  const Vocab& vocab() const noexcept { return vocab_; }

  /// Applies merges in training order within each word. Characters outside
  /// the training alphabet pass through as single-character tokens.
  Segmentation encode(std::string_view text) const;

  /// Symbols of one annotated word after applying every applicable merge.
  std::vector<std::string> apply_merges(std::string_view annotated_word) const;

 private:
  struct PairHash {
    std::size_t operator()(const MergePair& p) const noexcept;
  };

  std::vector<MergePair> merges_;
  Vocab vocab_;
  std::unordered_map<MergePair, std::size_t, PairHash> ranks_;
};

/// Greedy most-frequent-pair merging. Ties go to the byte-smallest pair
/// (left symbol first). Stops at `vocab_size` or when the best pair is rarer
/// than `min_pair_frequency`. Throws ValidationError when the target does not
/// exceed the alphabet.
BpeModel train_bpe(std::span<const std::string> lines, const BpeTrainOptions& options);

/// Merges file: one "left right" pair per line. Vocabulary: vocab file format.
void write_bpe(const BpeModel& model, const std::filesystem::path& merges_path,
               const std::filesystem::path& vocab_path);
BpeModel read_bpe(const std::filesystem::path& merges_path, const std::filesystem::path& vocab_path);

// ---------------------------------------------------------------------------
// Unigram language model

struct Piece {
  std::string token;
  double log_prob = 0.0;

  friend bool operator==(const Piece&, const Piece&) = default;
};

class UnigramModel {
 public:
  UnigramModel() = default;
  /// Pieces are stored by descending log-probability, ties by token bytes.
  explicit UnigramModel(std::vector<Piece> pieces);

  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  Vocab vocab() const;

  /// Viterbi segmentation. Ties go to fewer tokens, then to the longest
  /// first token (leftmost-longest). Characters with no piece become
  /// single-character tokens scored below every known piece.
  Segmentation encode(std::string_view text) const;

 private:
  std::vector<Piece> pieces_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t max_piece_chars_ = 1;
  double unknown_log_prob_ = -10.0;
};

enum class EStep { Lattice, Viterbi };

struct UnigramTrainOptions {
  std::size_t vocab_size = 50000;
  std::size_t seed_size = 1'000'000;
  std::size_t em_rounds = 2;
  double shrink_factor = 0.75;
  std::size_t max_piece_chars = 8;
  std::uint64_t min_seed_frequency = 2;
  EStep estep = EStep::Lattice;
};

struct UnigramTrainResult {
  UnigramModel model;
  std::vector<std::string> warnings;
};

UnigramTrainResult train_unigram(std::span<const std::string> lines, const UnigramTrainOptions& options);

/// EM at a fixed piece inventory. Updates `pieces` in place and returns the
/// corpus log-likelihood before each round and after the last one
/// (rounds + 1 values). With EStep::Lattice the likelihood is the marginal
/// over all segmentations; with EStep::Viterbi it is the best-path score.
std::vector<double> run_unigram_em(std::vector<Piece>& pieces, std::span<const WordCount> words,
                                   std::size_t rounds, EStep estep = EStep::Lattice);

/// TSV: token \t log-probability.
void write_unigram(const UnigramModel& model, const std::filesystem::path& path);
UnigramModel read_unigram(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

using TokenizerModel = std::variant<BpeModel, UnigramModel>;

Segmentation encode(const TokenizerModel& model, std::string_view text);
Vocab vocab_of(const TokenizerModel& model);

/// Segments over an arbitrary vocabulary with uniform piece scores, i.e. the
/// fewest-tokens segmentation. Used when only a parent vocabulary is known.
UnigramModel uniform_unigram(const Vocab& vocab);

}  // namespace subxfer
