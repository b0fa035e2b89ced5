#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "subxfer/alignment_table.hpp"
#include "subxfer/corpus_io.hpp"
#include "subxfer/tokenizer.hpp"
#include "subxfer/vocab.hpp"

namespace subxfer {

/// Sub-words of each word of a sentence, in order.
using WordPieces = std::vector<std::vector<std::string>>;

/// Attributes every token to the marker-delimited word containing its span.
/// Throws ProjectionError when a token straddles a word boundary.
WordPieces group_by_word(const Segmentation& segmentation);

/// A link between a child (low-resource) sub-word and a parent sub-word.
struct SubwordLink {
  std::string child;
  std::string parent;

  friend auto operator<=>(const SubwordLink&, const SubwordLink&) = default;
};

/// Many-to-many projection: every word link (f, e) yields the full cross
/// product subwords(f) x subwords(e). `links` are (child word, parent word)
/// index pairs. Throws ProjectionError on out-of-range word indices.
std::vector<SubwordLink> project_sentence(const AlignmentLinks& links, const WordPieces& child,
                                          const WordPieces& parent);

/// Corpus-wide link counts. Merging is associative and commutative.
class LinkCounter {
 public:
  void add(const SubwordLink& link, std::uint64_t count = 1);
  void add(std::span<const SubwordLink> links);
  void merge(const LinkCounter& other);

  const SubwordAlignmentTable::CountMap& counts() const noexcept { return counts_; }
  std::uint64_t total() const noexcept { return total_; }

 private:
  SubwordAlignmentTable::CountMap counts_;
  std::uint64_t total_ = 0;
};

struct AggregateOptions {
  /// Parent-side tokens outside this vocabulary (V_h) are discarded.
  const Vocab* parent_vocab = nullptr;
  /// Child-side tokens outside this vocabulary (V_l) are discarded.
  const Vocab* child_vocab = nullptr;
  /// Pairs seen fewer times are left out of the table.
  std::uint64_t min_count = 1;
};

/// Link-instance statistics of an aggregation.
struct ProjectionStats {
  std::uint64_t total_links = 0;
  std::uint64_t kept_links = 0;
  std::uint64_t discarded_parent = 0;
  std::uint64_t discarded_child = 0;
  std::uint64_t below_min_count = 0;
  std::size_t keys = 0;
};

SubwordAlignmentTable aggregate_table(const LinkCounter& counter, const AggregateOptions& options = {},
                                      ProjectionStats* stats = nullptr);
SubwordAlignmentTable aggregate_table(std::span<const SubwordLink> links, const AggregateOptions& options = {},
                                      ProjectionStats* stats = nullptr);

}  // namespace subxfer
