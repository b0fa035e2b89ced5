#include "subxfer/projection.hpp"

#include <algorithm>

#include "subxfer/error.hpp"
#include "subxfer/unicode.hpp"

namespace subxfer {

WordPieces group_by_word(const Segmentation& seg) {
  std::vector<std::size_t> starts;
  if (seg.text.compare(0, kWordMarker.size(), kWordMarker) != 0 && !seg.text.empty()) starts.push_back(0);
  for (auto pos = seg.text.find(kWordMarker); pos != std::string::npos;
       pos = seg.text.find(kWordMarker, pos + kWordMarker.size())) {
    starts.push_back(pos);
  }
  WordPieces words(starts.size());
  for (std::size_t t = 0; t < seg.tokens.size(); ++t) {
    const Span span = seg.spans.at(t);
    auto it = std::upper_bound(starts.begin(), starts.end(), span.begin);
    if (it == starts.begin()) throw ProjectionError("token '" + seg.tokens[t] + "' precedes the first word");
    const auto word = static_cast<std::size_t>(it - starts.begin()) - 1;
    const std::size_t word_end = word + 1 < starts.size() ? starts[word + 1] : seg.text.size();
    if (span.end > word_end) {
      throw ProjectionError("sub-word '" + seg.tokens[t] + "' crosses a word boundary");
    }
    words[word].push_back(seg.tokens[t]);
  }
  return words;
}

std::vector<SubwordLink> project_sentence(const AlignmentLinks& links, const WordPieces& child,
                                          const WordPieces& parent) {
  std::vector<SubwordLink> out;
  for (const auto& link : links) {
    if (link.source >= child.size() || link.target >= parent.size()) {
      throw ProjectionError("word link " + std::to_string(link.source) + "-" + std::to_string(link.target) +
                            " outside a sentence of " + std::to_string(child.size()) + "/" +
                            std::to_string(parent.size()) + " words");
    }
    for (const auto& c : child[link.source]) {
      for (const auto& p : parent[link.target]) out.push_back({c, p});
    }
  }
  return out;
}

void LinkCounter::add(const SubwordLink& link, std::uint64_t count) {
  counts_[{link.child, link.parent}] += count;
  total_ += count;
}

void LinkCounter::add(std::span<const SubwordLink> links) {
  for (const auto& l : links) add(l);
}

void LinkCounter::merge(const LinkCounter& other) {
  for (const auto& [key, c] : other.counts_) counts_[key] += c;
  total_ += other.total_;
}

SubwordAlignmentTable aggregate_table(const LinkCounter& counter, const AggregateOptions& options,
                                      ProjectionStats* stats) {
  ProjectionStats local;
  SubwordAlignmentTable::CountMap kept;
  for (const auto& [key, count] : counter.counts()) {
    local.total_links += count;
    if (options.parent_vocab && !options.parent_vocab->contains(key.second)) {
      local.discarded_parent += count;
    } else if (options.child_vocab && !options.child_vocab->contains(key.first)) {
      local.discarded_child += count;
    } else if (count < options.min_count) {
      local.below_min_count += count;
    } else {
      kept.emplace(key, count);
      local.kept_links += count;
    }
  }
  SubwordAlignmentTable table(kept);
  local.keys = table.size();
  if (stats) *stats = local;
  return table;
}

SubwordAlignmentTable aggregate_table(std::span<const SubwordLink> links, const AggregateOptions& options,
                                      ProjectionStats* stats) {
  LinkCounter counter;
  counter.add(links);
  return aggregate_table(counter, options, stats);
}

}  // namespace subxfer
