#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace subxfer {

struct AlignedToken {
  std::string token;
  std::uint64_t count = 0;

  friend bool operator==(const AlignedToken&, const AlignedToken&) = default;
};

/// Ranking used everywhere candidates are ordered: count descending, then
/// token bytes ascending.
bool ranks_before(const AlignedToken& a, const AlignedToken& b);

/// For each child sub-word x, the parent sub-words it was aligned to (v_x),
/// ranked by how often the link was observed.
class SubwordAlignmentTable {
 public:
  using CountMap = std::map<std::pair<std::string, std::string>, std::uint64_t>;

  SubwordAlignmentTable() = default;
  /// Builds from (child, parent) -> count. Zero counts are rejected.
  explicit SubwordAlignmentTable(const CountMap& counts);

  /// Ranked candidates for `child`, or nullptr when it has no aligned entry.
  const std::vector<AlignedToken>* find(const std::string& child) const;

  /// Keys in byte order.
  const std::map<std::string, std::vector<AlignedToken>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::uint64_t total_links() const noexcept { return total_links_; }

  friend bool operator==(const SubwordAlignmentTable&, const SubwordAlignmentTable&) = default;

 private:
  std::map<std::string, std::vector<AlignedToken>> entries_;
  std::uint64_t total_links_ = 0;
};

}  // namespace subxfer
