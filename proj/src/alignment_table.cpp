#include "subxfer/alignment_table.hpp"

#include <algorithm>

#include "subxfer/error.hpp"

namespace subxfer {

bool ranks_before(const AlignedToken& a, const AlignedToken& b) {
  if (a.count != b.count) return a.count > b.count;
  return a.token < b.token;
}

SubwordAlignmentTable::SubwordAlignmentTable(const CountMap& counts) {
  for (const auto& [key, count] : counts) {
    if (count == 0) throw ValidationError("alignment count for '" + key.first + "' -> '" + key.second + "' is zero");
    entries_[key.first].push_back({key.second, count});
    total_links_ += count;
  }
  for (auto& [child, candidates] : entries_) std::sort(candidates.begin(), candidates.end(), ranks_before);
}

const std::vector<AlignedToken>* SubwordAlignmentTable::find(const std::string& child) const {
  auto it = entries_.find(child);
  return it == entries_.end() ? nullptr : &it->second;
}

}  // namespace subxfer
