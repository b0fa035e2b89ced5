#include <algorithm>
#include <set>

#include "subxfer/error.hpp"
#include "subxfer/word_aligner.hpp"

namespace subxfer {

Symmetrization parse_symmetrization(std::string_view name) {
  if (name == "intersection") return Symmetrization::Intersection;
  if (name == "union") return Symmetrization::Union;
  if (name == "grow-diag-final-and") return Symmetrization::GrowDiagFinalAnd;
  throw ValidationError("unknown symmetrization '" + std::string(name) +
                        "' (expected intersection, union or grow-diag-final-and)");
}

namespace {

void check_range(const AlignmentLinks& links, std::size_t source_length, std::size_t target_length) {
  for (const auto& l : links) {
    if (l.source >= source_length || l.target >= target_length) {
      throw ValidationError("link " + std::to_string(l.source) + "-" + std::to_string(l.target) +
                            " outside a " + std::to_string(source_length) + "x" + std::to_string(target_length) +
                            " sentence pair");
    }
  }
}

}  // namespace

AlignmentLinks symmetrize(const AlignmentLinks& forward, const AlignmentLinks& reverse, Symmetrization mode,
                          std::size_t source_length, std::size_t target_length) {
  check_range(forward, source_length, target_length);
  check_range(reverse, source_length, target_length);
  const std::set<Link> fwd(forward.begin(), forward.end());
  const std::set<Link> rev(reverse.begin(), reverse.end());
  std::set<Link> uni = fwd;
  uni.insert(rev.begin(), rev.end());
  std::set<Link> result;
  std::set_intersection(fwd.begin(), fwd.end(), rev.begin(), rev.end(), std::inserter(result, result.end()));

  if (mode == Symmetrization::Union) {
    result = uni;
  } else if (mode == Symmetrization::GrowDiagFinalAnd) {
    std::vector<bool> src_aligned(source_length, false), tgt_aligned(target_length, false);
    for (const auto& l : result) {
      src_aligned[l.source] = true;
      tgt_aligned[l.target] = true;
    }
    static constexpr int kNeighbors[8][2] = {{-1, 0}, {0, -1}, {1, 0}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    for (bool added = true; added;) {
      added = false;
      for (std::size_t s = 0; s < source_length; ++s) {
        for (std::size_t t = 0; t < target_length; ++t) {
          if (!result.count({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(t)})) continue;
          for (const auto& d : kNeighbors) {
            const long ns = static_cast<long>(s) + d[0];
            const long nt = static_cast<long>(t) + d[1];
            if (ns < 0 || nt < 0 || ns >= static_cast<long>(source_length) || nt >= static_cast<long>(target_length)) {
              continue;
            }
            const Link n{static_cast<std::uint32_t>(ns), static_cast<std::uint32_t>(nt)};
            if ((!src_aligned[n.source] || !tgt_aligned[n.target]) && uni.count(n) && !result.count(n)) {
              result.insert(n);
              src_aligned[n.source] = true;
              tgt_aligned[n.target] = true;
              added = true;
            }
          }
        }
      }
    }
    for (const auto* side : {&fwd, &rev}) {
      for (const auto& l : *side) {
        if (!src_aligned[l.source] && !tgt_aligned[l.target]) {
          result.insert(l);
          src_aligned[l.source] = true;
          tgt_aligned[l.target] = true;
        }
      }
    }
  }
  return AlignmentLinks(result.begin(), result.end());
}

}  // namespace subxfer
