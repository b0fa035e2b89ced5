#include <doctest.h>

#include <map>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"
#include "subxfer/projection.hpp"
#include "test_util.hpp"

using namespace subxfer;

namespace {

const std::string M(kWordMarker);

// Example pair: Turkish "üretme" / "üre" against German
// "produktion" / "Harnstoff", with its sub-word splits.
const WordPieces kChild{{"üre", "tme"}, {"üre"}};
const WordPieces kParent{{"produck", "tion"}, {"Harn", "stoff"}};
const AlignmentLinks kLinks{{0, 0}, {1, 1}};

}  // namespace

TEST_SUITE("subword_projection") {

TEST_CASE("example pair: the cross product of sub-words") {
  const auto first = project_sentence({{0, 0}}, kChild, kParent);
  CHECK(first == std::vector<SubwordLink>{{"üre", "produck"}, {"üre", "tion"}, {"tme", "produck"}, {"tme", "tion"}});
  const auto second = project_sentence({{1, 1}}, kChild, kParent);
  CHECK(second == std::vector<SubwordLink>{{"üre", "Harn"}, {"üre", "stoff"}});
  CHECK(project_sentence(kLinks, kChild, kParent).size() == 6);
}

TEST_CASE("single sub-word words yield one link") {
  CHECK(project_sentence({{0, 0}}, {{"a"}}, {{"x"}}) == std::vector<SubwordLink>{{"a", "x"}});
  CHECK(project_sentence({}, {{"a"}}, {{"x"}}).empty());
}

TEST_CASE("out-of-range word links") {
  CHECK_THROWS_AS(project_sentence({{2, 0}}, kChild, kParent), ProjectionError);
  CHECK_THROWS_AS(project_sentence({{0, 2}}, kChild, kParent), ProjectionError);
}

TEST_CASE("group_by_word attributes tokens by span") {
  Segmentation seg;
  seg.text = M + "üretme" + M + "üre";
  seg.tokens = {M + "üre", "tme", M + "üre"};
  std::size_t pos = 0;
  for (const auto& t : seg.tokens) {
    seg.spans.push_back({pos, pos + t.size()});
    pos += t.size();
  }
  CHECK(group_by_word(seg) == WordPieces{{M + "üre", "tme"}, {M + "üre"}});

  // A lone marker token still belongs to its word.
  const auto u = uniform_unigram(Vocab({M, "ab", "c"}));
  CHECK(group_by_word(u.encode("ab c")) == WordPieces{{M, "ab"}, {M, "c"}});
  CHECK(group_by_word(u.encode("")).empty());
}

TEST_CASE("group_by_word rejects a token crossing a word boundary") {
  Segmentation seg;
  seg.text = M + "ab" + M + "c";
  seg.tokens = {M + "a", "b" + M, "c"};
  seg.spans = {{0, 4}, {4, 8}, {8, 9}};
  CHECK_THROWS_AS(group_by_word(seg), ProjectionError);
}

TEST_CASE("aggregation of the example pair ranks D(üre) by byte order") {
  LinkCounter counter;
  counter.add(project_sentence(kLinks, kChild, kParent));
  const auto table = aggregate_table(counter);
  const auto* v = table.find("üre");
  REQUIRE(v);
  CHECK(*v == std::vector<AlignedToken>{{"Harn", 1}, {"produck", 1}, {"stoff", 1}, {"tion", 1}});
  CHECK(table.find("tme")->size() == 2);
  CHECK(table.total_links() == 6);
}

TEST_CASE("repeated links are summed") {
  LinkCounter counter;
  for (int i = 0; i < 3; ++i) counter.add(project_sentence({{0, 0}}, {{"a"}}, {{"x"}}));
  const auto table = aggregate_table(counter);
  CHECK(*table.find("a") == std::vector<AlignedToken>{{"x", 3}});
}

TEST_CASE("parent tokens outside the parent vocabulary are discarded and counted") {
  LinkCounter counter;
  counter.add(project_sentence(kLinks, kChild, kParent));
  const Vocab parent({"Harn", "tion"});
  ProjectionStats stats;
  const auto table = aggregate_table(counter, {&parent, nullptr, 1}, &stats);
  CHECK(*table.find("üre") == std::vector<AlignedToken>{{"Harn", 1}, {"tion", 1}});
  CHECK(*table.find("tme") == std::vector<AlignedToken>{{"tion", 1}});
  CHECK(stats.total_links == 6);
  CHECK(stats.kept_links == 3);
  CHECK(stats.discarded_parent == 3);
  CHECK(stats.keys == 2);
}

TEST_CASE("minimum count and child filter") {
  LinkCounter counter;
  counter.add({"a", "x"}, 3);
  counter.add({"a", "y"}, 1);
  counter.add({"b", "x"}, 2);
  const Vocab child({"a"});
  ProjectionStats stats;
  const auto table = aggregate_table(counter, {nullptr, &child, 2}, &stats);
  CHECK(table.size() == 1);
  CHECK(*table.find("a") == std::vector<AlignedToken>{{"x", 3}});
  CHECK(stats.discarded_child == 2);
  CHECK(stats.below_min_count == 1);
}

TEST_CASE("cardinality and aggregation agree with a brute-force recount") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    LinkCounter counter, merged_a, merged_b;
    std::map<std::pair<std::string, std::string>, std::uint64_t> recount;
    for (int sentence = 0; sentence < 20; ++sentence) {
      WordPieces child(1 + rng() % 5), parent(1 + rng() % 5);
      for (auto& w : child) {
        for (std::size_t k = 0; k <= rng() % 3; ++k) w.push_back("c" + std::to_string(rng() % 6));
      }
      for (auto& w : parent) {
        for (std::size_t k = 0; k <= rng() % 3; ++k) w.push_back("p" + std::to_string(rng() % 6));
      }
      AlignmentLinks links;
      for (std::uint32_t i = 0; i < child.size(); ++i) {
        if (rng() % 3) links.push_back({i, static_cast<std::uint32_t>(rng() % parent.size())});
      }
      std::size_t expected = 0;
      for (const auto& l : links) {
        expected += child[l.source].size() * parent[l.target].size();
        for (const auto& c : child[l.source]) {
          for (const auto& p : parent[l.target]) ++recount[{c, p}];
        }
      }
      const auto out = project_sentence(links, child, parent);
      CHECK(out.size() == expected);
      counter.add(out);
      (sentence % 2 ? merged_a : merged_b).add(out);
    }
    CHECK(counter.counts() == recount);
    merged_b.merge(merged_a);
    CHECK(merged_b.counts() == counter.counts());
    CHECK(merged_b.total() == counter.total());

    const auto table = aggregate_table(counter);
    for (const auto& [child, list] : table.entries()) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        CHECK(list[i].count == recount.at({child, list[i].token}));
        if (i) CHECK(ranks_before(list[i - 1], list[i]));
      }
    }
    std::stringstream buf;
    write_alignment_table(table, buf);
    CHECK(read_alignment_table(buf) == table);
  }
}

}
