#include <limits>
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"
#include "subxfer/tokenizer.hpp"
#include "test_util.hpp"

using namespace subxfer;

namespace {

const std::string M(kWordMarker);

void check_spans(const Segmentation& seg) {
  std::size_t pos = 0;
  REQUIRE(seg.tokens.size() == seg.spans.size());
  for (std::size_t i = 0; i < seg.tokens.size(); ++i) {
    CHECK(seg.spans[i].begin == pos);
    CHECK(seg.spans[i].end > seg.spans[i].begin);
    CHECK(seg.text.substr(seg.spans[i].begin, seg.spans[i].end - seg.spans[i].begin) == seg.tokens[i]);
    pos = seg.spans[i].end;
  }
  CHECK(pos == seg.text.size());
}

std::vector<std::string> random_words_corpus(std::mt19937_64& rng, std::size_t lines, const std::string& alphabet) {
  const auto chars = utf8_chars(alphabet);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lines; ++i) {
    std::string line;
    const auto words = 1 + rng() % 6;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) line += ' ';
      const auto len = 1 + rng() % 7;
      for (std::size_t c = 0; c < len; ++c) line += chars[rng() % chars.size()];
    }
    out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_SUITE("subword_tokenizer") {

TEST_CASE("annotate and decode") {
  CHECK(annotate("ab") == M + "ab");
  CHECK(annotate("  a  b ") == M + "a" + M + "b");
  CHECK(annotate("").empty());
  CHECK(decode(std::vector<std::string>{M + "ab"}) == "ab");
  CHECK(decode(std::vector<std::string>{M + "a", "b", M + "c"}) == "ab c");
  CHECK(decode(std::vector<std::string>{}).empty());
}

TEST_CASE("BPE: a single dominant pair, marker fused to the first character") {
  const std::vector<std::string> corpus{"ab ab ab"};
  // Alphabet: "▁a", "b".
  const auto m = train_bpe(corpus, {3, 1});
  REQUIRE(m.merges().size() == 1);
  CHECK(m.merges()[0] == MergePair{M + "a", "b"});
  CHECK(m.vocab().tokens() == std::vector<std::string>{"b", M + "a", M + "ab"});
}

TEST_CASE("BPE: equal pair counts go to the byte-smallest pair") {
  // (a,b) and (b,a) both occur twice; so does (▁z,a), whose left symbol
  // sorts last because the marker is a multi-byte character.
  const std::vector<std::string> corpus{"zaba zaba"};
  const auto m = train_bpe(corpus, {6, 2});
  REQUIRE_FALSE(m.merges().empty());
  CHECK(m.merges()[0] == MergePair{"a", "b"});
  CHECK(m.merges() == oracle::naive_bpe(corpus, 6, 2));
}

TEST_CASE("BPE: target must exceed the alphabet") {
  const std::vector<std::string> corpus{"ab ab"};
  CHECK_THROWS_AS(train_bpe(corpus, {2, 1}), ValidationError);
  CHECK_THROWS_AS(train_bpe(corpus, {1, 1}), ValidationError);
  CHECK_THROWS_AS(train_bpe(std::vector<std::string>{}, {10, 1}), ValidationError);
}

TEST_CASE("BPE: merge list matches a from-scratch recount on random corpora") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    const auto corpus = random_words_corpus(rng, 40, seed % 2 ? "abc" : "abcdeé");
    const std::size_t target = 10 + rng() % 40;
    const std::uint64_t min_freq = 1 + rng() % 3;
    const auto model = train_bpe(corpus, {target, min_freq});
    CHECK(model.merges() == oracle::naive_bpe(corpus, target, min_freq));
    CHECK(model.vocab().size() <= target);
    std::set<MergePair> unique(model.merges().begin(), model.merges().end());
    CHECK(unique.size() == model.merges().size());
    // Every training sentence encodes into vocabulary tokens.
    for (const auto& line : corpus) {
      const auto seg = model.encode(line);
      check_spans(seg);
      for (const auto& t : seg.tokens) CHECK(model.vocab().contains(t));
    }
  }
}

TEST_CASE("BPE: encode applies merges and passes unknown characters through") {
  const BpeModel m({{M + "a", "b"}}, Vocab({M + "a", "b", M + "ab"}));
  CHECK(m.encode("ab").tokens == std::vector<std::string>{M + "ab"});
  CHECK(m.encode("").tokens.empty());
  const auto seg = m.encode("abq ab");
  CHECK(seg.tokens == std::vector<std::string>{M + "ab", "q", M + "ab"});
  check_spans(seg);
}

TEST_CASE("BPE: serialization roundtrip") {
  std::mt19937_64 rng(4);
  const auto corpus = random_words_corpus(rng, 60, "abcdxyzü");
  const auto m = train_bpe(corpus, {40, 2});
  TempDir dir;
  write_bpe(m, dir / "m", dir / "v");
  const auto back = read_bpe(dir / "m", dir / "v");
  CHECK(back.merges() == m.merges());
  CHECK(back.vocab() == m.vocab());
  write_file(dir / "bad", "a\n");
  CHECK_THROWS_AS(read_bpe(dir / "bad", dir / "v"), FormatError);
}

TEST_CASE("unigram: encode picks the most probable segmentation") {
  const UnigramModel m({{M + "ab", std::log(0.5)}, {M + "a", std::log(0.25)}, {"b", std::log(0.25)}});
  CHECK(m.encode("ab").tokens == std::vector<std::string>{M + "ab"});
  CHECK(m.encode("").tokens.empty());
  const auto seg = m.encode("ab ?b");
  CHECK(seg.tokens == std::vector<std::string>{M + "ab", M, "?", "b"});
  check_spans(seg);
}

TEST_CASE("unigram: encode matches exhaustive enumeration including tie-breaks") {
  std::mt19937_64 rng(8);
  const std::vector<std::string> letters{"a", "b", "c", M};
  for (int trial = 0; trial < 200; ++trial) {
    CAPTURE(trial);
    std::map<std::string, double> logp;
    for (const auto& l : letters) logp[l] = -double(1 + rng() % 4);
    const auto extra = 3 + rng() % 6;
    for (std::size_t k = 0; k < extra; ++k) {
      std::string p;
      const auto len = 2 + rng() % 3;
      for (std::size_t c = 0; c < len; ++c) p += letters[rng() % 3];
      if (rng() % 3 == 0) p = M + p;
      // Coarse integer scores make ties common.
      logp[p] = -double(1 + rng() % 4);
    }
    std::vector<Piece> pieces;
    for (const auto& [t, lp] : logp) pieces.push_back({t, lp});
    const UnigramModel m(pieces);
    std::string word;
    const auto len = 1 + rng() % 7;
    for (std::size_t c = 0; c < len; ++c) word += letters[rng() % 3];
    const auto best = oracle::best_segmentation(M + word, logp);
    CHECK(m.encode(word).tokens == best.tokens);
  }
}

TEST_CASE("unigram: EM at a fixed inventory matches enumeration on abab x100") {
  const std::vector<WordCount> words{{M + "abab", 100}};
  std::vector<Piece> pieces{{M, std::log(0.25)}, {"a", std::log(0.25)}, {"b", std::log(0.25)}, {"ab", std::log(0.25)}};
  std::map<std::string, double> ref;
  for (const auto& p : pieces) ref[p.token] = p.log_prob;

  const auto history = run_unigram_em(pieces, words, 5);
  REQUIRE(history.size() == 6);
  for (int r = 0; r < 5; ++r) {
    const double ll = oracle::unigram_em_round(ref, words);
    CHECK(history[r] == doctest::Approx(ll).epsilon(1e-12));
  }
  for (const auto& p : pieces) CHECK(p.log_prob == doctest::Approx(ref[p.token]).epsilon(1e-12));
  auto lp = [&](const std::string& t) {
    for (const auto& p : pieces) {
      if (p.token == t) return p.log_prob;
    }
    return -std::numeric_limits<double>::infinity();
  };
  CHECK(lp("ab") > lp("a"));
  CHECK(lp("ab") > lp("b"));
}

TEST_CASE("unigram: trained model on abab x100 ranks a multi-character piece first") {
  const std::vector<std::string> corpus(100, "abab");
  UnigramTrainOptions opts;
  opts.vocab_size = 4;
  const auto r = train_unigram(corpus, opts);
  const auto& pieces = r.model.pieces();
  CHECK(pieces.size() == 4);
  std::set<std::string> tokens;
  for (const auto& p : pieces) tokens.insert(p.token);
  CHECK(tokens.count("a"));
  CHECK(tokens.count("b"));
  CHECK(tokens.count(M));
  CHECK(utf8_length(pieces.front().token) > 1);
  double mass = 0.0;
  for (const auto& p : pieces) mass += std::exp(p.log_prob);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("unigram: degenerate corpus yields a character model with a warning") {
  const std::vector<std::string> corpus{"aaaa"};
  UnigramTrainOptions opts;
  opts.vocab_size = 2;
  const auto r = train_unigram(corpus, opts);
  std::set<std::string> tokens;
  for (const auto& p : r.model.pieces()) tokens.insert(p.token);
  CHECK(tokens.count("a"));
  CHECK_FALSE(r.warnings.empty());
  CHECK(decode(r.model.encode("aaaa").tokens) == "aaaa");
}

TEST_CASE("unigram: characters survive pruning and probabilities sum to one") {
  std::mt19937_64 rng(21);
  const auto corpus = random_words_corpus(rng, 300, "abcdefghijklmnöüç");
  UnigramTrainOptions opts;
  opts.vocab_size = 60;
  const auto r = train_unigram(corpus, opts);
  std::set<std::string> tokens;
  double mass = 0.0;
  for (const auto& p : r.model.pieces()) {
    tokens.insert(p.token);
    mass += std::exp(p.log_prob);
  }
  CHECK(r.model.pieces().size() <= 60);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  for (const auto& line : corpus) {
    const auto annotated = annotate(line);
    for (auto ch : utf8_chars(annotated)) CHECK_MESSAGE(tokens.count(std::string(ch)), std::string(ch));
  }
}

TEST_CASE("unigram: EM likelihood is non-decreasing at a fixed inventory") {
  std::mt19937_64 rng(2);
  const auto words = count_words(random_words_corpus(rng, 200, "abcde"));
  for (auto estep : {EStep::Lattice, EStep::Viterbi}) {
    std::vector<Piece> pieces;
    std::set<std::string> seen;
    for (const auto& wc : words) {
      const auto chars = oracle::chars_of(wc.word);
      for (std::size_t i = 0; i < chars.size(); ++i) {
        std::string s;
        for (std::size_t j = i; j < chars.size() && j < i + 4; ++j) {
          s += chars[j];
          if (seen.insert(s).second) pieces.push_back({s, 0.0});
        }
      }
    }
    for (auto& p : pieces) p.log_prob = -std::log(double(pieces.size()));
    const auto h = run_unigram_em(pieces, words, 10, estep);
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] >= h[i - 1] - 1e-9);
  }
}

TEST_CASE("unigram: training is deterministic and serializes exactly") {
  std::mt19937_64 rng(6);
  const auto corpus = random_words_corpus(rng, 200, "abcdefgh");
  UnigramTrainOptions opts;
  opts.vocab_size = 30;
  TempDir dir;
  write_unigram(train_unigram(corpus, opts).model, dir / "a");
  write_unigram(train_unigram(corpus, opts).model, dir / "b");
  CHECK(slurp(dir / "a") == slurp(dir / "b"));
  const auto back = read_unigram(dir / "a");
  write_unigram(back, dir / "c");
  CHECK(slurp(dir / "c") == slurp(dir / "a"));
  write_file(dir / "bad", "a\tnotanumber\n");
  CHECK_THROWS_AS(read_unigram(dir / "bad"), FormatError);
}

TEST_CASE("roundtrip: decode(encode(s)) is the normalized input") {
  std::mt19937_64 rng(99);
  std::vector<std::string> train;
  for (int i = 0; i < 200; ++i) train.push_back(normalize_text(random_unicode(rng, 30), {}));
  UnigramTrainOptions uo;
  // Random text spans ~1000 distinct characters; both targets must exceed that.
  uo.vocab_size = 3000;
  const TokenizerModel uni = train_unigram(train, uo).model;
  const TokenizerModel bpe = train_bpe(train, {3000, 2});
  for (int i = 0; i < 1000; ++i) {
    const auto s = normalize_text(random_unicode(rng, 40), {});
    for (const auto* m : {&uni, &bpe}) {
      const auto seg = encode(*m, s);
      CHECK(decode(seg.tokens) == s);
      check_spans(seg);
    }
  }
}

TEST_CASE("uniform unigram over a vocabulary picks the fewest tokens") {
  const auto m = uniform_unigram(Vocab({M + "produck", "tion", M + "p", "r", "o"}));
  CHECK(m.encode("producktion").tokens == std::vector<std::string>{M + "produck", "tion"});
}

}
