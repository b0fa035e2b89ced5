#include <doctest.h>

#include <clocale>
#include <cstring>
#include <limits>
#include <locale>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"
#include "test_util.hpp"

using namespace subxfer;

TEST_SUITE("corpus_io") {

TEST_CASE("parallel corpus parses whitespace tokens in file order") {
  TempDir dir;
  write_file(dir / "s", "a b\n");
  write_file(dir / "t", "x y\n");
  const auto c = load_parallel_corpus(dir / "s", dir / "t");
  REQUIRE(c.pairs.size() == 1);
  CHECK(c.pairs[0] == SentencePair{{"a", "b"}, {"x", "y"}, 0});
}

TEST_CASE("line count mismatch names both counts") {
  TempDir dir;
  write_file(dir / "s", "a\nb\n");
  write_file(dir / "t", "x\ny\nz\n");
  try {
    load_parallel_corpus(dir / "s", dir / "t");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == "line count mismatch 2≠3");
  }
}

TEST_CASE("missing corpus file") {
  TempDir dir;
  write_file(dir / "t", "x\n");
  CHECK_THROWS_WITH_AS(load_parallel_corpus(dir / "nope", dir / "t"), doctest::Contains("input not found"),
                       ValidationError);
}

TEST_CASE("normalization: lowercasing and NFC") {
  NormalizeOptions lower{true, true};
  auto c = make_parallel_corpus({"A"}, {"x"}, lower);
  CHECK(c.pairs.at(0) == SentencePair{{"a"}, {"x"}, 0});

  // "e" + combining acute composes to U+00E9.
  c = make_parallel_corpus({"caf\x65\xCC\x81"}, {"x"});
  CHECK(c.pairs.at(0).source == std::vector<std::string>{"caf\xC3\xA9"});
  // Without NFC the decomposed form is preserved.
  c = make_parallel_corpus({"caf\x65\xCC\x81"}, {"x"}, {false, false});
  CHECK(c.pairs.at(0).source == std::vector<std::string>{"caf\x65\xCC\x81"});
  // Case is preserved by default.
  c = make_parallel_corpus({"İstanbul ÄB"}, {"x"});
  CHECK(c.pairs.at(0).source == std::vector<std::string>{"İstanbul", "ÄB"});
  c = make_parallel_corpus({"ÄB"}, {"x"}, lower);
  CHECK(c.pairs.at(0).source == std::vector<std::string>{"äb"});
}

TEST_CASE("pairs with an empty side are skipped and counted") {
  const auto c = make_parallel_corpus({"a", "  ", "b", "c"}, {"x", "y", "\t", "z"});
  CHECK(c.line_count == 4);
  CHECK(c.skipped == 2);
  REQUIRE(c.pairs.size() == 2);
  CHECK(c.pairs[0].index == 0);
  CHECK(c.pairs[1].index == 3);
}

TEST_CASE("CRLF line endings are stripped") {
  TempDir dir;
  write_file(dir / "s", "a b\r\nc\r\n");
  write_file(dir / "t", "x\r\ny\r\n");
  const auto c = load_parallel_corpus(dir / "s", dir / "t");
  CHECK(c.pairs.at(0).source == std::vector<std::string>{"a", "b"});
  CHECK(c.pairs.at(1).target == std::vector<std::string>{"y"});
}

TEST_CASE("pharaoh formatting") {
  CHECK(format_pharaoh_line({{0, 0}, {1, 0}}) == "0-0 1-0");
  CHECK(format_pharaoh_line({}).empty());
  CHECK(parse_pharaoh_line("2-1 0-0") == AlignmentLinks{{0, 0}, {2, 1}});
  CHECK(parse_pharaoh_line("").empty());
  CHECK(parse_pharaoh_line("  0-1\t3-2 ") == AlignmentLinks{{0, 1}, {3, 2}});
}

TEST_CASE("pharaoh parse errors carry the line number") {
  for (const char* bad : {"0-x", "1", "-1-2", "1-2-3", "a-b", "1--2", "0-0,1-1", "1 -2"}) {
    CAPTURE(bad);
    try {
      parse_pharaoh_line(bad, 7);
      FAIL("expected an error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 7);
    }
  }
  TempDir dir;
  write_file(dir / "a.pharaoh", "0-0\n1-1 2-x\n");
  try {
    read_pharaoh(dir / "a.pharaoh");
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("pharaoh roundtrip on random alignments") {
  std::mt19937_64 rng(11);
  TempDir dir;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AlignmentLinks> all(std::uniform_int_distribution<int>(0, 30)(rng));
    for (auto& links : all) {
      const int n = std::uniform_int_distribution<int>(0, 12)(rng);
      for (int k = 0; k < n; ++k) {
        links.push_back({static_cast<std::uint32_t>(rng() % 40), static_cast<std::uint32_t>(rng() % 40)});
      }
      canonicalize(links);
    }
    write_pharaoh(all, dir / "x.pharaoh");
    CHECK(read_pharaoh(dir / "x.pharaoh") == all);
  }
}

TEST_CASE("embedding text format matches the documented layout") {
  Embeddings e{Vocab({"a", "b"}), EmbeddingMatrix(2, 2)};
  e.matrix.row(0)[0] = 1.0f;
  e.matrix.row(1)[1] = 1.0f;
  std::ostringstream out;
  write_embeddings_text(e, out);
  CHECK(out.str() == "2 2\na 1.000000 0.000000\nb 0.000000 1.000000\n");
}

TEST_CASE("embedding text header of a 50K x 512 matrix is accepted") {
  std::string text = "50000 512\n";
  std::string row;
  for (int c = 0; c < 512; ++c) row += " 0";
  row += '\n';
  text.reserve(text.size() + 50000 * (row.size() + 8));
  for (int r = 0; r < 50000; ++r) text += "t" + std::to_string(r) + row;
  std::istringstream in(text);
  const auto e = read_embeddings_text(in);
  CHECK(e.vocab.size() == 50000);
  CHECK(e.matrix.dim() == 512);
}

TEST_CASE("embedding binary roundtrip is bit-identical") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g(0.0f, 10.0f);
  EmbeddingMatrix m(10, 8);
  for (auto& v : m.data()) v = g(rng);
  m.row(0)[0] = -0.0f;
  m.row(0)[1] = std::numeric_limits<float>::denorm_min();
  m.row(0)[2] = std::numeric_limits<float>::max();
  std::stringstream buf;
  write_embeddings_binary(m, buf);
  const auto back = read_embeddings_binary(buf);
  REQUIRE(back.rows() == 10);
  CHECK(std::memcmp(back.data().data(), m.data().data(), m.data().size_bytes()) == 0);

  std::vector<std::string> tokens;
  for (int i = 0; i < 10; ++i) tokens.push_back("tok with space " + std::to_string(i));
  TempDir dir;
  write_vocab(Vocab(tokens), dir / "v");
  write_embeddings({Vocab(tokens), m}, dir / "e.bin", EmbeddingFormat::Binary);
  const auto full = read_embeddings(dir / "e.bin", EmbeddingFormat::Binary, dir / "v");
  CHECK(full.vocab == Vocab(tokens));
  CHECK(std::memcmp(full.matrix.data().data(), m.data().data(), m.data().size_bytes()) == 0);
}

TEST_CASE("embedding binary layout is little-endian float32 after a text header") {
  EmbeddingMatrix m(1, 2);
  m.row(0)[0] = 1.0f;
  m.row(0)[1] = -2.0f;
  std::stringstream buf;
  write_embeddings_binary(m, buf);
  const std::string s = buf.str();
  CHECK(s == std::string("1 2\n\x00\x00\x80\x3f\x00\x00\x00\xc0", 12));
}

TEST_CASE("embedding text roundtrip is within 1e-6") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  std::vector<std::string> tokens;
  for (int i = 0; i < 50; ++i) tokens.push_back("▁t" + std::to_string(i));
  Embeddings e{Vocab(tokens), EmbeddingMatrix(50, 16)};
  for (auto& v : e.matrix.data()) v = u(rng);
  std::stringstream buf;
  write_embeddings_text(e, buf);
  const auto back = read_embeddings_text(buf);
  CHECK(back.vocab == e.vocab);
  double worst = 0.0;
  for (std::size_t i = 0; i < e.matrix.data().size(); ++i) {
    worst = std::max(worst, std::abs(double(back.matrix.data()[i]) - e.matrix.data()[i]));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("embedding format errors") {
  std::stringstream out;
  Embeddings spaced{Vocab({"a b"}), EmbeddingMatrix(1, 1)};
  CHECK_THROWS_WITH(write_embeddings_text(spaced, out), doctest::Contains("binary"));

  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_embeddings_text(in);
  };
  CHECK_THROWS_AS(parse("3 2\na 1 2\nb 1 2\n"), FormatError);
  CHECK_THROWS_AS(parse("1 2\na 1 2\nb 1 2\n"), FormatError);
  CHECK_THROWS_AS(parse("2 2\na 1 2\nb 1\n"), FormatError);
  CHECK_THROWS_AS(parse("2 2\na 1 2\nb 1 2 3\n"), FormatError);
  CHECK_THROWS_AS(parse("1 1\na nan\n"), FormatError);
  CHECK_THROWS_AS(parse("1 1\na 1,5\n"), FormatError);
  CHECK_THROWS_AS(parse("x 1\n"), FormatError);

  std::stringstream bin;
  write_embeddings_binary(EmbeddingMatrix(2, 2), bin);
  std::string truncated = bin.str();
  truncated.pop_back();
  std::istringstream tin(truncated);
  CHECK_THROWS_AS(read_embeddings_binary(tin), FormatError);
  std::istringstream lin(bin.str() + "x");
  CHECK_THROWS_AS(read_embeddings_binary(lin), FormatError);

  TempDir dir;
  write_embeddings({Vocab({"a", "b"}), EmbeddingMatrix(2, 2)}, dir / "e.bin", EmbeddingFormat::Binary);
  write_vocab(Vocab({"a"}), dir / "v");
  CHECK_THROWS_AS(read_embeddings(dir / "e.bin", EmbeddingFormat::Binary, dir / "v"), ValidationError);
  CHECK_THROWS_AS(read_embeddings(dir / "e.bin", EmbeddingFormat::Binary), ValidationError);
}

TEST_CASE("numeric output ignores the global locale") {
  std::locale previous;
  bool switched = false;
  for (const char* name : {"de_DE.UTF-8", "de_DE.utf8", "fr_FR.UTF-8"}) {
    try {
      std::locale::global(std::locale(name));
      std::setlocale(LC_ALL, name);
      switched = true;
      break;
    } catch (const std::runtime_error&) {
    }
  }
  Embeddings e{Vocab({"a"}), EmbeddingMatrix(1, 1)};
  e.matrix.row(0)[0] = 1.5f;
  std::ostringstream out;
  write_embeddings_text(e, out);
  std::locale::global(previous);
  std::setlocale(LC_ALL, "C");
  CHECK(out.str() == "1 1\na 1.500000\n");
  if (!switched) MESSAGE("no comma-decimal locale installed; checked under the default locale only");
}

TEST_CASE("alignment table TSV: the example D(üre) is written in byte order") {
  SubwordAlignmentTable t({{{"üre", "tion"}, 1}, {{"üre", "Harn"}, 1}, {{"üre", "stoff"}, 1}, {{"üre", "produck"}, 1}});
  std::ostringstream out;
  write_alignment_table(t, out);
  CHECK(out.str() == "üre\tHarn\t1\nüre\tproduck\t1\nüre\tstoff\t1\nüre\ttion\t1\n");
}

TEST_CASE("alignment table TSV: grouping and ranking") {
  SubwordAlignmentTable t({{{"b", "x"}, 2}, {{"a", "y"}, 1}, {{"a", "z"}, 5}, {{"b", "w"}, 2}});
  std::ostringstream out;
  write_alignment_table(t, out);
  CHECK(out.str() == "a\tz\t5\na\ty\t1\nb\tw\t2\nb\tx\t2\n");
}

TEST_CASE("alignment table TSV: empty table is an empty file") {
  TempDir dir;
  write_alignment_table(SubwordAlignmentTable{}, dir / "t.tsv");
  CHECK(slurp(dir / "t.tsv").empty());
  CHECK(read_alignment_table(dir / "t.tsv").empty());
}

TEST_CASE("alignment table TSV: random 1000-entry roundtrip") {
  std::mt19937_64 rng(17);
  SubwordAlignmentTable::CountMap counts;
  while (counts.size() < 1000) {
    const auto c = "▁c" + std::to_string(rng() % 120);
    const auto p = random_unicode(rng, 4) + "p" + std::to_string(rng() % 50);
    std::string clean;
    for (char ch : p) clean += (ch == '\t' || ch == ' ') ? '_' : ch;
    counts[{c, clean}] = 1 + rng() % 9;
  }
  const SubwordAlignmentTable t(counts);
  std::stringstream buf;
  write_alignment_table(t, buf);
  const auto back = read_alignment_table(buf);
  CHECK(back == t);
  std::stringstream again;
  write_alignment_table(back, again);
  CHECK(again.str() == buf.str());
}

TEST_CASE("alignment table TSV: errors") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_alignment_table(in);
  };
  CHECK_THROWS_AS(parse("a\tb\tx\n"), FormatError);
  CHECK_THROWS_AS(parse("a\tb\t1.5\n"), FormatError);
  CHECK_THROWS_AS(parse("a\tb\t-1\n"), FormatError);
  CHECK_THROWS_AS(parse("a\tb\t0\n"), FormatError);
  CHECK_THROWS_AS(parse("a\tb\n"), FormatError);
  CHECK_THROWS_AS(parse("a\tb\t1\na\tb\t2\n"), FormatError);
  try {
    parse("a\tb\t1\nc\td\tz\n");
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("vocab file roundtrip and invariants") {
  TempDir dir;
  const Vocab v({"▁der", "ka", "x y"});
  write_vocab(v, dir / "v");
  CHECK(read_vocab(dir / "v") == v);
  CHECK(v.find("ka") == TokenId{1});
  CHECK_FALSE(v.find("zz"));
  CHECK_THROWS_AS(Vocab({"a", "a"}), ValidationError);
  CHECK_THROWS_AS(Vocab({""}), ValidationError);
}

TEST_CASE("atomic_write leaves the target untouched when the writer fails") {
  TempDir dir;
  write_file(dir / "out", "old");
  CHECK_THROWS(atomic_write(dir / "out", [](std::ostream& o) {
    o << "partial";
    throw std::runtime_error("boom");
  }));
  CHECK(slurp(dir / "out") == "old");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& entry : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
}

}
