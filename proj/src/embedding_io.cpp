#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"

namespace fs = std::filesystem;

namespace subxfer {

namespace {

struct Header {
  std::size_t rows = 0;
  std::size_t dim = 0;
};

bool parse_size(std::string_view text, std::size_t& value) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && is_ascii_space(line[pos])) ++pos;
    std::size_t end = pos;
    while (end < line.size() && !is_ascii_space(line[end])) ++end;
    if (end > pos) fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

Header parse_header(std::string_view line) {
  const auto fields = split_fields(line);
  Header h;
  if (fields.size() != 2 || !parse_size(fields[0], h.rows) || !parse_size(fields[1], h.dim)) {
    throw FormatError("expected header '<rows> <dim>'", 1);
  }
  if (h.dim == 0) throw FormatError("embedding dimension must be positive", 1);
  return h;
}

std::string format_header(const EmbeddingMatrix& m) {
  return std::to_string(m.rows()) + " " + std::to_string(m.dim()) + "\n";
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

}  // namespace

EmbeddingFormat parse_embedding_format(std::string_view name) {
  if (name == "text" || name == "txt") return EmbeddingFormat::Text;
  if (name == "binary" || name == "bin") return EmbeddingFormat::Binary;
  throw ValidationError("unknown embedding format '" + std::string(name) + "' (expected text or binary)");
}

void write_embeddings_text(const Embeddings& embeddings, std::ostream& out) {
  const auto& m = embeddings.matrix;
  if (m.rows() != embeddings.vocab.size()) {
    throw ValidationError("matrix has " + std::to_string(m.rows()) + " rows but vocabulary has " +
                          std::to_string(embeddings.vocab.size()) + " tokens");
  }
  for (const auto& token : embeddings.vocab.tokens()) {
    for (char c : token) {
      if (is_ascii_space(c)) {
        throw ValidationError("token '" + token + "' contains whitespace; use the binary embedding format");
      }
    }
  }
  out << format_header(m);
  std::array<char, 64> buf{};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << embeddings.vocab.token(static_cast<TokenId>(r));
    for (float v : m.row(r)) {
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 6);
      if (ec != std::errc()) throw Error("cannot format embedding value");
      out << ' ';
      out.write(buf.data(), ptr - buf.data());
    }
    out << '\n';
  }
}

Embeddings read_embeddings_text(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty embedding file");
  const Header h = parse_header(line);
  std::vector<std::string> tokens;
  tokens.reserve(h.rows);
  EmbeddingMatrix m(h.rows, h.dim);
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (tokens.size() == h.rows) {
      throw FormatError("more rows than the header's " + std::to_string(h.rows), line_number);
    }
    if (fields.size() != h.dim + 1) {
      throw FormatError("expected " + std::to_string(h.dim) + " values, found " + std::to_string(fields.size() - 1),
                        line_number);
    }
    auto row = m.row(tokens.size());
    for (std::size_t d = 0; d < h.dim; ++d) {
      const auto f = fields[d + 1];
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw FormatError("bad embedding value '" + std::string(f) + "'", line_number);
      }
      row[d] = v;
    }
    tokens.emplace_back(fields[0]);
  }
  if (tokens.size() != h.rows) {
    throw FormatError("header declares " + std::to_string(h.rows) + " rows, found " + std::to_string(tokens.size()));
  }
  Vocab vocab;
  try {
    vocab = Vocab(std::move(tokens));
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
  return {std::move(vocab), std::move(m)};
}

void write_embeddings_binary(const EmbeddingMatrix& m, std::ostream& out) {
  out << format_header(m);
  std::vector<char> bytes(m.data().size() * 4);
  std::size_t offset = 0;
  for (float v : m.data()) {
    const auto le = to_little_endian(std::bit_cast<std::uint32_t>(v));
    std::memcpy(bytes.data() + offset, &le, 4);
    offset += 4;
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingMatrix read_embeddings_binary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty embedding file");
  const Header h = parse_header(line);
  EmbeddingMatrix m(h.rows, h.dim);
  const std::size_t n = h.rows * h.dim;
  std::vector<char> bytes(n * 4);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw FormatError("binary payload shorter than " + std::to_string(h.rows) + "x" + std::to_string(h.dim));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after binary payload");
  auto data = m.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t raw = 0;
    std::memcpy(&raw, bytes.data() + i * 4, 4);
    const float v = std::bit_cast<float>(to_little_endian(raw));
    if (!std::isfinite(v)) throw FormatError("non-finite value at row " + std::to_string(i / h.dim));
    data[i] = v;
  }
  return m;
}

void write_embeddings(const Embeddings& embeddings, const fs::path& path, EmbeddingFormat format) {
  if (embeddings.matrix.rows() != embeddings.vocab.size()) {
    throw ValidationError("matrix row count does not match vocabulary size");
  }
  if (format == EmbeddingFormat::Text) {
    atomic_write(path, [&](std::ostream& out) { write_embeddings_text(embeddings, out); });
  } else {
    atomic_write(path, [&](std::ostream& out) { write_embeddings_binary(embeddings.matrix, out); }, true);
  }
}

Embeddings read_embeddings(const fs::path& path, EmbeddingFormat format, const fs::path& vocab_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("input not found: " + path.string());
  if (format == EmbeddingFormat::Text) return read_embeddings_text(in);
  if (vocab_path.empty()) throw ValidationError("binary embeddings need a vocabulary file");
  Embeddings e{read_vocab(vocab_path), read_embeddings_binary(in)};
  if (e.vocab.size() != e.matrix.rows()) {
    throw FormatError("vocabulary has " + std::to_string(e.vocab.size()) + " tokens but " + path.string() +
                      " has " + std::to_string(e.matrix.rows()) + " rows");
  }
  return e;
}

}  // namespace subxfer
