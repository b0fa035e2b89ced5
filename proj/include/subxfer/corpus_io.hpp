#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "subxfer/alignment_table.hpp"
#include "subxfer/embedding.hpp"
#include "subxfer/unicode.hpp"
#include "subxfer/vocab.hpp"

namespace subxfer {

// ---------------------------------------------------------------------------
// Files

/// Lines of a text file without their terminators. A trailing "\r" is
/// stripped; a final newline does not produce an extra empty line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory and renames it over
/// `path` only after `writer` returns. On exception the temporary is removed
/// and `path` is left untouched.
void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                  bool binary = false);

// ---------------------------------------------------------------------------
// Parallel corpora

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
  /// 0-based line number in the input files.
  std::size_t index = 0;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  /// Lines in each input file, including skipped ones.
  std::size_t line_count = 0;
  /// Lines dropped because a side was empty after normalization.
  std::size_t skipped = 0;
};

ParallelCorpus load_parallel_corpus(const std::filesystem::path& source, const std::filesystem::path& target,
                                    const NormalizeOptions& options = {});

/// Same as load_parallel_corpus, over in-memory lines.
ParallelCorpus make_parallel_corpus(const std::vector<std::string>& source_lines,
                                    const std::vector<std::string>& target_lines,
                                    const NormalizeOptions& options = {});

// ---------------------------------------------------------------------------
// Word alignments (Pharaoh "i-j" format)

struct Link {
  std::uint32_t source = 0;
  std::uint32_t target = 0;

  friend auto operator<=>(const Link&, const Link&) = default;
};

/// Links of one sentence pair, kept sorted by (source, target) and unique.
using AlignmentLinks = std::vector<Link>;

void canonicalize(AlignmentLinks& links);

std::string format_pharaoh_line(const AlignmentLinks& links);
/// `line_number` is 1-based and only used in error messages.
AlignmentLinks parse_pharaoh_line(std::string_view line, std::size_t line_number = 0);

void write_pharaoh(const std::vector<AlignmentLinks>& alignments, const std::filesystem::path& path);
std::vector<AlignmentLinks> read_pharaoh(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Embeddings

enum class EmbeddingFormat { Text, Binary };

EmbeddingFormat parse_embedding_format(std::string_view name);

/// Text: "|V| d" header, then "token v1 .. vd" with 6 decimals per row.
void write_embeddings_text(const Embeddings& embeddings, std::ostream& out);
Embeddings read_embeddings_text(std::istream& in);

/// Binary: the same "|V| d\n" header, then |V|*d little-endian float32 values
/// in row-major order. Tokens live in a separate vocabulary file.
void write_embeddings_binary(const EmbeddingMatrix& matrix, std::ostream& out);
EmbeddingMatrix read_embeddings_binary(std::istream& in);

void write_embeddings(const Embeddings& embeddings, const std::filesystem::path& path, EmbeddingFormat format);
/// For the binary format `vocab_path` is required and its size must match the
/// header; for text it is ignored.
Embeddings read_embeddings(const std::filesystem::path& path, EmbeddingFormat format,
                           const std::filesystem::path& vocab_path = {});

// ---------------------------------------------------------------------------
// Sub-word alignment table (TSV: child \t parent \t count)

void write_alignment_table(const SubwordAlignmentTable& table, std::ostream& out);
SubwordAlignmentTable read_alignment_table(std::istream& in);

void write_alignment_table(const SubwordAlignmentTable& table, const std::filesystem::path& path);
SubwordAlignmentTable read_alignment_table(const std::filesystem::path& path);

}  // namespace subxfer
