#include "subxfer/corpus_io.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>

#include "subxfer/error.hpp"

namespace fs = std::filesystem;

namespace subxfer {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("input not found: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& writer, bool binary) {
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  try {
    {
      std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
      if (!out) throw Error("cannot open for writing: " + tmp.string());
      out.imbue(std::locale::classic());
      writer(out);
      out.flush();
      if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

ParallelCorpus make_parallel_corpus(const std::vector<std::string>& source_lines,
                                    const std::vector<std::string>& target_lines, const NormalizeOptions& options) {
  if (source_lines.size() != target_lines.size()) {
    throw ValidationError("line count mismatch " + std::to_string(source_lines.size()) + "≠" +
                          std::to_string(target_lines.size()));
  }
  ParallelCorpus corpus;
  corpus.line_count = source_lines.size();
  for (std::size_t i = 0; i < source_lines.size(); ++i) {
    SentencePair pair{split_words(unicode_normalize(source_lines[i], options)),
                      split_words(unicode_normalize(target_lines[i], options)), i};
    if (pair.source.empty() || pair.target.empty()) {
      ++corpus.skipped;
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

ParallelCorpus load_parallel_corpus(const fs::path& source, const fs::path& target, const NormalizeOptions& options) {
  return make_parallel_corpus(read_lines(source), read_lines(target), options);
}

// ---------------------------------------------------------------------------

void canonicalize(AlignmentLinks& links) {
  std::sort(links.begin(), links.end());
  links.erase(std::unique(links.begin(), links.end()), links.end());
}

std::string format_pharaoh_line(const AlignmentLinks& links) {
  AlignmentLinks sorted = links;
  canonicalize(sorted);
  std::string out;
  for (const auto& link : sorted) {
    if (!out.empty()) out.push_back(' ');
    out += std::to_string(link.source);
    out.push_back('-');
    out += std::to_string(link.target);
  }
  return out;
}

namespace {

bool parse_index(std::string_view text, std::uint32_t& value) {
  if (text.empty()) return false;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

AlignmentLinks parse_pharaoh_line(std::string_view line, std::size_t line_number) {
  AlignmentLinks links;
  std::size_t pos = 0;
  while (pos < line.size()) {
    if (is_ascii_space(line[pos])) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < line.size() && !is_ascii_space(line[end])) ++end;
    const std::string_view token = line.substr(pos, end - pos);
    const auto dash = token.find('-');
    Link link;
    if (dash == std::string_view::npos || !parse_index(token.substr(0, dash), link.source) ||
        !parse_index(token.substr(dash + 1), link.target)) {
      throw FormatError("malformed alignment link '" + std::string(token) + "'", line_number);
    }
    links.push_back(link);
    pos = end;
  }
  canonicalize(links);
  return links;
}

void write_pharaoh(const std::vector<AlignmentLinks>& alignments, const fs::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& links : alignments) out << format_pharaoh_line(links) << '\n';
  });
}

std::vector<AlignmentLinks> read_pharaoh(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<AlignmentLinks> alignments;
  alignments.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) alignments.push_back(parse_pharaoh_line(lines[i], i + 1));
  return alignments;
}

// ---------------------------------------------------------------------------

void write_alignment_table(const SubwordAlignmentTable& table, std::ostream& out) {
  for (const auto& [child, candidates] : table.entries()) {
    for (const auto& c : candidates) out << child << '\t' << c.token << '\t' << c.count << '\n';
  }
}

SubwordAlignmentTable read_alignment_table(std::istream& in) {
  SubwordAlignmentTable::CountMap counts;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos) {
      throw FormatError("expected 3 tab-separated fields", line_number);
    }
    std::string child = line.substr(0, tab1);
    std::string parent = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string_view count_text = std::string_view(line).substr(tab2 + 1);
    if (child.empty() || parent.empty()) throw FormatError("empty token", line_number);
    std::uint64_t count = 0;
    bool digits = !count_text.empty() &&
                  std::all_of(count_text.begin(), count_text.end(), [](char c) { return c >= '0' && c <= '9'; });
    auto [ptr, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
    if (!digits || ec != std::errc() || ptr != count_text.data() + count_text.size()) {
      throw FormatError("non-integer count '" + std::string(count_text) + "'", line_number);
    }
    if (count == 0) throw FormatError("count must be positive", line_number);
    if (!counts.emplace(std::make_pair(child, parent), count).second) {
      throw FormatError("duplicate row '" + child + "' -> '" + parent + "'", line_number);
    }
  }
  return SubwordAlignmentTable(counts);
}

void write_alignment_table(const SubwordAlignmentTable& table, const fs::path& path) {
  atomic_write(path, [&](std::ostream& out) { write_alignment_table(table, out); });
}

SubwordAlignmentTable read_alignment_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("input not found: " + path.string());
  return read_alignment_table(in);
}

}  // namespace subxfer
