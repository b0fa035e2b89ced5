#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "subxfer/corpus_io.hpp"
#include "subxfer/tokenizer.hpp"
#include "subxfer/word_aligner.hpp"

namespace subxfer {

struct PathsConfig {
  std::filesystem::path source;  // child-language side
  std::filesystem::path target;  // shared (English) side
  std::filesystem::path parent_embeddings;
  EmbeddingFormat parent_embeddings_format = EmbeddingFormat::Text;
  /// Required for binary parent embeddings; otherwise the text file's tokens.
  std::filesystem::path parent_vocab;
  std::filesystem::path output_dir = "subxfer-out";
};

struct TokenizerConfig {
  std::string kind = "unigram";
  std::size_t vocab_size = 50000;
  /// Defaults to the source side of the corpus.
  std::filesystem::path training_text;
  std::size_t seed_size = 1'000'000;
  std::size_t em_rounds = 2;
  double shrink_factor = 0.75;
  std::uint64_t min_pair_frequency = 2;
  EStep estep = EStep::Lattice;
};

/// How target-side sentences are split into parent sub-words. "vocab" uses
/// the fewest-tokens segmentation over the parent vocabulary.
struct ParentTokenizerConfig {
  std::string kind = "vocab";
  std::filesystem::path path;        // unigram TSV or BPE merges
  std::filesystem::path vocab_path;  // BPE vocabulary
};

struct AlignerConfig {
  std::size_t model1_iterations = 5;
  std::size_t hmm_iterations = 5;
  int max_jump = 5;
  double null_prior = 0.2;
  /// forward: source words given target words (n-to-1 onto the target);
  /// reverse: the opposite; both: symmetrized.
  std::string direction = "forward";
  Symmetrization symmetrization = Symmetrization::GrowDiagFinalAnd;
};

struct TransferConfig {
  std::string strategy = "mean";
  std::string k = "all";
  std::size_t rank = 1;
  std::uint64_t seed = 1;
  /// "fit" estimates per-dimension parameters from the parent matrix.
  std::string gaussian = "fit";
  double gaussian_mean = 0.0;
  double gaussian_stddev = 0.02;
  EmbeddingFormat format = EmbeddingFormat::Text;
  /// When set, the parent dimension must match.
  std::optional<std::size_t> dim;
};

struct RunConfig {
  PathsConfig paths;
  NormalizeOptions normalization;
  TokenizerConfig tokenizer;
  ParentTokenizerConfig parent_tokenizer;
  AlignerConfig aligner;
  std::uint64_t min_count = 1;
  TransferConfig transfer;
  std::size_t threads = 1;

  /// Unknown keys are rejected. Relative paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& json, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// File names inside the output directory.
namespace artifacts {
inline constexpr const char* kUnigram = "tokenizer.unigram.tsv";
inline constexpr const char* kBpeMerges = "tokenizer.bpe.merges";
inline constexpr const char* kBpeVocab = "tokenizer.bpe.vocab";
inline constexpr const char* kChildVocab = "child.vocab";
inline constexpr const char* kAlignments = "alignments.pharaoh";
inline constexpr const char* kTranslationTable = "ttable.tsv";
inline constexpr const char* kAlignmentTable = "alignment_table.tsv";
inline constexpr const char* kEmbeddingsText = "child_embeddings.txt";
inline constexpr const char* kEmbeddingsBinary = "child_embeddings.bin";
inline constexpr const char* kReport = "transfer_report.tsv";
}  // namespace artifacts

/// Structured stderr log. Info lines only appear when verbose.
class Logger {
 public:
  Logger(std::ostream& out, bool verbose) : out_(&out), verbose_(verbose) {}
  void info(std::string_view message, const nlohmann::json& fields = nlohmann::json::object()) const;
  void warn(std::string_view message, const nlohmann::json& fields = nlohmann::json::object()) const;

 private:
  void emit(std::string_view level, std::string_view message, const nlohmann::json& fields) const;
  std::ostream* out_;
  bool verbose_;
};

/// Loads the child tokenizer written by cmd_train_tokenizer.
TokenizerModel load_child_tokenizer(const RunConfig& config);
TokenizerModel load_parent_tokenizer(const RunConfig& config, const Vocab& parent_vocab);
Vocab load_parent_vocab(const RunConfig& config);

/// Each command validates its inputs before writing anything and returns the
/// stats object printed on stdout.
nlohmann::json cmd_train_tokenizer(const RunConfig& config, const Logger& log);
nlohmann::json cmd_encode(const RunConfig& config, const std::filesystem::path& input,
                          const std::filesystem::path& output, std::ostream& out, const Logger& log);
/// Empty `import_path` trains the aligner; otherwise the file is validated
/// against the corpus and copied in canonical form.
nlohmann::json cmd_align(const RunConfig& config, const std::filesystem::path& import_path, const Logger& log);
nlohmann::json cmd_project(const RunConfig& config, const Logger& log);
nlohmann::json cmd_transfer(const RunConfig& config, const Logger& log);
nlohmann::json cmd_report(const RunConfig& config, const Logger& log);

namespace cli {

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns the process exit code: 0 ok, 2 usage or validation, 3 runtime.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cli

}  // namespace subxfer
