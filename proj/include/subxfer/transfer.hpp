#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subxfer/alignment_table.hpp"
#include "subxfer/embedding.hpp"
#include "subxfer/vocab.hpp"

namespace subxfer {

enum class Provenance { Identical, AlignedTop1, AlignedMean, AlignedSingleRank, Random };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

struct ReportEntry {
  Provenance provenance = Provenance::Random;
  /// Parent tokens whose rows produced this child row; n = size().
  std::vector<std::string> contributors;
};

/// Per-token provenance of a child embedding matrix, indexed by child id.
struct TransferReport {
  std::vector<ReportEntry> entries;
  /// Single-rank requests that fell back to random because |v_x| < rank.
  std::size_t single_rank_fallbacks = 0;

  struct Counts {
    std::size_t identical = 0;
    std::size_t aligned = 0;
    std::size_t random = 0;
  };
  Counts counts() const;
};

/// TSV: token \t provenance \t n \t space-separated contributors.
void write_transfer_report(const Vocab& child_vocab, const TransferReport& report, const std::filesystem::path& path);
TransferReport read_transfer_report(const std::filesystem::path& path, Vocab* vocab_out = nullptr);

/// Child matrix under construction with its provenance record.
struct TransferState {
  Vocab vocab;
  EmbeddingMatrix matrix;
  TransferReport report;
};

// ---------------------------------------------------------------------------

/// V_o: child tokens also present in the parent vocabulary, in child id order.
std::vector<std::string> compute_overlap(const Vocab& child, const Vocab& parent);

struct GaussianParams {
  std::vector<double> mean;
  std::vector<double> stddev;
};

GaussianParams fixed_gaussian(std::size_t dim, double mean, double stddev);
/// Per-dimension mean and population standard deviation of `parent`.
/// Degenerate columns get a standard deviation of 1e-6.
GaussianParams fit_gaussian(const EmbeddingMatrix& parent);

/// Gaussian draws generated row-major from mt19937_64(seed) through
/// Box-Muller on 53-bit uniforms, so a seed fixes every bit of the output.
/// Throws ValidationError on non-positive standard deviations.
EmbeddingMatrix init_random(std::size_t rows, const GaussianParams& params, std::uint64_t seed);

/// Every row marked random.
TransferState make_random_state(Vocab child_vocab, EmbeddingMatrix base);

/// Copies parent rows for every x in V_o.
void transfer_identical(TransferState& state, const Embeddings& parent);

/// Aligned strategies below skip tokens already copied by transfer_identical.
void transfer_top1(TransferState& state, const SubwordAlignmentTable& table, const Embeddings& parent);
/// Element-wise mean over the top-k ranked candidates (all when k is empty).
void transfer_mean(TransferState& state, const SubwordAlignmentTable& table, const Embeddings& parent,
                   std::optional<std::size_t> k = std::nullopt);
/// Uses only the rank-th candidate (1-based); shorter lists stay random.
void transfer_single_rank(TransferState& state, const SubwordAlignmentTable& table, const Embeddings& parent,
                          std::size_t rank);

struct Strategy {
  enum class Kind { Baseline, Identical, Top1, Mean, Single };

  Kind kind = Kind::Mean;
  /// Mean: number of top candidates to average; empty means all.
  std::optional<std::size_t> k;
  /// Single: 1-based rank.
  std::size_t rank = 1;

  /// Names: baseline, mi, top1, mean, single. `k` is "all" or a positive
  /// integer.
  static Strategy parse(std::string_view name, std::string_view k = "all", std::size_t rank = 1);
  std::string name() const;
  bool needs_table() const { return kind == Kind::Top1 || kind == Kind::Mean || kind == Kind::Single; }
};

struct TransferInputs {
  const Vocab* child_vocab = nullptr;
  const Embeddings* parent = nullptr;
  /// Required for the aligned strategies.
  const SubwordAlignmentTable* table = nullptr;
  /// Empty means fit to the parent matrix.
  std::optional<GaussianParams> gaussian;
  std::uint64_t seed = 1;
};

/// init_random, then identical copy (unless baseline), then the aligned
/// strategy (unless baseline or mi).
TransferState build_child_embeddings(const Strategy& strategy, const TransferInputs& inputs);

}  // namespace subxfer
