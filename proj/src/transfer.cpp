#include "subxfer/transfer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"

namespace subxfer {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Identical: return "identical";
    case Provenance::AlignedTop1: return "aligned-top1";
    case Provenance::AlignedMean: return "aligned-mean";
    case Provenance::AlignedSingleRank: return "aligned-single-rank";
    case Provenance::Random: return "random";
  }
  return "random";
}

Provenance parse_provenance(std::string_view name) {
  for (auto p : {Provenance::Identical, Provenance::AlignedTop1, Provenance::AlignedMean,
                 Provenance::AlignedSingleRank, Provenance::Random}) {
    if (to_string(p) == name) return p;
  }
  throw ValidationError("unknown provenance '" + std::string(name) + "'");
}

TransferReport::Counts TransferReport::counts() const {
  Counts c;
  for (const auto& e : entries) {
    switch (e.provenance) {
      case Provenance::Identical: ++c.identical; break;
      case Provenance::Random: ++c.random; break;
      default: ++c.aligned; break;
    }
  }
  return c;
}

void write_transfer_report(const Vocab& child_vocab, const TransferReport& report, const std::filesystem::path& path) {
  if (report.entries.size() != child_vocab.size()) throw Error("report does not cover the child vocabulary");
  atomic_write(path, [&](std::ostream& out) {
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
      const auto& e = report.entries[i];
      out << child_vocab.token(static_cast<TokenId>(i)) << '\t' << to_string(e.provenance) << '\t'
          << e.contributors.size() << '\t';
      for (std::size_t k = 0; k < e.contributors.size(); ++k) out << (k ? " " : "") << e.contributors[k];
      out << '\n';
    }
  });
}

TransferReport read_transfer_report(const std::filesystem::path& path, Vocab* vocab_out) {
  const auto lines = read_lines(path);
  TransferReport report;
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    for (;;) {
      const auto tab = lines[i].find('\t', pos);
      fields.push_back(lines[i].substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 4) throw FormatError(path.string() + ": expected 4 tab-separated fields", i + 1);
    ReportEntry e;
    e.provenance = parse_provenance(fields[1]);
    for (auto& w : split_words(fields[3])) e.contributors.push_back(std::move(w));
    if (std::to_string(e.contributors.size()) != fields[2]) {
      throw FormatError(path.string() + ": contributor count mismatch", i + 1);
    }
    tokens.push_back(fields[0]);
    report.entries.push_back(std::move(e));
  }
  if (vocab_out) *vocab_out = Vocab(std::move(tokens));
  return report;
}

// ---------------------------------------------------------------------------

std::vector<std::string> compute_overlap(const Vocab& child, const Vocab& parent) {
  std::vector<std::string> out;
  for (const auto& t : child.tokens()) {
    if (parent.contains(t)) out.push_back(t);
  }
  return out;
}

GaussianParams fixed_gaussian(std::size_t dim, double mean, double stddev) {
  return {std::vector<double>(dim, mean), std::vector<double>(dim, stddev)};
}

GaussianParams fit_gaussian(const EmbeddingMatrix& parent) {
  const std::size_t d = parent.dim();
  GaussianParams g{std::vector<double>(d, 0.0), std::vector<double>(d, 1e-6)};
  if (parent.rows() == 0) throw ValidationError("cannot fit Gaussian parameters to an empty parent matrix");
  const auto n = static_cast<double>(parent.rows());
  for (std::size_t r = 0; r < parent.rows(); ++r) {
    const auto row = parent.row(r);
    for (std::size_t c = 0; c < d; ++c) g.mean[c] += row[c];
  }
  for (auto& m : g.mean) m /= n;
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < parent.rows(); ++r) {
    const auto row = parent.row(r);
    for (std::size_t c = 0; c < d; ++c) var[c] += (row[c] - g.mean[c]) * (row[c] - g.mean[c]);
  }
  for (std::size_t c = 0; c < d; ++c) g.stddev[c] = std::max(std::sqrt(var[c] / n), 1e-6);
  return g;
}

EmbeddingMatrix init_random(std::size_t rows, const GaussianParams& params, std::uint64_t seed) {
  const std::size_t d = params.mean.size();
  if (params.stddev.size() != d) throw ValidationError("Gaussian mean and stddev differ in dimension");
  for (double s : params.stddev) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("Gaussian stddev must be positive");
  }
  std::mt19937_64 engine(seed);
  auto uniform = [&] { return static_cast<double>(engine() >> 11) * 0x1.0p-53; };
  bool have_spare = false;
  double spare = 0.0;
  auto normal = [&] {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  };
  EmbeddingMatrix m(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < d; ++c) row[c] = static_cast<float>(params.mean[c] + params.stddev[c] * normal());
  }
  return m;
}

TransferState make_random_state(Vocab child_vocab, EmbeddingMatrix base) {
  if (base.rows() != child_vocab.size()) throw ValidationError("base matrix rows do not match the child vocabulary");
  TransferState s{std::move(child_vocab), std::move(base), {}};
  s.report.entries.resize(s.vocab.size());
  return s;
}

namespace {

void check_dims(const TransferState& state, const Embeddings& parent) {
  if (state.matrix.dim() != parent.matrix.dim()) {
    throw ValidationError("dimension mismatch: parent " + std::to_string(parent.matrix.dim()) + ", child " +
                          std::to_string(state.matrix.dim()));
  }
  if (parent.matrix.rows() != parent.vocab.size()) throw ValidationError("parent matrix rows do not match its vocabulary");
}

void copy_row(std::span<const float> from, std::span<float> to) { std::copy(from.begin(), from.end(), to.begin()); }

/// Applies `assign` to every table key not already copied verbatim.
template <typename Assign>
void for_each_aligned(TransferState& state, const SubwordAlignmentTable& table, const Embeddings& parent,
                      Assign&& assign) {
  check_dims(state, parent);
  for (const auto& [child, candidates] : table.entries()) {
    const auto id = state.vocab.find(child);
    if (!id) throw ValidationError("aligned sub-word '" + child + "' is not in the child vocabulary");
    if (candidates.empty()) throw ValidationError("aligned sub-word '" + child + "' has no candidates");
    std::vector<TokenId> rows;
    rows.reserve(candidates.size());
    for (const auto& c : candidates) {
      const auto pid = parent.vocab.find(c.token);
      if (!pid) throw ValidationError("aligned parent sub-word '" + c.token + "' is not in the parent vocabulary");
      rows.push_back(*pid);
    }
    auto& entry = state.report.entries[*id];
    if (entry.provenance == Provenance::Identical) continue;
    assign(*id, candidates, rows, entry);
  }
}

}  // namespace

void transfer_identical(TransferState& state, const Embeddings& parent) {
  check_dims(state, parent);
  for (std::size_t i = 0; i < state.vocab.size(); ++i) {
    const auto& token = state.vocab.token(static_cast<TokenId>(i));
    const auto pid = parent.vocab.find(token);
    if (!pid) continue;
    copy_row(parent.matrix.row(*pid), state.matrix.row(i));
    state.report.entries[i] = {Provenance::Identical, {token}};
  }
}

void transfer_top1(TransferState& state, const SubwordAlignmentTable& table, const Embeddings& parent) {
  for_each_aligned(state, table, parent, [&](TokenId id, const auto& candidates, const auto& rows, ReportEntry& e) {
    copy_row(parent.matrix.row(rows.front()), state.matrix.row(id));
    e = {Provenance::AlignedTop1, {candidates.front().token}};
  });
}

void transfer_mean(TransferState& state, const SubwordAlignmentTable& table, const Embeddings& parent,
                   std::optional<std::size_t> k) {
  if (k && *k == 0) throw ValidationError("mean over top-k needs k >= 1");
  const std::size_t d = state.matrix.dim();
  std::vector<double> acc(d);
  for_each_aligned(state, table, parent, [&](TokenId id, const auto& candidates, const auto& rows, ReportEntry& e) {
    const std::size_t n = k ? std::min(*k, candidates.size()) : candidates.size();
    // Sum in token byte order so the result does not depend on rank order.
    std::vector<std::size_t> members(n);
    for (std::size_t m = 0; m < n; ++m) members[m] = m;
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return candidates[a].token < candidates[b].token; });
    std::fill(acc.begin(), acc.end(), 0.0);
    for (auto m : members) {
      const auto row = parent.matrix.row(rows[m]);
      for (std::size_t c = 0; c < d; ++c) acc[c] += row[c];
    }
    auto out = state.matrix.row(id);
    for (std::size_t c = 0; c < d; ++c) out[c] = static_cast<float>(acc[c] / static_cast<double>(n));
    e.provenance = Provenance::AlignedMean;
    e.contributors.clear();
    for (std::size_t m = 0; m < n; ++m) e.contributors.push_back(candidates[m].token);
  });
}

void transfer_single_rank(TransferState& state, const SubwordAlignmentTable& table, const Embeddings& parent,
                          std::size_t rank) {
  if (rank < 1) throw ValidationError("single-rank transfer needs rank >= 1");
  for_each_aligned(state, table, parent, [&](TokenId id, const auto& candidates, const auto& rows, ReportEntry& e) {
    if (candidates.size() < rank) {
      ++state.report.single_rank_fallbacks;
      return;
    }
    copy_row(parent.matrix.row(rows[rank - 1]), state.matrix.row(id));
    e = {Provenance::AlignedSingleRank, {candidates[rank - 1].token}};
  });
}

// ---------------------------------------------------------------------------

Strategy Strategy::parse(std::string_view name, std::string_view k, std::size_t rank) {
  Strategy s;
  if (name == "baseline") {
    s.kind = Kind::Baseline;
  } else if (name == "mi") {
    s.kind = Kind::Identical;
  } else if (name == "top1") {
    s.kind = Kind::Top1;
  } else if (name == "mean") {
    s.kind = Kind::Mean;
  } else if (name == "single") {
    s.kind = Kind::Single;
  } else {
    throw ValidationError("unknown strategy '" + std::string(name) + "' (expected baseline, mi, top1, mean, single)");
  }
  if (k != "all") {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), value);
    if (ec != std::errc() || ptr != k.data() + k.size() || value == 0) {
      throw ValidationError("k must be 'all' or a positive integer, got '" + std::string(k) + "'");
    }
    s.k = value;
  }
  if (rank < 1) throw ValidationError("rank must be >= 1");
  s.rank = rank;
  return s;
}

std::string Strategy::name() const {
  switch (kind) {
    case Kind::Baseline: return "baseline";
    case Kind::Identical: return "mi";
    case Kind::Top1: return "top1";
    case Kind::Mean: return "mean";
    case Kind::Single: return "single";
  }
  return "mean";
}

TransferState build_child_embeddings(const Strategy& strategy, const TransferInputs& in) {
  if (!in.child_vocab || !in.parent) throw ValidationError("transfer needs a child vocabulary and parent embeddings");
  if (strategy.needs_table() && !in.table) {
    throw ValidationError("strategy '" + strategy.name() + "' needs an alignment table");
  }
  const auto gaussian = in.gaussian ? *in.gaussian : fit_gaussian(in.parent->matrix);
  if (gaussian.mean.size() != in.parent->matrix.dim()) {
    throw ValidationError("Gaussian parameters have dimension " + std::to_string(gaussian.mean.size()) +
                          " but the parent matrix has " + std::to_string(in.parent->matrix.dim()));
  }
  auto state = make_random_state(*in.child_vocab, init_random(in.child_vocab->size(), gaussian, in.seed));
  if (strategy.kind == Strategy::Kind::Baseline) return state;
  transfer_identical(state, *in.parent);
  switch (strategy.kind) {
    case Strategy::Kind::Top1: transfer_top1(state, *in.table, *in.parent); break;
    case Strategy::Kind::Mean: transfer_mean(state, *in.table, *in.parent, strategy.k); break;
    case Strategy::Kind::Single: transfer_single_rank(state, *in.table, *in.parent, strategy.rank); break;
    default: break;
  }
  return state;
}

}  // namespace subxfer
