#include "subxfer/recovery.hpp"

#include <cmath>
#include <string>

#include "subxfer/error.hpp"
#include "subxfer/transfer.hpp"

namespace subxfer {

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

RecoveryResult run_recovery_experiment(const RecoveryOptions& o) {
  if (o.tokens == 0 || o.dim == 0) throw ValidationError("recovery experiment needs tokens and dim >= 1");
  if (o.max_rank < 1 || o.max_rank > o.distractors + 1) {
    throw ValidationError("max_rank must lie in [1, distractors + 1]");
  }
  const std::size_t group = o.distractors + 1;

  // Parent rows: truth for token t at t * group, its distractors after it.
  const auto noise = init_random(o.tokens * group, fixed_gaussian(o.dim, 0.0, 1.0), o.seed);
  const double keep = std::sqrt(1.0 - o.correlation * o.correlation);
  std::vector<std::string> parent_tokens, child_tokens;
  EmbeddingMatrix parent(o.tokens * group, o.dim);
  SubwordAlignmentTable::CountMap counts;
  for (std::size_t t = 0; t < o.tokens; ++t) {
    const auto child = "x" + std::to_string(t);
    child_tokens.push_back(child);
    const auto truth = noise.row(t * group);
    for (std::size_t j = 0; j < group; ++j) {
      const std::size_t r = t * group + j;
      auto row = parent.row(r);
      const auto n = noise.row(r);
      for (std::size_t c = 0; c < o.dim; ++c) {
        row[c] = j == 0 ? truth[c] : static_cast<float>(o.correlation * truth[c] + keep * n[c]);
      }
      // The truth has the highest count; distractor counts decrease with j.
      parent_tokens.push_back("p" + std::to_string(t) + "_" + std::to_string(j));
      counts[{child, parent_tokens.back()}] = 2 * group - j;
    }
  }
  const Embeddings parent_emb{Vocab(parent_tokens), std::move(parent)};
  const SubwordAlignmentTable table(counts);
  const Vocab child_vocab(child_tokens);
  const auto base = init_random(o.tokens, fixed_gaussian(o.dim, 0.0, 1.0), o.seed + 1);

  auto score = [&](const TransferState& s) {
    double sum = 0.0;
    for (std::size_t t = 0; t < o.tokens; ++t) sum += cosine(s.matrix.row(t), parent_emb.matrix.row(t * group));
    return sum / static_cast<double>(o.tokens);
  };

  RecoveryResult result;
  for (std::size_t i = 1; i <= o.max_rank; ++i) {
    auto single = make_random_state(child_vocab, base);
    transfer_single_rank(single, table, parent_emb, i);
    result.single.push_back(score(single));
    auto mean = make_random_state(child_vocab, base);
    transfer_mean(mean, table, parent_emb, i);
    result.mean_top.push_back(score(mean));
  }
  auto all = make_random_state(child_vocab, base);
  transfer_mean(all, table, parent_emb);
  result.mean_all = score(all);
  return result;
}

}  // namespace subxfer
