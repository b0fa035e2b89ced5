#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace subxfer {

/// Synthetic check of how well a transfer strategy recovers a known parent
/// row. Every child token has one true parent row ranked first with the
/// highest count, followed by distractors correlated with it at `correlation`.
struct RecoveryOptions {
  std::size_t tokens = 256;
  std::size_t distractors = 6;
  std::size_t dim = 64;
  double correlation = 0.3;
  std::size_t max_rank = 5;
  std::uint64_t seed = 20240501;
};

struct RecoveryResult {
  /// Mean cosine to the true row; index i - 1 holds rank/top-i i.
  std::vector<double> single;
  std::vector<double> mean_top;
  double mean_all = 0.0;
};

RecoveryResult run_recovery_experiment(const RecoveryOptions& options = {});

double cosine(std::span<const float> a, std::span<const float> b);

}  // namespace subxfer
