#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "subxfer/error.hpp"
#include "subxfer/parallel.hpp"
#include "subxfer/word_aligner.hpp"

namespace subxfer {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr TokenId kUnknownId = static_cast<TokenId>(-1);

/// Transition probabilities T(k -> i) for k = 0..l (last real position,
/// 0 = start) and i = 1..l, NULL mass excluded.
class Transitions {
 public:
  Transitions(const JumpDistribution& jumps, std::size_t l) : l_(l), m_((l + 1) * l) {
    const double real_mass = 1.0 - jumps.null_mass;
    for (std::size_t k = 0; k <= l; ++k) {
      double z = 0.0;
      for (std::size_t i = 1; i <= l; ++i) z += jumps.weights[jumps.bucket(static_cast<long>(i) - static_cast<long>(k))];
      for (std::size_t i = 1; i <= l; ++i) {
        const double w = jumps.weights[jumps.bucket(static_cast<long>(i) - static_cast<long>(k))];
        m_[k * l + i - 1] = z > 0.0 ? real_mass * w / z : 0.0;
      }
    }
  }

  double operator()(std::size_t k, std::size_t i) const { return m_[k * l_ + i - 1]; }

 private:
  std::size_t l_;
  std::vector<double> m_;
};

/// Emission probabilities em[j][i], i = 0 for NULL, and the matching table
/// slots.
struct Emissions {
  std::size_t width;
  std::vector<double> prob;
  std::vector<std::size_t> slot;

  double operator()(std::size_t j, std::size_t i) const { return prob[j * width + i]; }
};

Emissions emissions(const TranslationTable& table, std::span<const TokenId> source, std::span<const TokenId> target,
                    bool floor) {
  Emissions em{target.size() + 1, std::vector<double>(source.size() * (target.size() + 1)),
               std::vector<std::size_t>(source.size() * (target.size() + 1))};
  for (std::size_t j = 0; j < source.size(); ++j) {
    for (std::size_t i = 0; i <= target.size(); ++i) {
      const TokenId e = i == 0 ? kNullWord : target[i - 1];
      const std::size_t s = table.slot(e, source[j]);
      const double p = s == TranslationTable::npos ? 0.0 : table.values()[s];
      em.slot[j * em.width + i] = s;
      em.prob[j * em.width + i] = floor ? std::max(p, kProbFloor) : p;
    }
  }
  return em;
}

struct SentenceStats {
  std::vector<std::pair<std::size_t, double>> lex;
  std::vector<double> jumps;
  std::vector<double> out_of;  // expected real transitions leaving each position 0..l
  std::size_t target_length = 0;
  double log_likelihood = 0.0;
};

/// Scaled forward pass. `alpha` receives the combined mass a_j(k) of real
/// state k and NULL_k after each step (row 0 is the start distribution).
struct Forward {
  std::vector<double> a;      // (J + 1) x (l + 1)
  std::vector<double> real;   // J x (l + 1), index 0 unused
  std::vector<double> null;   // J x (l + 1)
  std::vector<double> scale;  // J
};

Forward forward(const Emissions& em, const Transitions& T, double null_mass, std::size_t J, std::size_t l) {
  const std::size_t w = l + 1;
  Forward f{std::vector<double>((J + 1) * w, 0.0), std::vector<double>(J * w, 0.0), std::vector<double>(J * w, 0.0),
            std::vector<double>(J, 0.0)};
  f.a[0] = 1.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double* prev = &f.a[j * w];
    double* real = &f.real[j * w];
    double* null = &f.null[j * w];
    double c = 0.0;
    for (std::size_t i = 1; i <= l; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= l; ++k) s += prev[k] * T(k, i);
      real[i] = em(j, i) * s;
      c += real[i];
    }
    for (std::size_t k = 0; k <= l; ++k) {
      null[k] = em(j, 0) * null_mass * prev[k];
      c += null[k];
    }
    if (!(c > 0.0) || !std::isfinite(c)) throw Error("HMM forward pass: zero or non-finite scaling factor");
    double* cur = &f.a[(j + 1) * w];
    for (std::size_t k = 0; k <= l; ++k) {
      real[k] /= c;
      null[k] /= c;
      cur[k] = null[k] + (k > 0 ? real[k] : 0.0);
    }
    f.scale[j] = c;
  }
  return f;
}

SentenceStats hmm_sentence(const HmmModel& model, std::span<const TokenId> source, std::span<const TokenId> target) {
  const std::size_t J = source.size();
  const std::size_t l = target.size();
  const std::size_t w = l + 1;
  const double p = model.jumps.null_mass;
  const Transitions T(model.jumps, l);
  const Emissions em = emissions(model.translation, source, target, false);
  const Forward fw = forward(em, T, p, J, l);

  std::vector<double> beta(J * w, 0.0);
  std::fill(beta.begin() + static_cast<std::ptrdiff_t>((J - 1) * w), beta.end(), 1.0);
  for (std::size_t j = J - 1; j-- > 0;) {
    const double* next = &beta[(j + 1) * w];
    for (std::size_t k = 0; k <= l; ++k) {
      double s = p * em(j + 1, 0) * next[k];
      for (std::size_t i = 1; i <= l; ++i) s += T(k, i) * em(j + 1, i) * next[i];
      beta[j * w + k] = s / fw.scale[j + 1];
    }
  }

  SentenceStats st;
  st.target_length = l;
  st.jumps.assign(model.jumps.weights.size(), 0.0);
  st.out_of.assign(w, 0.0);
  st.lex.reserve(J * w);
  for (std::size_t j = 0; j < J; ++j) {
    st.log_likelihood += std::log(fw.scale[j]);
    const double* b = &beta[j * w];
    double null_post = 0.0;
    for (std::size_t k = 0; k <= l; ++k) null_post += fw.null[j * w + k] * b[k];
    if (null_post > 0.0) st.lex.emplace_back(em.slot[j * w], null_post);
    const double* prev = &fw.a[j * w];
    for (std::size_t i = 1; i <= l; ++i) {
      const double post = fw.real[j * w + i] * b[i];
      if (post > 0.0) st.lex.emplace_back(em.slot[j * w + i], post);
      const double tail = em(j, i) * b[i] / fw.scale[j];
      for (std::size_t k = 0; k <= l; ++k) {
        const double xi = prev[k] * T(k, i) * tail;
        st.jumps[model.jumps.bucket(static_cast<long>(i) - static_cast<long>(k))] += xi;
        st.out_of[k] += xi;
      }
    }
  }
  return st;
}

/// Expected complete-data log-likelihood of the jump parameters, up to terms
/// that do not depend on them.
class JumpObjective {
 public:
  JumpObjective(const JumpDistribution& shape, std::vector<double> counts,
                const std::map<std::pair<std::size_t, std::size_t>, double>& groups)
      : buckets_(shape.weights.size()), counts_(std::move(counts)) {
    for (const auto& [key, mass] : groups) {
      if (mass <= 0.0) continue;
      const auto [l, k] = key;
      std::vector<double> mult(buckets_, 0.0);
      for (std::size_t i = 1; i <= l; ++i) mult[shape.bucket(static_cast<long>(i) - static_cast<long>(k))] += 1.0;
      groups_.push_back({mass, std::move(mult)});
    }
  }

  std::size_t size() const { return buckets_; }

  /// Whether any sentence of the corpus can realize bucket b at all.
  bool observable(std::size_t b) const {
    for (const auto& g : groups_) {
      if (g.mult[b] > 0.0) return true;
    }
    return false;
  }

  double value(const std::vector<double>& theta) const {
    double q = 0.0;
    for (std::size_t b = 0; b < buckets_; ++b) {
      if (counts_[b] > 0.0) q += counts_[b] * theta[b];
    }
    for (const auto& g : groups_) q -= g.mass * log_partition(g, theta);
    return q;
  }

  void gradient_hessian(const std::vector<double>& theta, std::vector<double>& grad, std::vector<double>& neg_hess) const {
    grad = counts_;
    neg_hess.assign(buckets_ * buckets_, 0.0);
    std::vector<double> prob(buckets_);
    for (const auto& g : groups_) {
      const double lz = log_partition(g, theta);
      for (std::size_t b = 0; b < buckets_; ++b) prob[b] = g.mult[b] > 0.0 ? g.mult[b] * std::exp(theta[b] - lz) : 0.0;
      for (std::size_t a = 0; a < buckets_; ++a) {
        grad[a] -= g.mass * prob[a];
        if (prob[a] == 0.0) continue;
        neg_hess[a * buckets_ + a] += g.mass * prob[a];
        for (std::size_t b = 0; b < buckets_; ++b) neg_hess[a * buckets_ + b] -= g.mass * prob[a] * prob[b];
      }
    }
  }

 private:
  struct Group {
    double mass;
    std::vector<double> mult;
  };

  double log_partition(const Group& g, const std::vector<double>& theta) const {
    double mx = kNegInf;
    for (std::size_t b = 0; b < buckets_; ++b) {
      if (g.mult[b] > 0.0) mx = std::max(mx, theta[b]);
    }
    double s = 0.0;
    for (std::size_t b = 0; b < buckets_; ++b) {
      if (g.mult[b] > 0.0) s += g.mult[b] * std::exp(theta[b] - mx);
    }
    return mx + std::log(s);
  }

  std::size_t buckets_;
  std::vector<double> counts_;
  std::vector<Group> groups_;
};

/// Solves (A + lambda I) x = g for symmetric positive semidefinite A.
std::vector<double> regularized_solve(std::vector<double> a, std::vector<double> g, std::size_t n) {
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a[i * n + i];
  const double lambda = 1e-9 * trace / static_cast<double>(n) + 1e-12;
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += lambda;
  // Cholesky, in place (lower triangle).
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    d = std::sqrt(std::max(d, 1e-300));
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) g[i] -= a[i * n + k] * g[k];
    g[i] /= a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) g[i] -= a[k * n + i] * g[k];
    g[i] /= a[i * n + i];
  }
  return g;
}

/// Generalized M-step for the jump weights: starts from the better of the
/// current weights and the relative-frequency estimate, then takes damped
/// Newton steps that never decrease the objective.
std::vector<double> update_jump_weights(const JumpDistribution& current, const std::vector<double>& counts,
                                        const std::map<std::pair<std::size_t, std::size_t>, double>& groups) {
  const JumpObjective objective(current, counts, groups);
  const std::size_t n = objective.size();
  double total = 0.0;
  for (double c : counts) total += c;
  if (!(total > 0.0)) return current.weights;

  std::vector<double> theta(n), candidate(n);
  for (std::size_t b = 0; b < n; ++b) {
    theta[b] = std::log(std::max(current.weights[b], 1e-300));
    candidate[b] = std::log(std::max(counts[b], 1e-12 * total));
  }
  double q = objective.value(theta);
  if (const double qc = objective.value(candidate); qc > q) {
    theta = candidate;
    q = qc;
  }

  std::vector<double> grad, neg_hess;
  for (int iter = 0; iter < 100; ++iter) {
    objective.gradient_hessian(theta, grad, neg_hess);
    const auto step = regularized_solve(neg_hess, grad, n);
    bool improved = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      for (std::size_t b = 0; b < n; ++b) candidate[b] = theta[b] + t * step[b];
      const double qc = objective.value(candidate);
      if (qc > q) {
        const double gain = qc - q;
        theta = candidate;
        q = qc;
        improved = gain > 1e-14 * std::abs(q);
        break;
      }
    }
    if (!improved) break;
  }

  // Buckets no sentence can realize do not affect the likelihood; they get
  // zero weight so the normalization is fixed by the observable ones.
  double mx = kNegInf;
  for (std::size_t b = 0; b < n; ++b) {
    if (objective.observable(b)) mx = std::max(mx, theta[b]);
  }
  std::vector<double> weights(n, 0.0);
  double z = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    if (objective.observable(b)) z += weights[b] = std::exp(theta[b] - mx);
  }
  const double real_mass = 1.0 - current.null_mass;
  for (auto& wgt : weights) wgt = wgt / z * real_mass;
  return weights;
}

std::vector<TokenId> lookup(const Vocab& vocab, const std::vector<std::string>& words) {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.find(w).value_or(kUnknownId));
  return ids;
}

}  // namespace

JumpDistribution JumpDistribution::uniform(int max_jump, double null_mass) {
  if (max_jump < 1) throw ValidationError("max_jump must be at least 1");
  if (!(null_mass >= 0.0 && null_mass < 1.0)) throw ValidationError("NULL mass must lie in [0, 1)");
  const auto n = static_cast<std::size_t>(2 * max_jump + 1);
  return {max_jump, null_mass, std::vector<double>(n, (1.0 - null_mass) / static_cast<double>(n))};
}

std::size_t JumpDistribution::bucket(long jump) const {
  const long clamped = std::clamp<long>(jump, -max_jump, max_jump);
  return static_cast<std::size_t>(clamped + max_jump);
}

double JumpDistribution::total() const {
  double s = null_mass;
  for (double w : weights) s += w;
  return s;
}

double hmm_transition(const JumpDistribution& jumps, std::size_t target_length, std::size_t from, std::size_t to) {
  if (to < 1 || to > target_length || from > target_length) return 0.0;
  return Transitions(jumps, target_length)(from, to);
}

double hmm_sentence_log_likelihood(const HmmModel& model, std::span<const TokenId> source,
                                   std::span<const TokenId> target) {
  if (source.empty()) return 0.0;
  const Transitions T(model.jumps, target.size());
  const Emissions em = emissions(model.translation, source, target, false);
  const Forward fw = forward(em, T, model.jumps.null_mass, source.size(), target.size());
  double ll = 0.0;
  for (double c : fw.scale) ll += std::log(c);
  return ll;
}

double hmm_corpus_log_likelihood(const HmmModel& model, const AlignerCorpus& corpus, std::size_t threads) {
  double total = 0.0;
  ordered_parallel_reduce<double>(
      corpus.size(), threads,
      [&](std::size_t n) { return hmm_sentence_log_likelihood(model, corpus.source[n], corpus.target[n]); },
      [&](double ll) { total += ll; });
  return total;
}

HmmResult train_hmm(const AlignerCorpus& corpus, const TranslationTable& model1, const HmmOptions& options) {
  if (corpus.size() == 0) throw ValidationError("cannot train the HMM on an empty corpus");
  if (options.max_jump < 1) throw ValidationError("max_jump must be at least 1");
  if (model1.num_entries() != TranslationTable(corpus).num_entries()) {
    throw ValidationError("Model 1 table was not trained on this corpus");
  }
  HmmResult result{{model1, JumpDistribution::uniform(options.max_jump, options.null_prior)}, {}};
  auto& model = result.model;
  for (std::size_t it = 0; it < options.iterations; ++it) {
    std::vector<double> lex(model.translation.num_entries(), 0.0);
    std::vector<double> jumps(model.jumps.weights.size(), 0.0);
    std::map<std::pair<std::size_t, std::size_t>, double> groups;
    double ll = 0.0;
    ordered_parallel_reduce<SentenceStats>(
        corpus.size(), options.threads,
        [&](std::size_t n) { return hmm_sentence(model, corpus.source[n], corpus.target[n]); },
        [&](const SentenceStats& s) {
          for (const auto& [slot, v] : s.lex) lex[slot] += v;
          for (std::size_t b = 0; b < jumps.size(); ++b) jumps[b] += s.jumps[b];
          for (std::size_t k = 0; k < s.out_of.size(); ++k) groups[{s.target_length, k}] += s.out_of[k];
          ll += s.log_likelihood;
        });
    result.log_likelihood.push_back(ll);
    model.translation.set_normalized(lex);
    model.jumps.weights = update_jump_weights(model.jumps, jumps, groups);
  }
  result.log_likelihood.push_back(hmm_corpus_log_likelihood(model, corpus, options.threads));
  return result;
}

AlignmentLinks viterbi_align(const HmmModel& model, std::span<const TokenId> source, std::span<const TokenId> target) {
  AlignmentLinks links;
  const std::size_t J = source.size();
  const std::size_t l = target.size();
  if (J == 0 || l == 0) return links;
  const std::size_t w = l + 1;
  const Transitions T(model.jumps, l);
  const Emissions em = emissions(model.translation, source, target, true);
  const double log_null = std::log(std::max(model.jumps.null_mass, kProbFloor));
  auto log_t = [&](std::size_t k, std::size_t i) { return std::log(std::max(T(k, i), kProbFloor)); };

  // Scores for real states (index i = 1..l) and NULL states (index k = 0..l).
  // Back-pointers encode real i as i, NULL k as w + k.
  std::vector<double> real(w, kNegInf), null(w, kNegInf);
  std::vector<std::size_t> back(J * 2 * w, 0);
  for (std::size_t i = 1; i <= l; ++i) real[i] = log_t(0, i) + std::log(em(0, i));
  null[0] = log_null + std::log(em(0, 0));

  std::vector<double> from(w);
  std::vector<std::size_t> from_state(w);
  for (std::size_t j = 1; j < J; ++j) {
    for (std::size_t k = 0; k <= l; ++k) {
      // Prefer the real state on ties.
      if (k > 0 && real[k] >= null[k]) {
        from[k] = real[k];
        from_state[k] = k;
      } else {
        from[k] = null[k];
        from_state[k] = w + k;
      }
    }
    std::vector<double> next_real(w, kNegInf), next_null(w, kNegInf);
    std::size_t* bp = &back[j * 2 * w];
    for (std::size_t i = 1; i <= l; ++i) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t k = 0; k <= l; ++k) {
        const double s = from[k] + log_t(k, i);
        if (s > best) {
          best = s;
          arg = from_state[k];
        }
      }
      next_real[i] = best + std::log(em(j, i));
      bp[i] = arg;
    }
    for (std::size_t k = 0; k <= l; ++k) {
      next_null[k] = from[k] + log_null + std::log(em(j, 0));
      bp[w + k] = from_state[k];
    }
    real = std::move(next_real);
    null = std::move(next_null);
  }

  double best = kNegInf;
  std::size_t state = 1;
  for (std::size_t i = 1; i <= l; ++i) {
    if (real[i] > best) {
      best = real[i];
      state = i;
    }
  }
  for (std::size_t k = 0; k <= l; ++k) {
    if (null[k] > best) {
      best = null[k];
      state = w + k;
    }
  }
  for (std::size_t j = J; j-- > 0;) {
    if (state < w) links.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(state - 1)});
    if (j > 0) state = back[j * 2 * w + state];
  }
  canonicalize(links);
  return links;
}

AlignmentLinks viterbi_align(const HmmModel& model, const SentencePair& pair, bool reverse) {
  const auto& src = reverse ? pair.target : pair.source;
  const auto& tgt = reverse ? pair.source : pair.target;
  auto links = viterbi_align(model, lookup(model.translation.source_vocab(), src),
                             lookup(model.translation.target_vocab(), tgt));
  if (reverse) links = transpose(links);
  return links;
}

}  // namespace subxfer
