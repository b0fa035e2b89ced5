#include "subxfer/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "subxfer/error.hpp"
#include "subxfer/parallel.hpp"
#include "subxfer/projection.hpp"
#include "subxfer/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace subxfer {

namespace {

/// Reads one config object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string where, fs::path base) : j_(j), where_(std::move(where)), base_(std::move(base)) {
    if (!j_.is_object()) throw ValidationError("config: '" + where_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      // Literal JSON integers parse as unsigned, but built objects may hold signed ones.
      if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
        throw ValidationError("config: " + name(key) + " must be a non-negative integer");
    }
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config: " + name(key) + ": " + e.what());
    }
  }

  void path(const char* key, fs::path& out) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = base_.empty() || fs::path(s).is_absolute() ? fs::path(s) : base_ / s;
  }

  std::optional<Section> section(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    return Section(*it, where_.empty() ? key : where_ + "." + key, base_);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ValidationError("config: unknown key " + name(item.key().c_str()));
    }
  }

 private:
  std::string name(const char* key) const { return "'" + (where_.empty() ? std::string(key) : where_ + "." + key) + "'"; }

  const json& j_;
  std::string where_;
  fs::path base_;
  std::set<std::string> seen_;
};

const char* estep_name(EStep e) { return e == EStep::Lattice ? "lattice" : "viterbi"; }

EStep parse_estep(std::string_view name) {
  if (name == "lattice") return EStep::Lattice;
  if (name == "viterbi") return EStep::Viterbi;
  throw ValidationError("unknown E-step '" + std::string(name) + "' (expected lattice or viterbi)");
}

const char* symmetrization_name(Symmetrization s) {
  switch (s) {
    case Symmetrization::Intersection: return "intersection";
    case Symmetrization::Union: return "union";
    case Symmetrization::GrowDiagFinalAnd: return "grow-diag-final-and";
  }
  return "grow-diag-final-and";
}

const char* format_name(EmbeddingFormat f) { return f == EmbeddingFormat::Text ? "text" : "binary"; }

void validate(const RunConfig& c) {
  if (c.tokenizer.kind != "unigram" && c.tokenizer.kind != "bpe") {
    throw ValidationError("tokenizer kind must be unigram or bpe, got '" + c.tokenizer.kind + "'");
  }
  if (c.tokenizer.vocab_size < 1) throw ValidationError("tokenizer vocab_size must be >= 1");
  if (!(c.tokenizer.shrink_factor > 0.0 && c.tokenizer.shrink_factor < 1.0)) {
    throw ValidationError("tokenizer shrink_factor must lie in (0, 1)");
  }
  const auto& pk = c.parent_tokenizer.kind;
  if (pk != "vocab" && pk != "unigram" && pk != "bpe") {
    throw ValidationError("parent_tokenizer kind must be vocab, unigram or bpe, got '" + pk + "'");
  }
  const auto& a = c.aligner;
  if (a.model1_iterations < 1) throw ValidationError("aligner model1_iterations must be >= 1");
  if (a.max_jump < 1) throw ValidationError("aligner max_jump must be >= 1");
  if (!(a.null_prior >= 0.0 && a.null_prior < 1.0)) throw ValidationError("aligner null_prior must lie in [0, 1)");
  if (a.direction != "forward" && a.direction != "reverse" && a.direction != "both") {
    throw ValidationError("aligner direction must be forward, reverse or both, got '" + a.direction + "'");
  }
  if (c.min_count < 1) throw ValidationError("projection min_count must be >= 1");
  Strategy::parse(c.transfer.strategy, c.transfer.k, c.transfer.rank);
  if (c.transfer.gaussian != "fit" && c.transfer.gaussian != "fixed") {
    throw ValidationError("transfer gaussian must be fit or fixed, got '" + c.transfer.gaussian + "'");
  }
  if (c.transfer.gaussian == "fixed" && !(c.transfer.gaussian_stddev > 0.0)) {
    throw ValidationError("Gaussian stddev must be positive");
  }
  if (c.threads < 1) throw ValidationError("threads must be >= 1");
}

void require_file(const fs::path& path, std::string_view what) {
  if (path.empty()) throw ValidationError(std::string(what) + " path is not configured");
  if (!fs::is_regular_file(path)) throw ValidationError("input not found: " + path.string());
}

fs::path out_file(const RunConfig& c, const char* name) { return c.paths.output_dir / name; }

void prepare_output_dir(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.paths.output_dir, ec);
  if (ec) throw Error("cannot create output directory " + c.paths.output_dir.string() + ": " + ec.message());
}

ParallelCorpus load_corpus(const RunConfig& c, const Logger& log) {
  require_file(c.paths.source, "source corpus");
  require_file(c.paths.target, "target corpus");
  auto corpus = load_parallel_corpus(c.paths.source, c.paths.target, c.normalization);
  if (corpus.skipped > 0) {
    log.warn("skipped sentence pairs with an empty side", {{"skipped", corpus.skipped}});
  }
  return corpus;
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& input, const fs::path& base_dir) {
  json j = input;
  // "k": 3 is accepted alongside "k": "3".
  if (j.is_object() && j.contains("transfer") && j["transfer"].is_object() && j["transfer"].contains("k") &&
      j["transfer"]["k"].is_number_integer()) {
    j["transfer"]["k"] = std::to_string(j["transfer"]["k"].get<std::int64_t>());
  }
  RunConfig c;
  Section root(j, "", base_dir);
  if (auto s = root.section("paths")) {
    s->path("source", c.paths.source);
    s->path("target", c.paths.target);
    s->path("parent_embeddings", c.paths.parent_embeddings);
    std::string format = format_name(c.paths.parent_embeddings_format);
    s->get("parent_embeddings_format", format);
    c.paths.parent_embeddings_format = parse_embedding_format(format);
    s->path("parent_vocab", c.paths.parent_vocab);
    s->path("output_dir", c.paths.output_dir);
    s->finish();
  }
  if (auto s = root.section("normalization")) {
    s->get("nfc", c.normalization.nfc);
    s->get("lowercase", c.normalization.lowercase);
    s->finish();
  }
  if (auto s = root.section("tokenizer")) {
    auto& t = c.tokenizer;
    s->get("kind", t.kind);
    s->get("vocab_size", t.vocab_size);
    s->path("training_text", t.training_text);
    s->get("seed_size", t.seed_size);
    s->get("em_rounds", t.em_rounds);
    s->get("shrink_factor", t.shrink_factor);
    s->get("min_pair_frequency", t.min_pair_frequency);
    std::string estep = estep_name(t.estep);
    s->get("estep", estep);
    t.estep = parse_estep(estep);
    s->finish();
  }
  if (auto s = root.section("parent_tokenizer")) {
    s->get("kind", c.parent_tokenizer.kind);
    s->path("path", c.parent_tokenizer.path);
    s->path("vocab_path", c.parent_tokenizer.vocab_path);
    s->finish();
  }
  if (auto s = root.section("aligner")) {
    auto& a = c.aligner;
    s->get("model1_iterations", a.model1_iterations);
    s->get("hmm_iterations", a.hmm_iterations);
    s->get("max_jump", a.max_jump);
    s->get("null_prior", a.null_prior);
    s->get("direction", a.direction);
    std::string sym = symmetrization_name(a.symmetrization);
    s->get("symmetrization", sym);
    a.symmetrization = parse_symmetrization(sym);
    s->finish();
  }
  if (auto s = root.section("projection")) {
    s->get("min_count", c.min_count);
    s->finish();
  }
  if (auto s = root.section("transfer")) {
    auto& t = c.transfer;
    s->get("strategy", t.strategy);
    s->get("k", t.k);
    s->get("rank", t.rank);
    s->get("seed", t.seed);
    if (auto g = s->section("gaussian")) {
      g->get("mode", t.gaussian);
      g->get("mean", t.gaussian_mean);
      g->get("stddev", t.gaussian_stddev);
      g->finish();
    }
    std::string format = format_name(t.format);
    s->get("format", format);
    t.format = parse_embedding_format(format);
    std::size_t dim = 0;
    s->get("dim", dim);
    if (dim > 0) t.dim = dim;
    s->finish();
  }
  root.get("threads", c.threads);
  root.finish();
  validate(c);
  return c;
}


RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("input not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

json RunConfig::to_json() const {
  json xfer = {{"strategy", transfer.strategy},
                   {"k", transfer.k},
                   {"rank", transfer.rank},
                   {"seed", transfer.seed},
                   {"gaussian", {{"mode", transfer.gaussian},
                                 {"mean", transfer.gaussian_mean},
                                 {"stddev", transfer.gaussian_stddev}}},
                   {"format", format_name(transfer.format)}};
  if (transfer.dim) xfer["dim"] = *transfer.dim;
  return {
      {"paths",
       {{"source", paths.source.string()},
        {"target", paths.target.string()},
        {"parent_embeddings", paths.parent_embeddings.string()},
        {"parent_embeddings_format", format_name(paths.parent_embeddings_format)},
        {"parent_vocab", paths.parent_vocab.string()},
        {"output_dir", paths.output_dir.string()}}},
      {"normalization", {{"nfc", normalization.nfc}, {"lowercase", normalization.lowercase}}},
      {"tokenizer",
       {{"kind", tokenizer.kind},
        {"vocab_size", tokenizer.vocab_size},
        {"training_text", tokenizer.training_text.string()},
        {"seed_size", tokenizer.seed_size},
        {"em_rounds", tokenizer.em_rounds},
        {"shrink_factor", tokenizer.shrink_factor},
        {"min_pair_frequency", tokenizer.min_pair_frequency},
        {"estep", estep_name(tokenizer.estep)}}},
      {"parent_tokenizer",
       {{"kind", parent_tokenizer.kind},
        {"path", parent_tokenizer.path.string()},
        {"vocab_path", parent_tokenizer.vocab_path.string()}}},
      {"aligner",
       {{"model1_iterations", aligner.model1_iterations},
        {"hmm_iterations", aligner.hmm_iterations},
        {"max_jump", aligner.max_jump},
        {"null_prior", aligner.null_prior},
        {"direction", aligner.direction},
        {"symmetrization", symmetrization_name(aligner.symmetrization)}}},
      {"projection", {{"min_count", min_count}}},
      {"transfer", xfer},
      {"threads", threads},
  };
}

// ---------------------------------------------------------------------------

void Logger::emit(std::string_view level, std::string_view message, const json& fields) const {
  json line = {{"level", level}, {"message", message}};
  for (const auto& item : fields.items()) line[item.key()] = item.value();
  *out_ << line.dump() << '\n';
}

void Logger::info(std::string_view message, const json& fields) const {
  if (verbose_) emit("info", message, fields);
}

void Logger::warn(std::string_view message, const json& fields) const { emit("warning", message, fields); }

// ---------------------------------------------------------------------------

TokenizerModel load_child_tokenizer(const RunConfig& c) {
  if (c.tokenizer.kind == "bpe") {
    require_file(out_file(c, artifacts::kBpeMerges), "BPE merges");
    require_file(out_file(c, artifacts::kBpeVocab), "BPE vocabulary");
    return read_bpe(out_file(c, artifacts::kBpeMerges), out_file(c, artifacts::kBpeVocab));
  }
  require_file(out_file(c, artifacts::kUnigram), "unigram model");
  return read_unigram(out_file(c, artifacts::kUnigram));
}

TokenizerModel load_parent_tokenizer(const RunConfig& c, const Vocab& parent_vocab) {
  const auto& p = c.parent_tokenizer;
  if (p.kind == "unigram") {
    require_file(p.path, "parent unigram model");
    return read_unigram(p.path);
  }
  if (p.kind == "bpe") {
    require_file(p.path, "parent BPE merges");
    require_file(p.vocab_path, "parent BPE vocabulary");
    return read_bpe(p.path, p.vocab_path);
  }
  return uniform_unigram(parent_vocab);
}

Vocab load_parent_vocab(const RunConfig& c) {
  if (!c.paths.parent_vocab.empty()) {
    require_file(c.paths.parent_vocab, "parent vocabulary");
    return read_vocab(c.paths.parent_vocab);
  }
  if (c.paths.parent_embeddings_format == EmbeddingFormat::Binary) {
    throw ValidationError("binary parent embeddings need a parent_vocab path");
  }
  require_file(c.paths.parent_embeddings, "parent embeddings");
  return read_embeddings(c.paths.parent_embeddings, EmbeddingFormat::Text).vocab;
}

// ---------------------------------------------------------------------------

json cmd_train_tokenizer(const RunConfig& c, const Logger& log) {
  validate(c);
  const auto text = c.tokenizer.training_text.empty() ? c.paths.source : c.tokenizer.training_text;
  require_file(text, "tokenizer training text");
  auto lines = read_lines(text);
  for (auto& line : lines) line = normalize_text(line, c.normalization);
  log.info("training tokenizer", {{"kind", c.tokenizer.kind}, {"lines", lines.size()}});

  json stats = {{"command", "train-tokenizer"},
                {"kind", c.tokenizer.kind},
                {"lines", lines.size()},
                {"requested_vocab_size", c.tokenizer.vocab_size}};
  if (c.tokenizer.kind == "bpe") {
    auto model = train_bpe(lines, {c.tokenizer.vocab_size, c.tokenizer.min_pair_frequency});
    prepare_output_dir(c);
    write_bpe(model, out_file(c, artifacts::kBpeMerges), out_file(c, artifacts::kBpeVocab));
    write_vocab(model.vocab(), out_file(c, artifacts::kChildVocab));
    stats["vocab_size"] = model.vocab().size();
    stats["merges"] = model.merges().size();
    stats["warnings"] = json::array();
    return stats;
  }
  UnigramTrainOptions opts;
  opts.vocab_size = c.tokenizer.vocab_size;
  opts.seed_size = c.tokenizer.seed_size;
  opts.em_rounds = c.tokenizer.em_rounds;
  opts.shrink_factor = c.tokenizer.shrink_factor;
  opts.estep = c.tokenizer.estep;
  auto result = train_unigram(lines, opts);
  for (const auto& w : result.warnings) log.warn(w);
  prepare_output_dir(c);
  write_unigram(result.model, out_file(c, artifacts::kUnigram));
  write_vocab(result.model.vocab(), out_file(c, artifacts::kChildVocab));
  stats["vocab_size"] = result.model.pieces().size();
  stats["warnings"] = result.warnings;
  return stats;
}

json cmd_encode(const RunConfig& c, const fs::path& input, const fs::path& output, std::ostream& out,
                const Logger& log) {
  validate(c);
  const auto model = load_child_tokenizer(c);
  std::vector<std::string> lines;
  if (input.empty() || input == "-") {
    for (std::string line; std::getline(std::cin, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
    }
  } else {
    lines = read_lines(input);
  }
  std::size_t tokens = 0;
  auto write = [&](std::ostream& os) {
    for (const auto& line : lines) {
      const auto seg = encode(model, normalize_text(line, c.normalization));
      tokens += seg.tokens.size();
      for (std::size_t i = 0; i < seg.tokens.size(); ++i) os << (i ? " " : "") << seg.tokens[i];
      os << '\n';
    }
  };
  if (output.empty()) {
    write(out);
  } else {
    atomic_write(output, write);
  }
  log.info("encoded", {{"lines", lines.size()}, {"tokens", tokens}});
  return {{"command", "encode"}, {"lines", lines.size()}, {"tokens", tokens}};
}

namespace {

struct DirectionResult {
  std::vector<AlignmentLinks> links;  // per corpus pair, (source, target) orientation
  TranslationTable table;
  double model1_log_likelihood = 0.0;
  std::optional<double> hmm_log_likelihood;
};

DirectionResult align_direction(const RunConfig& c, const ParallelCorpus& corpus, bool reverse, const Logger& log) {
  const auto& a = c.aligner;
  const auto indexed = index_corpus(corpus.pairs, reverse);
  auto m1 = train_model1(indexed, {a.model1_iterations, a.null_prior, c.threads});
  log.info("model 1 trained", {{"reverse", reverse}, {"log_likelihood", m1.log_likelihood}});
  DirectionResult r;
  r.model1_log_likelihood = m1.log_likelihood.back();
  if (a.hmm_iterations > 0) {
    auto hmm = train_hmm(indexed, m1.table, {a.hmm_iterations, a.max_jump, a.null_prior, c.threads});
    log.info("hmm trained", {{"reverse", reverse}, {"log_likelihood", hmm.log_likelihood}});
    r.hmm_log_likelihood = hmm.log_likelihood.back();
    r.links = parallel_map<AlignmentLinks>(corpus.pairs.size(), c.threads, [&](std::size_t i) {
      return viterbi_align(hmm.model, corpus.pairs[i], reverse);
    });
    r.table = std::move(hmm.model.translation);
  } else {
    r.links = parallel_map<AlignmentLinks>(corpus.pairs.size(), c.threads, [&](std::size_t i) {
      return viterbi_align(m1.table, corpus.pairs[i], a.null_prior, reverse);
    });
    r.table = std::move(m1.table);
  }
  return r;
}

std::size_t count_links(const std::vector<AlignmentLinks>& alignments) {
  std::size_t n = 0;
  for (const auto& l : alignments) n += l.size();
  return n;
}

/// Checks an alignment file against the corpus it claims to describe.
void check_alignments(const std::vector<AlignmentLinks>& alignments, const ParallelCorpus& corpus) {
  if (alignments.size() != corpus.line_count) {
    throw ValidationError("alignment file has " + std::to_string(alignments.size()) + " lines but the corpus has " +
                          std::to_string(corpus.line_count));
  }
  std::vector<bool> present(corpus.line_count, false);
  for (const auto& pair : corpus.pairs) {
    present[pair.index] = true;
    for (const auto& l : alignments[pair.index]) {
      if (l.source >= pair.source.size() || l.target >= pair.target.size()) {
        throw ValidationError("line " + std::to_string(pair.index + 1) + ": link " + std::to_string(l.source) + "-" +
                              std::to_string(l.target) + " is out of range for a " +
                              std::to_string(pair.source.size()) + "x" + std::to_string(pair.target.size()) +
                              " sentence pair");
      }
    }
  }
  for (std::size_t i = 0; i < corpus.line_count; ++i) {
    if (!present[i] && !alignments[i].empty()) {
      throw ValidationError("line " + std::to_string(i + 1) + ": links given for a skipped sentence pair");
    }
  }
}

}  // namespace

json cmd_align(const RunConfig& c, const fs::path& import_path, const Logger& log) {
  validate(c);
  const auto corpus = load_corpus(c, log);
  std::vector<AlignmentLinks> alignments(corpus.line_count);
  json stats = {{"command", "align"}, {"pairs", corpus.pairs.size()}, {"skipped", corpus.skipped}};

  if (!import_path.empty()) {
    require_file(import_path, "imported alignments");
    alignments = read_pharaoh(import_path);
    check_alignments(alignments, corpus);
    prepare_output_dir(c);
    write_pharaoh(alignments, out_file(c, artifacts::kAlignments));
    stats["imported"] = true;
    stats["links"] = count_links(alignments);
    return stats;
  }
  if (corpus.pairs.empty()) throw ValidationError("cannot train an aligner on an empty corpus");

  const auto& dir = c.aligner.direction;
  std::optional<DirectionResult> fwd, rev;
  if (dir != "reverse") fwd = align_direction(c, corpus, false, log);
  if (dir != "forward") rev = align_direction(c, corpus, true, log);
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& pair = corpus.pairs[i];
    auto& out = alignments[pair.index];
    if (fwd && rev) {
      out = symmetrize(fwd->links[i], rev->links[i], c.aligner.symmetrization, pair.source.size(), pair.target.size());
    } else {
      out = fwd ? fwd->links[i] : rev->links[i];
    }
  }
  const auto& main = fwd ? *fwd : *rev;
  prepare_output_dir(c);
  write_pharaoh(alignments, out_file(c, artifacts::kAlignments));
  write_translation_table(main.table, out_file(c, artifacts::kTranslationTable));
  stats["imported"] = false;
  stats["direction"] = dir;
  stats["links"] = count_links(alignments);
  stats["model1_log_likelihood"] = main.model1_log_likelihood;
  if (main.hmm_log_likelihood) stats["hmm_log_likelihood"] = *main.hmm_log_likelihood;
  return stats;
}

json cmd_project(const RunConfig& c, const Logger& log) {
  validate(c);
  const auto corpus = load_corpus(c, log);
  const auto child_model = load_child_tokenizer(c);
  const auto parent_vocab = load_parent_vocab(c);
  const auto parent_model = load_parent_tokenizer(c, parent_vocab);
  const auto alignments_path = out_file(c, artifacts::kAlignments);
  require_file(alignments_path, "alignments");
  const auto alignments = read_pharaoh(alignments_path);
  const auto child_vocab = vocab_of(child_model);

  LinkCounter counter;
  if (alignments.empty()) {
    log.warn("alignment file is empty; writing an empty table", {{"path", alignments_path.string()}});
  } else {
    check_alignments(alignments, corpus);
    auto pieces = [](const TokenizerModel& model, const std::vector<std::string>& words, const SentencePair& pair,
                     const char* side) {
      auto grouped = group_by_word(encode(model, join_words(words)));
      if (grouped.size() != words.size()) {
        throw ProjectionError("sentence " + std::to_string(pair.index + 1) + ": " + side + " segmentation yields " +
                              std::to_string(grouped.size()) + " words, expected " + std::to_string(words.size()));
      }
      return grouped;
    };
    ordered_parallel_reduce<std::vector<SubwordLink>>(
        corpus.pairs.size(), c.threads,
        [&](std::size_t i) {
          const auto& pair = corpus.pairs[i];
          try {
            return project_sentence(alignments[pair.index], pieces(child_model, pair.source, pair, "source"),
                                    pieces(parent_model, pair.target, pair, "target"));
          } catch (const ProjectionError& e) {
            const std::string what = e.what();
            if (what.rfind("sentence ", 0) == 0) throw;
            throw ProjectionError("sentence " + std::to_string(pair.index + 1) + ": " + what);
          }
        },
        [&](const std::vector<SubwordLink>& links) { counter.add(links); });
  }

  ProjectionStats ps;
  const auto table = aggregate_table(counter, {&parent_vocab, &child_vocab, c.min_count}, &ps);
  prepare_output_dir(c);
  write_alignment_table(table, out_file(c, artifacts::kAlignmentTable));
  return {{"command", "project"},
          {"sentences", corpus.pairs.size()},
          {"total_links", ps.total_links},
          {"kept_links", ps.kept_links},
          {"discarded_parent", ps.discarded_parent},
          {"discarded_child", ps.discarded_child},
          {"below_min_count", ps.below_min_count},
          {"aligned_child_subwords", ps.keys}};
}

json cmd_transfer(const RunConfig& c, const Logger& log) {
  validate(c);
  const auto strategy = Strategy::parse(c.transfer.strategy, c.transfer.k, c.transfer.rank);
  const auto vocab_path = out_file(c, artifacts::kChildVocab);
  require_file(vocab_path, "child vocabulary");
  require_file(c.paths.parent_embeddings, "parent embeddings");
  if (c.paths.parent_embeddings_format == EmbeddingFormat::Binary) require_file(c.paths.parent_vocab, "parent vocabulary");
  const auto table_path = out_file(c, artifacts::kAlignmentTable);
  if (strategy.needs_table()) require_file(table_path, "alignment table");

  const auto child_vocab = read_vocab(vocab_path);
  const auto parent =
      read_embeddings(c.paths.parent_embeddings, c.paths.parent_embeddings_format, c.paths.parent_vocab);
  if (c.transfer.dim && *c.transfer.dim != parent.matrix.dim()) {
    throw ValidationError("dimension mismatch: parent embeddings have d=" + std::to_string(parent.matrix.dim()) +
                          " but the config asks for d=" + std::to_string(*c.transfer.dim));
  }
  std::optional<SubwordAlignmentTable> table;
  if (strategy.needs_table()) table = read_alignment_table(table_path);

  TransferInputs in;
  in.child_vocab = &child_vocab;
  in.parent = &parent;
  in.table = table ? &*table : nullptr;
  in.seed = c.transfer.seed;
  if (c.transfer.gaussian == "fixed") {
    in.gaussian = fixed_gaussian(parent.matrix.dim(), c.transfer.gaussian_mean, c.transfer.gaussian_stddev);
  }
  log.info("transferring", {{"strategy", strategy.name()}, {"child_vocab", child_vocab.size()}});
  const auto state = build_child_embeddings(strategy, in);

  prepare_output_dir(c);
  const Embeddings child{state.vocab, state.matrix};
  if (c.transfer.format == EmbeddingFormat::Text) {
    write_embeddings(child, out_file(c, artifacts::kEmbeddingsText), EmbeddingFormat::Text);
  } else {
    write_embeddings(child, out_file(c, artifacts::kEmbeddingsBinary), EmbeddingFormat::Binary);
  }
  write_transfer_report(state.vocab, state.report, out_file(c, artifacts::kReport));
  const auto counts = state.report.counts();
  if (state.report.single_rank_fallbacks > 0) {
    log.warn("single-rank transfer fell back to random", {{"tokens", state.report.single_rank_fallbacks}});
  }
  return {{"command", "transfer"},
          {"strategy", strategy.name()},
          {"child_vocab", child_vocab.size()},
          {"identical", counts.identical},
          {"aligned", counts.aligned},
          {"random", counts.random},
          {"single_rank_fallbacks", state.report.single_rank_fallbacks},
          {"dim", parent.matrix.dim()}};
}

json cmd_report(const RunConfig& c, const Logger&) {
  const auto path = out_file(c, artifacts::kReport);
  require_file(path, "transfer report");
  Vocab vocab;
  const auto report = read_transfer_report(path, &vocab);
  json by = json::object();
  std::size_t aligned_contributors = 0;
  for (const auto& e : report.entries) {
    by[std::string(to_string(e.provenance))] = by.value(std::string(to_string(e.provenance)), 0) + 1;
    if (e.provenance != Provenance::Identical && e.provenance != Provenance::Random) {
      aligned_contributors += e.contributors.size();
    }
  }
  const auto counts = report.counts();
  json stats = {{"command", "report"},
                {"child_vocab", vocab.size()},
                {"identical", counts.identical},
                {"aligned", counts.aligned},
                {"random", counts.random},
                {"by_provenance", by}};
  stats["mean_contributors"] =
      counts.aligned ? static_cast<double>(aligned_contributors) / static_cast<double>(counts.aligned) : 0.0;
  const auto table_path = out_file(c, artifacts::kAlignmentTable);
  if (fs::is_regular_file(table_path)) {
    const auto table = read_alignment_table(table_path);
    stats["aligned_child_subwords"] = table.size();
    stats["table_links"] = table.total_links();
  }
  return stats;
}

// ---------------------------------------------------------------------------

namespace cli {

namespace {

json error_json(std::string_view kind, std::string_view message, int code) {
  return {{"error", kind}, {"message", message}, {"exit_code", code}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Initialize child NMT embeddings from a parent model", "subxfer"};
  app.require_subcommand(1);
  app.fallthrough();

  fs::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool verbose = false;
  std::optional<std::string> source, target, output_dir, parent_embeddings, parent_format, parent_vocab;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Random seed for the transfer step");
  app.add_option("--threads", threads, "Worker threads");
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
  app.add_option("--source", source, "Child-language side of the parallel corpus");
  app.add_option("--target", target, "Shared-language side of the parallel corpus");
  app.add_option("--output-dir", output_dir, "Artifact directory");
  app.add_option("--parent-embeddings", parent_embeddings, "Parent embedding matrix");
  app.add_option("--parent-format", parent_format, "Parent embedding format (text or binary)");
  app.add_option("--parent-vocab", parent_vocab, "Parent vocabulary file");

  auto* train = app.add_subcommand("train-tokenizer", "Train the child sub-word tokenizer");
  std::optional<std::string> kind, estep;
  std::optional<std::size_t> vocab_size, em_rounds;
  std::optional<std::string> training_text;
  train->add_option("--kind", kind, "unigram or bpe");
  train->add_option("--vocab-size", vocab_size, "Target vocabulary size");
  train->add_option("--input", training_text, "Training text (defaults to the source corpus)");
  train->add_option("--em-rounds", em_rounds, "Unigram EM rounds per pruning step");
  train->add_option("--estep", estep, "Unigram E-step: lattice or viterbi");

  auto* enc = app.add_subcommand("encode", "Segment text with the trained child tokenizer");
  fs::path encode_input, encode_output;
  enc->add_option("--input", encode_input, "Input text (stdin when omitted)");
  enc->add_option("--output", encode_output, "Output file (stdout when omitted)");

  auto* align = app.add_subcommand("align", "Word-align the parallel corpus");
  fs::path import_path;
  std::optional<std::size_t> m1_iters, hmm_iters;
  std::optional<int> max_jump;
  std::optional<std::string> direction, symmetrization;
  align->add_option("--import", import_path, "Validate and adopt an external Pharaoh file");
  align->add_option("--model1-iterations", m1_iters);
  align->add_option("--hmm-iterations", hmm_iters);
  align->add_option("--max-jump", max_jump);
  align->add_option("--direction", direction, "forward, reverse or both");
  align->add_option("--symmetrization", symmetrization, "intersection, union or grow-diag-final-and");

  auto* project = app.add_subcommand("project", "Project word links onto sub-words");
  std::optional<std::uint64_t> min_count;
  project->add_option("--min-count", min_count, "Minimum pair count kept in the table");

  auto* transfer = app.add_subcommand("transfer", "Build the child embedding matrix");
  std::optional<std::string> strategy, k, gaussian, format;
  std::optional<std::size_t> rank;
  std::optional<double> gmean, gstddev;
  transfer->add_option("--strategy", strategy, "baseline, mi, top1, mean or single");
  transfer->add_option("--k", k, "Mean over the top-k candidates, or all");
  transfer->add_option("--rank", rank, "Rank used by the single strategy");
  transfer->add_option("--gaussian", gaussian, "fit or fixed");
  transfer->add_option("--gaussian-mean", gmean);
  transfer->add_option("--gaussian-stddev", gstddev);
  transfer->add_option("--format", format, "Output format: text or binary");

  auto* report = app.add_subcommand("report", "Summarize the transfer report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << error_json("usage", e.what(), 2).dump() << '\n';
    return 2;
  }

  const Logger log(err, verbose);
  try {
    RunConfig c;
    if (!config_path.empty()) {
      c = RunConfig::load(config_path);
    }
    if (source) c.paths.source = *source;
    if (target) c.paths.target = *target;
    if (output_dir) c.paths.output_dir = *output_dir;
    if (parent_embeddings) c.paths.parent_embeddings = *parent_embeddings;
    if (parent_format) c.paths.parent_embeddings_format = parse_embedding_format(*parent_format);
    if (parent_vocab) c.paths.parent_vocab = *parent_vocab;
    if (threads) c.threads = *threads;
    if (seed) c.transfer.seed = *seed;
    if (kind) c.tokenizer.kind = *kind;
    if (vocab_size) c.tokenizer.vocab_size = *vocab_size;
    if (training_text) c.tokenizer.training_text = *training_text;
    if (em_rounds) c.tokenizer.em_rounds = *em_rounds;
    if (estep) c.tokenizer.estep = parse_estep(*estep);
    if (m1_iters) c.aligner.model1_iterations = *m1_iters;
    if (hmm_iters) c.aligner.hmm_iterations = *hmm_iters;
    if (max_jump) c.aligner.max_jump = *max_jump;
    if (direction) c.aligner.direction = *direction;
    if (symmetrization) c.aligner.symmetrization = parse_symmetrization(*symmetrization);
    if (min_count) c.min_count = *min_count;
    if (strategy) c.transfer.strategy = *strategy;
    if (k) c.transfer.k = *k;
    if (rank) c.transfer.rank = *rank;
    if (gaussian) c.transfer.gaussian = *gaussian;
    if (gmean) c.transfer.gaussian_mean = *gmean;
    if (gstddev) c.transfer.gaussian_stddev = *gstddev;
    if (format) c.transfer.format = parse_embedding_format(*format);
    validate(c);

    json stats;
    bool print = true;
    if (train->parsed()) {
      stats = cmd_train_tokenizer(c, log);
    } else if (enc->parsed()) {
      stats = cmd_encode(c, encode_input, encode_output, out, log);
      print = !encode_output.empty();
    } else if (align->parsed()) {
      stats = cmd_align(c, import_path, log);
    } else if (project->parsed()) {
      stats = cmd_project(c, log);
    } else if (transfer->parsed()) {
      stats = cmd_transfer(c, log);
    } else if (report->parsed()) {
      stats = cmd_report(c, log);
    }
    if (print) out << stats.dump() << '\n';
    return 0;
  } catch (const FormatError& e) {
    auto j = error_json("format", e.what(), 2);
    if (e.line()) j["line"] = e.line();
    err << j.dump() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << error_json("validation", e.what(), 2).dump() << '\n';
    return 2;
  } catch (const ProjectionError& e) {
    err << error_json("projection", e.what(), 3).dump() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << error_json("runtime", e.what(), 3).dump() << '\n';
    return 3;
  }
}

}  // namespace cli

}  // namespace subxfer
