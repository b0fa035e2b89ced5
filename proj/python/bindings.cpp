#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"
#include "subxfer/pipeline.hpp"
#include "subxfer/projection.hpp"
#include "subxfer/recovery.hpp"
#include "subxfer/tokenizer.hpp"
#include "subxfer/transfer.hpp"
#include "subxfer/unicode.hpp"
#include "subxfer/word_aligner.hpp"

namespace py = pybind11;
using namespace subxfer;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

struct Tokenizer {
  TokenizerModel model;

  std::string kind() const { return std::holds_alternative<BpeModel>(model) ? "bpe" : "unigram"; }
};

EmbeddingMatrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw ValidationError("embedding matrix must be 2-dimensional");
  EmbeddingMatrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  if (!m.data().empty()) std::memcpy(m.data().data(), a.data(), m.data().size() * sizeof(float));
  return m;
}

FloatArray to_array(const EmbeddingMatrix& m) {
  FloatArray out({m.rows(), m.dim()});
  if (!m.data().empty()) std::memcpy(out.mutable_data(), m.data().data(), m.data().size() * sizeof(float));
  return out;
}

std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> to_py(const std::vector<AlignmentLinks>& all) {
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> out;
  out.reserve(all.size());
  for (const auto& links : all) {
    auto& v = out.emplace_back();
    for (const auto& l : links) v.emplace_back(l.source, l.target);
  }
  return out;
}

std::vector<AlignmentLinks> align_lines(const std::vector<std::string>& source, const std::vector<std::string>& target,
                                        std::size_t model1_iterations, std::size_t hmm_iterations, int max_jump,
                                        double null_prior, std::size_t threads) {
  const auto corpus = make_parallel_corpus(source, target);
  std::vector<AlignmentLinks> out(corpus.line_count);
  if (corpus.pairs.empty()) return out;
  const auto c = index_corpus(corpus.pairs);
  const auto m1 = train_model1(c, {model1_iterations, null_prior, threads});
  if (hmm_iterations == 0) {
    for (const auto& p : corpus.pairs) out[p.index] = viterbi_align(m1.table, p, null_prior);
    return out;
  }
  const auto hmm = train_hmm(c, m1.table, {hmm_iterations, max_jump, null_prior, threads});
  for (const auto& p : corpus.pairs) out[p.index] = viterbi_align(hmm.model, p);
  return out;
}

py::dict recovery(std::size_t tokens, std::size_t distractors, std::size_t dim, double correlation,
                  std::size_t max_rank, std::uint64_t seed) {
  const auto r = run_recovery_experiment({tokens, distractors, dim, correlation, max_rank, seed});
  py::dict d;
  d["single"] = r.single;
  d["mean_top"] = r.mean_top;
  d["mean_all"] = r.mean_all;
  return d;
}

py::tuple transfer(const std::string& strategy, const std::vector<std::string>& child_vocab,
                   const std::vector<std::string>& parent_vocab, const FloatArray& parent_matrix,
                   const std::map<std::pair<std::string, std::string>, std::uint64_t>& links, const std::string& k,
                   std::size_t rank, std::uint64_t seed, std::optional<double> gaussian_stddev) {
  const Vocab child(child_vocab);
  const Embeddings parent{Vocab(parent_vocab), to_matrix(parent_matrix)};
  if (parent.vocab.size() != parent.matrix.rows()) throw ValidationError("parent vocab and matrix row count differ");
  const SubwordAlignmentTable table(links);
  TransferInputs in{&child, &parent, &table, std::nullopt, seed};
  if (gaussian_stddev) in.gaussian = fixed_gaussian(parent.matrix.dim(), 0.0, *gaussian_stddev);
  const auto state = build_child_embeddings(Strategy::parse(strategy, k, rank), in);
  std::vector<std::string> provenance;
  std::vector<std::vector<std::string>> contributors;
  for (const auto& e : state.report.entries) {
    provenance.emplace_back(to_string(e.provenance));
    contributors.push_back(e.contributors);
  }
  return py::make_tuple(to_array(state.matrix), provenance, contributors);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sub-word embedding transfer for low-resource NMT";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ProjectionError>(m, "ProjectionError", PyExc_RuntimeError);

  m.attr("WORD_MARKER") = std::string(kWordMarker);
  m.def("normalize", [](const std::string& s, bool nfc, bool lowercase) { return normalize_text(s, {nfc, lowercase}); },
        py::arg("text"), py::arg("nfc") = true, py::arg("lowercase") = false);
  m.def("annotate", [](const std::string& s) { return annotate(s); });
  m.def("decode", [](const std::vector<std::string>& tokens) { return decode(tokens); });

  py::class_<Tokenizer>(m, "Tokenizer")
      .def_static(
          "train_unigram",
          [](const std::vector<std::string>& lines, std::size_t vocab_size, std::size_t em_rounds) {
            UnigramTrainOptions o;
            o.vocab_size = vocab_size;
            o.em_rounds = em_rounds;
            return Tokenizer{train_unigram(lines, o).model};
          },
          py::arg("lines"), py::arg("vocab_size") = 50000, py::arg("em_rounds") = 2)
      .def_static(
          "train_bpe",
          [](const std::vector<std::string>& lines, std::size_t vocab_size, std::uint64_t min_pair_frequency) {
            return Tokenizer{train_bpe(lines, {vocab_size, min_pair_frequency})};
          },
          py::arg("lines"), py::arg("vocab_size") = 50000, py::arg("min_pair_frequency") = 2)
      .def_static("load_unigram", [](const std::filesystem::path& p) { return Tokenizer{read_unigram(p)}; })
      .def_static("load_bpe", [](const std::filesystem::path& merges, const std::filesystem::path& vocab) {
        return Tokenizer{read_bpe(merges, vocab)};
      })
      .def_static("from_vocab", [](const std::vector<std::string>& v) { return Tokenizer{uniform_unigram(Vocab(v))}; })
      .def_property_readonly("kind", &Tokenizer::kind)
      .def("vocab", [](const Tokenizer& t) { return vocab_of(t.model).tokens(); })
      .def("encode", [](const Tokenizer& t, const std::string& s) { return encode(t.model, s).tokens; })
      .def("encode_with_spans",
           [](const Tokenizer& t, const std::string& s) {
             const auto seg = encode(t.model, s);
             std::vector<std::pair<std::size_t, std::size_t>> spans;
             for (const auto& sp : seg.spans) spans.emplace_back(sp.begin, sp.end);
             return py::make_tuple(seg.text, seg.tokens, spans);
           })
      .def("encode_words", [](const Tokenizer& t, const std::string& s) { return group_by_word(encode(t.model, s)); })
      .def("save", [](const Tokenizer& t, const std::filesystem::path& path, std::optional<std::filesystem::path> vocab) {
        if (const auto* b = std::get_if<BpeModel>(&t.model)) {
          if (!vocab) throw ValidationError("BPE models need a vocabulary path");
          write_bpe(*b, path, *vocab);
        } else {
          write_unigram(std::get<UnigramModel>(t.model), path);
        }
      }, py::arg("path"), py::arg("vocab_path") = std::nullopt);

  m.def(
      "align",
      [](const std::vector<std::string>& s, const std::vector<std::string>& t, std::size_t m1, std::size_t hmm,
         int max_jump, double null_prior, std::size_t threads) {
        return to_py(align_lines(s, t, m1, hmm, max_jump, null_prior, threads));
      },
      py::arg("source"), py::arg("target"), py::arg("model1_iterations") = 5, py::arg("hmm_iterations") = 5,
      py::arg("max_jump") = 5, py::arg("null_prior") = 0.2, py::arg("threads") = 1,
      "Word-align parallel sentences; returns (source, target) index pairs per line.");

  m.def(
      "project",
      [](const std::vector<std::pair<std::uint32_t, std::uint32_t>>& links, const WordPieces& child,
         const WordPieces& parent) {
        AlignmentLinks al;
        for (const auto& [a, b] : links) al.push_back({a, b});
        canonicalize(al);
        std::vector<std::pair<std::string, std::string>> out;
        for (auto& l : project_sentence(al, child, parent)) out.emplace_back(std::move(l.child), std::move(l.parent));
        return out;
      },
      py::arg("links"), py::arg("child_pieces"), py::arg("parent_pieces"));

  m.def("transfer", &transfer, py::arg("strategy"), py::arg("child_vocab"), py::arg("parent_vocab"),
        py::arg("parent_matrix"), py::arg("links"), py::arg("k") = "all", py::arg("rank") = 1, py::arg("seed") = 1,
        py::arg("gaussian_stddev") = std::nullopt,
        "Build child embeddings. `links` maps (child, parent) to counts. Returns (matrix, provenance, contributors).");

  m.def("recovery_experiment", &recovery, py::arg("tokens") = 256, py::arg("distractors") = 6, py::arg("dim") = 64,
        py::arg("correlation") = 0.3, py::arg("max_rank") = 5, py::arg("seed") = 20240501);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
