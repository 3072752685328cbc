#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bertkit/annotations.hpp"
#include "bertkit/corpus.hpp"
#include "bertkit/errors.hpp"
#include "bertkit/metrics.hpp"
#include "bertkit/pretrain.hpp"
#include "bertkit/synthetic.hpp"
#include "bertkit/vocab.hpp"

namespace py = pybind11;
using namespace bertkit;

namespace {

SpanNode span_from_dict(const py::dict& d) {
  SpanNode node;
  node.label = d["label"].cast<std::string>();
  node.start = d["start"].cast<int>();
  node.end = d["end"].cast<int>();
  if (d.contains("children")) {
    for (auto child : d["children"]) node.children.push_back(span_from_dict(child.cast<py::dict>()));
  }
  return node;
}

std::vector<SpanNode> spans_from_list(const py::list& spans) {
  std::vector<SpanNode> roots;
  for (auto s : spans) roots.push_back(span_from_dict(s.cast<py::dict>()));
  return roots;
}

std::vector<TokenLabelSequence> sequences_from_pairs(
    const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs) {
  std::vector<TokenLabelSequence> out;
  for (const auto& [words, labels] : pairs) out.push_back({words, labels, LabelScheme::BIO});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "bertkit core bindings";

  py::register_exception<Error>(m, "BertkitError");

  py::class_<Vocabulary>(m, "Vocab")
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("size", &Vocabulary::size)
      .def("piece", &Vocabulary::piece, py::arg("id"))
      .def("piece_id", &Vocabulary::piece_id, py::arg("piece"))
      .def("pieces", &Vocabulary::pieces);

  m.def(
      "ingest_text",
      [](const std::string& text, const std::string& source, const std::string& out_path) {
        auto manifest = ingest_plaintext_string(text, source);
        save_manifest(manifest, out_path);
        return manifest.documents.size();
      },
      py::arg("text"), py::arg("source"), py::arg("out_path"),
      "Segment, clean and write a corpus JSONL; returns the document count.");

  m.def(
      "corpus_stats_json",
      [](const std::string& manifest_path) {
        return corpus_stats(load_manifest(manifest_path)).to_json();
      },
      py::arg("manifest_path"));

  m.def(
      "split_corpus_jsonl",
      [](const std::string& manifest_path, uint64_t seed, const std::string& out_prefix) {
        auto split = split_corpus(load_manifest(manifest_path), seed);
        save_manifest(split.train, out_prefix + ".train.jsonl");
        save_manifest(split.dev, out_prefix + ".dev.jsonl");
        save_manifest(split.test, out_prefix + ".test.jsonl");
        return py::make_tuple(split.train.documents.size(), split.dev.documents.size(),
                              split.test.documents.size());
      },
      py::arg("manifest_path"), py::arg("seed"), py::arg("out_prefix"));

  m.def(
      "induce_vocabulary_from_jsonl",
      [](const std::string& manifest_path, int target_size, bool lowercase) {
        InduceOptions options;
        options.lowercase = lowercase;
        return induce_vocabulary(load_manifest(manifest_path), target_size, options);
      },
      py::arg("manifest_path"), py::arg("target_size"), py::arg("lowercase") = false);

  m.def(
      "tokenize",
      [](const std::string& text, const Vocabulary& vocab) {
        auto tokenized = tokenize_sentence(Sentence::from_text(text), vocab);
        return py::make_tuple(tokenized.pieces, tokenized.ids, tokenized.word_boundaries);
      },
      py::arg("text"), py::arg("vocab"),
      "Greedy WordPiece tokenization; returns (pieces, ids, word_boundaries).");

  m.def("detokenize", &detokenize, py::arg("pieces"));

  py::class_<MaskedExample>(m, "MaskedExampleData")
      .def_readonly("input_ids", &MaskedExample::input_ids)
      .def_readonly("segment_ids", &MaskedExample::segment_ids)
      .def_readonly("attention_mask", &MaskedExample::attention_mask)
      .def_readonly("mlm_positions", &MaskedExample::mlm_positions)
      .def_readonly("mlm_labels", &MaskedExample::mlm_labels)
      .def_readonly("sop_label", &MaskedExample::sop_label);

  m.def(
      "generate_masked_examples",
      [](const std::string& manifest_path, const Vocabulary& vocab, int max_seq_len,
         uint64_t seed, int limit) {
        auto manifest = load_manifest(manifest_path);
        auto pairs = collect_sop_pairs(manifest, vocab, seed);
        std::vector<MaskedExample> out;
        for (auto& pair : pairs) {
          if (limit > 0 && static_cast<int>(out.size()) >= limit) break;
          truncate_pair(pair, max_seq_len);
          SplitMix64 rng(stream_key(seed, pair.doc_id, pair.pair_index));
          out.push_back(apply_whole_word_masking(pair, vocab, rng, max_seq_len));
        }
        return out;
      },
      py::arg("manifest_path"), py::arg("vocab"), py::arg("max_seq_len") = 64,
      py::arg("seed") = 42, py::arg("limit") = 0,
      "SOP pairs with whole-word masking, packed to max_seq_len.");

  m.def(
      "flatten_highest_level",
      [](const py::list& spans, int length, const std::vector<std::string>& keep) {
        LabelPredicate predicate;
        if (!keep.empty()) {
          std::set<std::string> allowed(keep.begin(), keep.end());
          predicate = [allowed](const std::string& label) { return allowed.count(label) > 0; };
        }
        return flatten_highest_level(spans_from_list(spans), length, predicate).labels;
      },
      py::arg("spans"), py::arg("length"), py::arg("keep") = std::vector<std::string>{});

  m.def(
      "flatten_modifiers",
      [](const py::list& spans, int length, const std::string& prefix) {
        auto result = flatten_modifiers(
            spans_from_list(spans), length,
            [prefix](const std::string& label) { return label.rfind(prefix, 0) == 0; });
        return py::make_tuple(result.sequence.labels, result.conflicts);
      },
      py::arg("spans"), py::arg("length"), py::arg("prefix") = "MOD");

  m.def(
      "flatten_str",
      [](const py::list& spans, int length, const std::vector<std::string>& subset) {
        return flatten_str(spans_from_list(spans), length,
                           std::set<std::string>(subset.begin(), subset.end()))
            .labels;
      },
      py::arg("spans"), py::arg("length"), py::arg("subset"));

  m.def(
      "read_conll",
      [](const std::string& path) {
        std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> out;
        for (const auto& seq : read_conll(path)) out.emplace_back(seq.words, seq.labels);
        return out;
      },
      py::arg("path"));

  m.def(
      "write_conll",
      [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& seqs,
         const std::string& path) { write_conll(sequences_from_pairs(seqs), path); },
      py::arg("sequences"), py::arg("path"));

  py::class_<SpanF1Report>(m, "SpanF1Summary")
      .def_property_readonly("precision", &SpanF1Report::precision)
      .def_property_readonly("recall", &SpanF1Report::recall)
      .def_property_readonly("f1", &SpanF1Report::f1)
      .def_property_readonly("tp", [](const SpanF1Report& r) { return r.overall.tp; })
      .def_property_readonly("fp", [](const SpanF1Report& r) { return r.overall.fp; })
      .def_property_readonly("fn", [](const SpanF1Report& r) { return r.overall.fn; })
      .def("text", &SpanF1Report::to_text);

  py::class_<AccuracyReport>(m, "AccuracySummary")
      .def_readonly("accuracy", &AccuracyReport::accuracy)
      .def_readonly("macro_f1", &AccuracyReport::macro_f1)
      .def("text", &AccuracyReport::to_text);

  m.def(
      "span_f1",
      [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& gold,
         const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pred,
         bool strict) {
        return span_f1(sequences_from_pairs(gold), sequences_from_pairs(pred), strict);
      },
      py::arg("gold"), py::arg("pred"), py::arg("strict") = false);

  m.def(
      "token_accuracy",
      [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& gold,
         const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pred) {
        return token_accuracy(sequences_from_pairs(gold), sequences_from_pairs(pred));
      },
      py::arg("gold"), py::arg("pred"));

  m.def(
      "macro_f1",
      [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& gold,
         const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pred,
         bool include_o) {
        return macro_f1(sequences_from_pairs(gold), sequences_from_pairs(pred), include_o);
      },
      py::arg("gold"), py::arg("pred"), py::arg("include_o") = true);

  m.def(
      "render_table",
      [](const std::vector<std::tuple<std::string, std::string, std::string, std::string, double>>&
             rows) {
        std::vector<TableRow> table_rows;
        for (const auto& [model, task, split, metric, value] : rows) {
          table_rows.push_back({model, task, split, metric, value});
        }
        return render_table(table_rows);
      },
      py::arg("rows"));

  m.def(
      "synth_corpus_text",
      [](int num_docs, uint64_t seed) {
        SynthConfig config;
        config.num_docs = num_docs;
        config.seed = seed;
        return synth_corpus_text(config);
      },
      py::arg("num_docs") = 100, py::arg("seed") = 1);
}
