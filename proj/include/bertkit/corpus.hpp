#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace bertkit {

// A normalized sentence. `text` carries no control characters, no leading
// or trailing whitespace, and single internal spaces; `words` is exactly
// `text` split on those spaces.
struct Sentence {
  std::string text;
  std::vector<std::string> words;

  static Sentence from_text(std::string_view raw);
};

struct Document {
  std::string doc_id;
  std::string source;
  std::vector<Sentence> sentences;
};

struct CorpusManifest {
  std::vector<Document> documents;
  int64_t token_count = 0;  // whitespace words
  std::set<std::string> exclusion_ids;

  void recount();
};

struct SegmenterConfig {
  // Lowercased abbreviations including the trailing dot ("dr.", "o.a.").
  std::set<std::string> abbreviations = {"dhr.",   "mevr.", "mr.",  "dr.",  "drs.",
                                         "prof.",  "ir.",   "ing.", "st.",  "nr.",
                                         "o.a.",   "etc.",  "bijv.", "d.w.z.", "enz.",
                                         "ca.",    "blz.",  "afb.", "vgl.", "resp."};
};

struct CleaningConfig {
  // Documents failing either heuristic are dropped at ingestion.
  int min_sentences = 2;
  double max_nonletter_ratio = 0.2;
};

struct IngestOptions {
  SegmenterConfig segmenter;
  CleaningConfig cleaning;
};

// Splits normalized text into sentences: break after '.', '!' or '?'
// followed by whitespace and an uppercase letter or digit, unless the word
// ending in '.' is a configured abbreviation.
std::vector<Sentence> segment_sentences(std::string_view text, const SegmenterConfig& config);

// Reads UTF-8 plaintext with blank-line document separators. One Document
// per block; doc ids are "<source>-<block index>".
CorpusManifest ingest_plaintext(const std::string& path, const std::string& source,
                                const IngestOptions& options = {});

CorpusManifest ingest_plaintext_string(const std::string& text, const std::string& source,
                                       const IngestOptions& options = {});

CorpusManifest remove_overlap(const CorpusManifest& manifest,
                              const std::set<std::string>& exclusion_ids);

struct SplitResult {
  CorpusManifest train, dev, test;
};

// Deterministic 80/10/10 document-level split: dev and test take
// floor(n/10) documents each, train the remainder. Assignment orders
// documents by a stable hash of (doc_id, seed), so it is independent of
// document order.
SplitResult split_corpus(const CorpusManifest& manifest, uint64_t seed);

struct SourceStats {
  int64_t documents = 0;
  int64_t sentences = 0;
  int64_t tokens = 0;
};

struct StatsReport {
  std::map<std::string, SourceStats> per_source;
  SourceStats total;

  std::string to_json() const;
};

StatsReport corpus_stats(const CorpusManifest& manifest);

// Canonical corpus format: JSON-lines, one document per line:
// {"doc_id": str, "source": str, "sentences": [str]}.
void save_manifest(const CorpusManifest& manifest, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

// Exclusion lists: plain text, one doc_id per line.
std::set<std::string> read_exclusion_ids(const std::string& path);

}  // namespace bertkit
