#include "bertkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bertkit/errors.hpp"
#include "bertkit/rng.hpp"
#include "bertkit/text.hpp"

namespace bertkit {

using ordered_json = nlohmann::ordered_json;

Sentence from_normalized(std::string text) {
  Sentence s;
  s.words = split_on_spaces(text);
  s.text = std::move(text);
  return s;
}

Sentence Sentence::from_text(std::string_view raw) { return from_normalized(normalize_text(raw)); }

void CorpusManifest::recount() {
  token_count = 0;
  for (const auto& doc : documents)
    for (const auto& s : doc.sentences) token_count += static_cast<int64_t>(s.words.size());
}

namespace {

// The word ending at codepoint index `i` (inclusive), lowercased.
std::string word_ending_at(const std::vector<uint32_t>& cps, size_t i) {
  size_t start = i;
  while (start > 0 && !is_space(cps[start - 1])) --start;
  std::vector<uint32_t> w(cps.begin() + start, cps.begin() + i + 1);
  for (auto& cp : w) cp = to_lower(cp);
  return encode_utf8(w);
}

double nonletter_ratio(const Document& doc) {
  int64_t letters = 0, total = 0;
  for (const auto& s : doc.sentences) {
    for (uint32_t cp : decode_utf8(s.text)) {
      if (cp == ' ') continue;
      ++total;
      if (is_letter(cp)) ++letters;
    }
  }
  if (total == 0) return 1.0;
  return 1.0 - static_cast<double>(letters) / static_cast<double>(total);
}

}  // namespace

std::vector<Sentence> segment_sentences(std::string_view text, const SegmenterConfig& config) {
  std::string normalized = normalize_text(text);
  std::vector<uint32_t> cps = decode_utf8(normalized);
  std::vector<Sentence> sentences;
  size_t start = 0;
  for (size_t i = 0; i < cps.size(); ++i) {
    uint32_t cp = cps[i];
    if (cp != '.' && cp != '!' && cp != '?') continue;
    if (i + 2 >= cps.size()) continue;
    if (!is_space(cps[i + 1])) continue;
    uint32_t next = cps[i + 2];
    if (!is_upper(next) && !is_digit(next)) continue;
    if (cp == '.' && config.abbreviations.count(word_ending_at(cps, i)) > 0) continue;
    std::vector<uint32_t> part(cps.begin() + start, cps.begin() + i + 1);
    Sentence s = from_normalized(encode_utf8(part));
    if (!s.text.empty()) sentences.push_back(std::move(s));
    start = i + 2;
  }
  if (start < cps.size()) {
    std::vector<uint32_t> part(cps.begin() + start, cps.end());
    Sentence s = from_normalized(encode_utf8(part));
    if (!s.text.empty()) sentences.push_back(std::move(s));
  }
  return sentences;
}

CorpusManifest ingest_plaintext_string(const std::string& text, const std::string& source,
                                       const IngestOptions& options) {
  CorpusManifest manifest;
  std::vector<std::string> block_lines;
  size_t block_index = 0;

  auto flush_block = [&]() {
    if (block_lines.empty()) return;
    std::string block = join(block_lines, " ");
    block_lines.clear();
    Document doc;
    doc.source = source;
    doc.sentences = segment_sentences(block, options.segmenter);
    size_t index = block_index++;
    if (doc.sentences.empty()) return;
    if (static_cast<int>(doc.sentences.size()) < options.cleaning.min_sentences) return;
    if (nonletter_ratio(doc) > options.cleaning.max_nonletter_ratio) return;
    char id[32];
    std::snprintf(id, sizeof(id), "-%06zu", index);
    doc.doc_id = source + id;
    manifest.documents.push_back(std::move(doc));
  };

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (normalize_text(line).empty()) {
      flush_block();
    } else {
      block_lines.push_back(line);
    }
  }
  flush_block();
  manifest.recount();
  return manifest;
}

CorpusManifest ingest_plaintext(const std::string& path, const std::string& source,
                                const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ingest_plaintext_string(buffer.str(), source, options);
}

CorpusManifest remove_overlap(const CorpusManifest& manifest,
                              const std::set<std::string>& exclusion_ids) {
  CorpusManifest out;
  out.exclusion_ids = exclusion_ids;
  for (const auto& doc : manifest.documents) {
    if (exclusion_ids.count(doc.doc_id) == 0) out.documents.push_back(doc);
  }
  out.recount();
  return out;
}

SplitResult split_corpus(const CorpusManifest& manifest, uint64_t seed) {
  size_t n = manifest.documents.size();
  if (n < 10) {
    throw DataError("split_corpus requires at least 10 documents, got " + std::to_string(n));
  }
  size_t k = n / 10;  // dev and test sizes

  // Canonical order: sort by (hash(doc_id, seed), doc_id). Buckets: the
  // first k documents go to test, the next k to dev, the rest to train.
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<uint64_t> hashes(n);
  for (size_t i = 0; i < n; ++i) hashes[i] = stream_key(seed, manifest.documents[i].doc_id, 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
    return manifest.documents[a].doc_id < manifest.documents[b].doc_id;
  });

  std::vector<int> bucket(n, 2);  // 0 = test, 1 = dev, 2 = train
  for (size_t r = 0; r < k; ++r) bucket[order[r]] = 0;
  for (size_t r = k; r < 2 * k; ++r) bucket[order[r]] = 1;

  SplitResult result;
  for (size_t i = 0; i < n; ++i) {
    const auto& doc = manifest.documents[i];
    if (bucket[i] == 0)
      result.test.documents.push_back(doc);
    else if (bucket[i] == 1)
      result.dev.documents.push_back(doc);
    else
      result.train.documents.push_back(doc);
  }
  result.train.recount();
  result.dev.recount();
  result.test.recount();
  return result;
}

StatsReport corpus_stats(const CorpusManifest& manifest) {
  StatsReport report;
  for (const auto& doc : manifest.documents) {
    auto& row = report.per_source[doc.source];
    row.documents += 1;
    report.total.documents += 1;
    for (const auto& s : doc.sentences) {
      row.sentences += 1;
      row.tokens += static_cast<int64_t>(s.words.size());
      report.total.sentences += 1;
      report.total.tokens += static_cast<int64_t>(s.words.size());
    }
  }
  return report;
}

std::string StatsReport::to_json() const {
  ordered_json j;
  ordered_json sources = ordered_json::object();
  for (const auto& [name, row] : per_source) {
    sources[name] = {{"documents", row.documents},
                     {"sentences", row.sentences},
                     {"tokens", row.tokens}};
  }
  j["sources"] = sources;
  j["total"] = {{"documents", total.documents},
                {"sentences", total.sentences},
                {"tokens", total.tokens}};
  return j.dump(2);
}

void save_manifest(const CorpusManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  for (const auto& doc : manifest.documents) {
    ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["source"] = doc.source;
    ordered_json sents = ordered_json::array();
    for (const auto& s : doc.sentences) sents.push_back(s.text);
    j["sentences"] = sents;
    out << j.dump() << "\n";
  }
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + path);
  CorpusManifest manifest;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("bad JSON at " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    Document doc;
    doc.doc_id = j.at("doc_id").get<std::string>();
    doc.source = j.at("source").get<std::string>();
    for (const auto& s : j.at("sentences")) {
      doc.sentences.push_back(Sentence::from_text(s.get<std::string>()));
    }
    manifest.documents.push_back(std::move(doc));
  }
  manifest.recount();
  return manifest;
}

std::set<std::string> read_exclusion_ids(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read exclusion list: " + path);
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    std::string id = normalize_text(line);
    if (!id.empty()) ids.insert(id);
  }
  return ids;
}

}  // namespace bertkit
