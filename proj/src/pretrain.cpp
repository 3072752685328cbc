#include "bertkit/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "bertkit/errors.hpp"

namespace bertkit {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void generate_sop_pairs(const CorpusManifest& manifest, const Vocabulary& vocab, uint64_t seed,
                        const std::function<void(SentencePair&&)>& sink) {
  for (const auto& doc : manifest.documents) {
    if (doc.sentences.size() < 2) continue;
    std::vector<TokenizedSentence> tokenized;
    tokenized.reserve(doc.sentences.size());
    for (const auto& s : doc.sentences) tokenized.push_back(tokenize_sentence(s, vocab));
    for (size_t i = 0; i + 1 < doc.sentences.size(); ++i) {
      SplitMix64 coin(stream_key(seed, doc.doc_id, i));
      SentencePair pair;
      pair.doc_id = doc.doc_id;
      pair.pair_index = i;
      pair.swapped = coin.next_coin();
      if (pair.swapped) {
        pair.first = tokenized[i + 1];
        pair.second = tokenized[i];
      } else {
        pair.first = tokenized[i];
        pair.second = tokenized[i + 1];
      }
      sink(std::move(pair));
    }
  }
}

std::vector<SentencePair> collect_sop_pairs(const CorpusManifest& manifest,
                                            const Vocabulary& vocab, uint64_t seed) {
  std::vector<SentencePair> pairs;
  generate_sop_pairs(manifest, vocab, seed,
                     [&](SentencePair&& pair) { pairs.push_back(std::move(pair)); });
  return pairs;
}

namespace {

void truncate_sentence(TokenizedSentence& sent, int target_pieces) {
  sent.pieces.resize(static_cast<size_t>(target_pieces));
  sent.ids.resize(static_cast<size_t>(target_pieces));
  while (!sent.word_boundaries.empty() && sent.word_boundaries.back().first >= target_pieces) {
    sent.word_boundaries.pop_back();
  }
  if (!sent.word_boundaries.empty() && sent.word_boundaries.back().second > target_pieces) {
    sent.word_boundaries.back().second = target_pieces;
  }
}

}  // namespace

void truncate_pair(SentencePair& pair, int max_seq_len) {
  if (max_seq_len < 8) throw ConfigError("max_seq_len must be at least 8");
  int budget = max_seq_len - 3;
  while (pair.first.piece_count() + pair.second.piece_count() > budget) {
    if (pair.first.piece_count() > pair.second.piece_count()) {
      truncate_sentence(pair.first, pair.first.piece_count() - 1);
    } else {
      truncate_sentence(pair.second, pair.second.piece_count() - 1);
    }
  }
}

std::vector<std::pair<int, int>> packed_word_ranges(const SentencePair& pair) {
  std::vector<std::pair<int, int>> ranges;
  int offset_a = 1;  // after [CLS]
  for (const auto& [start, end] : pair.first.word_boundaries) {
    ranges.emplace_back(offset_a + start, offset_a + end);
  }
  int offset_b = 2 + pair.first.piece_count();  // after [CLS] A [SEP]
  for (const auto& [start, end] : pair.second.word_boundaries) {
    ranges.emplace_back(offset_b + start, offset_b + end);
  }
  return ranges;
}

MaskedExample apply_whole_word_masking(const SentencePair& pair, const Vocabulary& vocab,
                                       SplitMix64& rng, int max_seq_len, double mask_rate,
                                       MaskingStats* stats) {
  int len_a = pair.first.piece_count();
  int len_b = pair.second.piece_count();
  int content = len_a + len_b;
  if (content + 3 > max_seq_len) {
    throw DataError("pair " + pair.doc_id + "#" + std::to_string(pair.pair_index) +
                    " does not fit max_seq_len " + std::to_string(max_seq_len));
  }
  if (content == 0) {
    throw DataError("pair " + pair.doc_id + "#" + std::to_string(pair.pair_index) +
                    " has no maskable tokens");
  }

  MaskedExample ex;
  ex.sop_label = pair.swapped ? 1 : 0;
  ex.input_ids.assign(static_cast<size_t>(max_seq_len), Vocabulary::kPad);
  ex.segment_ids.assign(static_cast<size_t>(max_seq_len), 0);
  ex.attention_mask.assign(static_cast<size_t>(max_seq_len), 0);

  int t = 0;
  ex.input_ids[static_cast<size_t>(t++)] = Vocabulary::kCls;
  for (int id : pair.first.ids) ex.input_ids[static_cast<size_t>(t++)] = id;
  ex.input_ids[static_cast<size_t>(t++)] = Vocabulary::kSep;
  int seg1_end = t;  // segment 0 covers [CLS] A [SEP]
  for (int id : pair.second.ids) ex.input_ids[static_cast<size_t>(t++)] = id;
  ex.input_ids[static_cast<size_t>(t++)] = Vocabulary::kSep;
  for (int i = 0; i < t; ++i) {
    ex.segment_ids[static_cast<size_t>(i)] = i < seg1_end ? 0 : 1;
    ex.attention_mask[static_cast<size_t>(i)] = 1;
  }

  // Budget: round half up with a floor of one masked piece.
  int budget = std::max<int>(1, static_cast<int>(std::floor(mask_rate * content + 0.5)));

  auto ranges = packed_word_ranges(pair);
  std::vector<size_t> order(ranges.size());
  std::iota(order.begin(), order.end(), size_t{0});
  rng.shuffle(order);

  std::vector<size_t> selected;
  int taken = 0;
  for (size_t w : order) {
    int pieces = ranges[w].second - ranges[w].first;
    if (taken + pieces <= budget) {
      selected.push_back(w);
      taken += pieces;
      if (taken == budget) break;
    }
  }
  if (selected.empty()) selected.push_back(order.front());

  // Ascending word order for the action draws and the emitted positions.
  std::sort(selected.begin(), selected.end());
  for (size_t w : selected) {
    double action = rng.next_double();
    if (stats) {
      if (action < 0.8)
        stats->words_masked += 1;
      else if (action < 0.9)
        stats->words_random += 1;
      else
        stats->words_kept += 1;
    }
    for (int pos = ranges[w].first; pos < ranges[w].second; ++pos) {
      int original = ex.input_ids[static_cast<size_t>(pos)];
      ex.mlm_positions.push_back(pos);
      ex.mlm_labels.push_back(original);
      if (action < 0.8) {
        ex.input_ids[static_cast<size_t>(pos)] = Vocabulary::kMask;
      } else if (action < 0.9) {
        ex.input_ids[static_cast<size_t>(pos)] =
            Vocabulary::kNumSpecials +
            static_cast<int>(rng.next_below(
                static_cast<uint64_t>(vocab.size() - Vocabulary::kNumSpecials)));
      }
      // else: left as-is
    }
  }
  return ex;
}

std::string MaskedExample::to_jsonl() const {
  ordered_json j;
  j["input_ids"] = input_ids;
  j["segment_ids"] = segment_ids;
  j["attention_mask"] = attention_mask;
  j["mlm_positions"] = mlm_positions;
  j["mlm_labels"] = mlm_labels;
  j["sop_label"] = sop_label;
  j["seed_trace"] = ordered_json{{"shard", shard}, {"index", index}};
  return j.dump();
}

MaskedExample MaskedExample::from_jsonl(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad shard line: ") + e.what());
  }
  MaskedExample ex;
  ex.input_ids = j.at("input_ids").get<std::vector<int>>();
  ex.segment_ids = j.at("segment_ids").get<std::vector<int>>();
  ex.attention_mask = j.at("attention_mask").get<std::vector<int>>();
  ex.mlm_positions = j.at("mlm_positions").get<std::vector<int>>();
  ex.mlm_labels = j.at("mlm_labels").get<std::vector<int>>();
  ex.sop_label = j.at("sop_label").get<int>();
  ex.shard = j.at("seed_trace").at("shard").get<int64_t>();
  ex.index = j.at("seed_trace").at("index").get<int64_t>();
  return ex;
}

void ShardManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write shard manifest: " + path);
  ordered_json j;
  j["num_examples"] = num_examples;
  j["num_pairs"] = num_pairs;
  j["shard_size"] = shard_size;
  j["max_seq_len"] = max_seq_len;
  j["mask_rate"] = mask_rate;
  j["seed"] = seed;
  j["rng"] = rng_id;
  j["vocab_size"] = vocab_size;
  j["shards"] = shard_files;
  out << j.dump(2) << "\n";
}

ShardManifest ShardManifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read shard manifest: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad shard manifest " + path + ": " + e.what());
  }
  ShardManifest m;
  m.num_examples = j.at("num_examples").get<int64_t>();
  m.num_pairs = j.at("num_pairs").get<int64_t>();
  m.shard_size = j.at("shard_size").get<int>();
  m.max_seq_len = j.at("max_seq_len").get<int>();
  m.mask_rate = j.at("mask_rate").get<double>();
  m.seed = j.at("seed").get<uint64_t>();
  m.rng_id = j.at("rng").get<std::string>();
  m.vocab_size = j.at("vocab_size").get<int>();
  m.shard_files = j.at("shards").get<std::vector<std::string>>();
  return m;
}

ShardManifest pack_and_shard(const std::vector<SentencePair>& pairs, const Vocabulary& vocab,
                             int max_seq_len, int shard_size, uint64_t seed,
                             const std::string& out_dir) {
  if (max_seq_len < 8) throw ConfigError("max_seq_len must be at least 8");
  if (shard_size <= 0) throw ConfigError("shard_size must be positive");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create shard directory: " + out_dir);

  ShardManifest manifest;
  manifest.num_pairs = static_cast<int64_t>(pairs.size());
  manifest.shard_size = shard_size;
  manifest.max_seq_len = max_seq_len;
  manifest.seed = seed;
  manifest.rng_id = kRngId;
  manifest.vocab_size = vocab.size();

  std::ofstream shard_out;
  int64_t shard_idx = -1;
  int64_t in_shard = 0;
  for (const auto& source_pair : pairs) {
    if (shard_idx < 0 || in_shard == shard_size) {
      shard_idx += 1;
      in_shard = 0;
      char name[32];
      std::snprintf(name, sizeof(name), "shard-%05lld.jsonl", static_cast<long long>(shard_idx));
      manifest.shard_files.emplace_back(name);
      shard_out.close();
      shard_out.open(fs::path(out_dir) / name, std::ios::binary);
      if (!shard_out) throw IoError("cannot write shard file in " + out_dir);
    }
    SentencePair pair = source_pair;
    truncate_pair(pair, max_seq_len);
    SplitMix64 rng(stream_key(seed, pair.doc_id, pair.pair_index));
    MaskedExample ex = apply_whole_word_masking(pair, vocab, rng, max_seq_len);
    ex.shard = shard_idx;
    ex.index = in_shard;
    shard_out << ex.to_jsonl() << "\n";
    in_shard += 1;
    manifest.num_examples += 1;
  }
  shard_out.close();
  manifest.save((fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

std::vector<MaskedExample> load_shards(const std::string& manifest_path) {
  ShardManifest manifest = ShardManifest::load(manifest_path);
  fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<MaskedExample> examples;
  examples.reserve(static_cast<size_t>(manifest.num_examples));
  for (const auto& name : manifest.shard_files) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw IoError("cannot read shard: " + (dir / name).string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      examples.push_back(MaskedExample::from_jsonl(line));
    }
  }
  if (static_cast<int64_t>(examples.size()) != manifest.num_examples) {
    throw DataError("shard set holds " + std::to_string(examples.size()) +
                    " examples, manifest says " + std::to_string(manifest.num_examples));
  }
  return examples;
}

}  // namespace bertkit
