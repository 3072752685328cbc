#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bertkit/corpus.hpp"
#include "bertkit/rng.hpp"
#include "bertkit/vocab.hpp"

namespace bertkit {

// One adjacent-sentence pair. `swapped` means `first` follows `second` in
// the source document.
struct SentencePair {
  std::string doc_id;
  uint64_t pair_index = 0;
  TokenizedSentence first;
  TokenizedSentence second;
  bool swapped = false;
};

// Enumerates every adjacent sentence pair of every document; the swap coin
// comes from the stream keyed by (seed, doc_id, pair_index). Pairs never
// cross document boundaries.
void generate_sop_pairs(const CorpusManifest& manifest, const Vocabulary& vocab, uint64_t seed,
                        const std::function<void(SentencePair&&)>& sink);

std::vector<SentencePair> collect_sop_pairs(const CorpusManifest& manifest,
                                            const Vocabulary& vocab, uint64_t seed);

struct MaskedExample {
  std::vector<int> input_ids;
  std::vector<int> segment_ids;
  std::vector<int> attention_mask;
  std::vector<int> mlm_positions;
  std::vector<int> mlm_labels;
  int sop_label = 0;  // 0 = in order, 1 = swapped
  int64_t shard = -1;
  int64_t index = -1;

  std::string to_jsonl() const;
  static MaskedExample from_jsonl(const std::string& line);
};

// Drops trailing pieces from the longer sentence (ties go to the second)
// until the pair fits max_seq_len - 3. Word boundaries are clipped.
void truncate_pair(SentencePair& pair, int max_seq_len);

// Packed word ranges of a (truncated) pair in [CLS] A [SEP] B [SEP] layout.
std::vector<std::pair<int, int>> packed_word_ranges(const SentencePair& pair);

struct MaskingStats {
  int64_t words_masked = 0;
  int64_t words_random = 0;
  int64_t words_kept = 0;
};

// Whole-word masking over a pair that already fits max_seq_len. The piece
// budget is max(1, round-half-up(mask_rate * non-special tokens)); words
// are visited in rng-shuffled order and taken whole while they fit; when
// nothing fits the first visited word is taken (the only overshoot case).
// Per selected word one action: 0.8 mask, 0.1 random non-special ids, 0.1
// keep. `stats` (optional) accumulates the per-word action counts.
MaskedExample apply_whole_word_masking(const SentencePair& pair, const Vocabulary& vocab,
                                       SplitMix64& rng, int max_seq_len, double mask_rate = 0.15,
                                       MaskingStats* stats = nullptr);

struct ShardManifest {
  int64_t num_examples = 0;
  int64_t num_pairs = 0;
  int shard_size = 0;
  int max_seq_len = 0;
  double mask_rate = 0.15;
  uint64_t seed = 0;
  std::string rng_id;  // kRngId
  int vocab_size = 0;
  std::vector<std::string> shard_files;

  void save(const std::string& path) const;
  static ShardManifest load(const std::string& path);
};

// Truncates, masks and pads every pair, writing JSON-lines shards of
// shard_size examples plus manifest.json into out_dir. The masking stream
// for a pair is keyed by (seed, doc_id, pair_index), so output is
// independent of scheduling.
ShardManifest pack_and_shard(const std::vector<SentencePair>& pairs, const Vocabulary& vocab,
                             int max_seq_len, int shard_size, uint64_t seed,
                             const std::string& out_dir);

std::vector<MaskedExample> load_shards(const std::string& manifest_path);

}  // namespace bertkit
