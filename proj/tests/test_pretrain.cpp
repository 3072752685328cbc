#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"

#include "bertkit/errors.hpp"
#include "bertkit/pretrain.hpp"
#include "bertkit/synthetic.hpp"
#include "bertkit/vocab.hpp"

using namespace bertkit;
namespace fs = std::filesystem;

namespace {

CorpusManifest tiny_corpus() {
  CorpusManifest m;
  Document doc;
  doc.doc_id = "doc-a";
  doc.source = "test";
  doc.sentences = {Sentence::from_text("de man ziet het boek."),
                   Sentence::from_text("de vrouw hoort de kat."),
                   Sentence::from_text("het kind zoekt de hond.")};
  m.documents.push_back(doc);
  Document single;
  single.doc_id = "doc-b";
  single.source = "test";
  single.sentences = {Sentence::from_text("een losse zin.")};
  m.documents.push_back(single);
  m.recount();
  return m;
}

Vocabulary tiny_vocab() {
  CorpusManifest m = tiny_corpus();
  return induce_vocabulary(m, 80);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generate_sop_pairs enumerates adjacent pairs per document") {
  auto vocab = tiny_vocab();
  auto pairs = collect_sop_pairs(tiny_corpus(), vocab, 11);
  // 3-sentence document -> 2 pairs; single-sentence document -> none
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].doc_id == "doc-a");
  CHECK(pairs[0].pair_index == 0);
  CHECK(pairs[1].pair_index == 1);

  auto again = collect_sop_pairs(tiny_corpus(), vocab, 11);
  for (size_t i = 0; i < pairs.size(); ++i) CHECK(pairs[i].swapped == again[i].swapped);
}

TEST_CASE("sop swap fraction is a fair coin") {
  SynthConfig config;
  config.num_docs = 1500;
  config.seed = 5;
  auto corpus = synth_corpus(config);
  auto vocab = induce_vocabulary(corpus, 300);
  auto pairs = collect_sop_pairs(corpus, vocab, 123);
  REQUIRE(pairs.size() >= 5000);
  int64_t swapped = 0;
  for (const auto& p : pairs) swapped += p.swapped ? 1 : 0;
  double fraction = static_cast<double>(swapped) / static_cast<double>(pairs.size());
  CHECK(fraction > 0.48);
  CHECK(fraction < 0.52);
}

TEST_CASE("truncate_pair drops from the longer sentence, ties to the second") {
  auto vocab = tiny_vocab();
  auto pairs = collect_sop_pairs(tiny_corpus(), vocab, 1);
  auto pair = pairs[0];

  int total = pair.first.piece_count() + pair.second.piece_count();
  SentencePair same = pair;
  truncate_pair(same, total + 3);  // exactly fits: no change
  CHECK(same.first.piece_count() == pair.first.piece_count());
  CHECK(same.second.piece_count() == pair.second.piece_count());

  // force the second sentence longer, exceed by 2: second loses both
  SentencePair longer = pair;
  while (longer.second.piece_count() <= longer.first.piece_count()) {
    longer.second.pieces.push_back(longer.second.pieces.back());
    longer.second.ids.push_back(longer.second.ids.back());
    auto last = longer.second.word_boundaries.back();
    longer.second.word_boundaries.push_back({last.second, last.second + 1});
  }
  int a = longer.first.piece_count(), b = longer.second.piece_count();
  truncate_pair(longer, a + b + 3 - 2);
  CHECK(longer.first.piece_count() == a);
  CHECK(longer.second.piece_count() == b - 2);

  // word boundaries stay a partition after truncation
  int covered = 0;
  for (auto [s, e] : longer.second.word_boundaries) {
    CHECK(s == covered);
    covered = e;
  }
  CHECK(covered == longer.second.piece_count());
}

TEST_CASE("masked example layout invariants") {
  auto vocab = tiny_vocab();
  auto pairs = collect_sop_pairs(tiny_corpus(), vocab, 3);
  for (const auto& pair : pairs) {
    SplitMix64 rng(42);
    auto ex = apply_whole_word_masking(pair, vocab, rng, 48);
    REQUIRE(ex.input_ids.size() == 48);
    int len_a = pair.first.piece_count(), len_b = pair.second.piece_count();
    int content = len_a + len_b + 3;
    CHECK(ex.input_ids[0] == Vocabulary::kCls);
    CHECK(ex.input_ids[static_cast<size_t>(len_a + 1)] == Vocabulary::kSep);
    CHECK(ex.input_ids[static_cast<size_t>(content - 1)] == Vocabulary::kSep);
    for (int t = 0; t < 48; ++t) {
      CHECK(ex.attention_mask[static_cast<size_t>(t)] == (t < content ? 1 : 0));
      int expected_seg = t < content ? (t < len_a + 2 ? 0 : 1) : 0;
      CHECK(ex.segment_ids[static_cast<size_t>(t)] == expected_seg);
    }
    // masked positions stay off specials, labels record originals
    auto ranges = packed_word_ranges(pair);
    std::set<int> in_words;
    for (auto [s, e] : ranges)
      for (int p = s; p < e; ++p) in_words.insert(p);
    for (size_t j = 0; j < ex.mlm_positions.size(); ++j) {
      CHECK(in_words.count(ex.mlm_positions[j]) == 1);
      CHECK(ex.mlm_labels[j] >= Vocabulary::kNumSpecials);
    }
  }
}

TEST_CASE("whole-word masking budget and whole-word property") {
  auto vocab = tiny_vocab();
  auto pairs = collect_sop_pairs(tiny_corpus(), vocab, 3);
  const auto& pair = pairs[0];
  auto ranges = packed_word_ranges(pair);
  int content = pair.first.piece_count() + pair.second.piece_count();
  int budget = std::max(1, static_cast<int>(std::floor(0.15 * content + 0.5)));
  int longest = 0;
  for (auto [s, e] : ranges) longest = std::max(longest, e - s);

  for (uint64_t seed = 0; seed < 50; ++seed) {
    SplitMix64 rng(seed);
    auto ex = apply_whole_word_masking(pair, vocab, rng, 64);
    int selected = static_cast<int>(ex.mlm_positions.size());
    CHECK(selected >= 1);
    CHECK(selected <= std::max(budget, longest));
    // every selected word is fully selected
    std::set<int> positions(ex.mlm_positions.begin(), ex.mlm_positions.end());
    for (auto [s, e] : ranges) {
      bool any = false, all = true;
      for (int p = s; p < e; ++p) {
        if (positions.count(p))
          any = true;
        else
          all = false;
      }
      CHECK((!any || all));
    }
  }
}

TEST_CASE("masking action frequencies over many words") {
  SynthConfig config;
  config.num_docs = 800;
  config.seed = 9;
  auto corpus = synth_corpus(config);
  auto vocab = induce_vocabulary(corpus, 300);
  auto pairs = collect_sop_pairs(corpus, vocab, 17);

  int64_t masked_pieces = 0, random_pieces = 0, kept_pieces = 0;
  for (const auto& source : pairs) {
    SentencePair pair = source;
    truncate_pair(pair, 64);
    SplitMix64 rng(stream_key(99, pair.doc_id, pair.pair_index));
    auto ex = apply_whole_word_masking(pair, vocab, rng, 64);
    for (size_t j = 0; j < ex.mlm_positions.size(); ++j) {
      int now = ex.input_ids[static_cast<size_t>(ex.mlm_positions[j])];
      if (now == Vocabulary::kMask)
        masked_pieces += 1;
      else if (now == ex.mlm_labels[j])
        kept_pieces += 1;
      else
        random_pieces += 1;
    }
  }
  double total = static_cast<double>(masked_pieces + random_pieces + kept_pieces);
  REQUIRE(total > 10000);
  CHECK(masked_pieces / total == doctest::Approx(0.8).epsilon(0.05));
  CHECK(random_pieces / total == doctest::Approx(0.1).epsilon(0.25));
  CHECK(kept_pieces / total == doctest::Approx(0.1).epsilon(0.25));
}

TEST_CASE("masking requires a fitting, non-empty pair") {
  auto vocab = tiny_vocab();
  auto pairs = collect_sop_pairs(tiny_corpus(), vocab, 3);
  SplitMix64 rng(1);
  CHECK_THROWS_AS(apply_whole_word_masking(pairs[0], vocab, rng, 8), DataError);

  SentencePair empty;
  empty.doc_id = "x";
  CHECK_THROWS_AS(apply_whole_word_masking(empty, vocab, rng, 16), DataError);
}

TEST_CASE("pack_and_shard writes chunked shards and a manifest") {
  SynthConfig config;
  config.num_docs = 8;
  config.seed = 2;
  auto corpus = synth_corpus(config);
  auto vocab = induce_vocabulary(corpus, 300);
  auto pairs = collect_sop_pairs(corpus, vocab, 5);
  REQUIRE(pairs.size() >= 25);
  pairs.resize(25);

  fs::path dir = fs::temp_directory_path() / "bertkit_shards_test";
  fs::remove_all(dir);
  auto manifest = pack_and_shard(pairs, vocab, 64, 10, 7, dir.string());
  CHECK(manifest.num_examples == 25);
  REQUIRE(manifest.shard_files.size() == 3);
  CHECK(manifest.rng_id == kRngId);

  auto count_lines = [&](const std::string& name) {
    std::ifstream in(dir / name);
    int n = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++n;
    return n;
  };
  CHECK(count_lines(manifest.shard_files[0]) == 10);
  CHECK(count_lines(manifest.shard_files[1]) == 10);
  CHECK(count_lines(manifest.shard_files[2]) == 5);

  auto examples = load_shards((dir / "manifest.json").string());
  CHECK(examples.size() == 25);
  CHECK(examples[12].shard == 1);
  CHECK(examples[12].index == 2);

  fs::remove_all(dir);
}

TEST_CASE("shards are byte-identical across reruns") {
  SynthConfig config;
  config.num_docs = 6;
  config.seed = 3;
  auto corpus = synth_corpus(config);
  auto vocab = induce_vocabulary(corpus, 300);
  auto pairs = collect_sop_pairs(corpus, vocab, 21);

  fs::path dir1 = fs::temp_directory_path() / "bertkit_shards_a";
  fs::path dir2 = fs::temp_directory_path() / "bertkit_shards_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  auto m1 = pack_and_shard(pairs, vocab, 48, 16, 13, dir1.string());
  auto m2 = pack_and_shard(pairs, vocab, 48, 16, 13, dir2.string());
  REQUIRE(m1.shard_files == m2.shard_files);
  for (const auto& name : m1.shard_files) {
    CHECK(read_file(dir1 / name) == read_file(dir2 / name));
  }
  CHECK(read_file(dir1 / "manifest.json") == read_file(dir2 / "manifest.json"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("masked example jsonl round trip") {
  auto vocab = tiny_vocab();
  auto pairs = collect_sop_pairs(tiny_corpus(), vocab, 3);
  SplitMix64 rng(8);
  auto ex = apply_whole_word_masking(pairs[0], vocab, rng, 32);
  ex.shard = 4;
  ex.index = 17;
  auto back = MaskedExample::from_jsonl(ex.to_jsonl());
  CHECK(back.input_ids == ex.input_ids);
  CHECK(back.mlm_positions == ex.mlm_positions);
  CHECK(back.mlm_labels == ex.mlm_labels);
  CHECK(back.sop_label == ex.sop_label);
  CHECK(back.shard == 4);
  CHECK(back.index == 17);
}

TEST_CASE("reconstruction: labels restore the original packed pair") {
  SynthConfig config;
  config.num_docs = 10;
  config.seed = 4;
  auto corpus = synth_corpus(config);
  auto vocab = induce_vocabulary(corpus, 300);
  auto pairs = collect_sop_pairs(corpus, vocab, 31);
  for (const auto& pair : pairs) {
    if (pair.first.piece_count() + pair.second.piece_count() + 3 > 64) continue;
    SplitMix64 rng(stream_key(5, pair.doc_id, pair.pair_index));
    auto ex = apply_whole_word_masking(pair, vocab, rng, 64);
    auto restored = ex.input_ids;
    for (size_t j = 0; j < ex.mlm_positions.size(); ++j) {
      restored[static_cast<size_t>(ex.mlm_positions[j])] = ex.mlm_labels[j];
    }
    std::vector<int> expected;
    expected.push_back(Vocabulary::kCls);
    for (int id : pair.first.ids) expected.push_back(id);
    expected.push_back(Vocabulary::kSep);
    for (int id : pair.second.ids) expected.push_back(id);
    expected.push_back(Vocabulary::kSep);
    for (size_t t = 0; t < expected.size(); ++t) {
      CHECK(restored[t] == expected[t]);
    }
  }
}
