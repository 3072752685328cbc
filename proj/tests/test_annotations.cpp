#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "bertkit/annotations.hpp"
#include "bertkit/errors.hpp"
#include "bertkit/rng.hpp"

using namespace bertkit;

namespace {

SpanNode node(const std::string& label, int start, int end, std::vector<SpanNode> children = {}) {
  return {label, start, end, std::move(children)};
}

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Random valid tree over `length` tokens: non-overlapping roots, nested
// children.
std::vector<SpanNode> random_tree(SplitMix64& rng, int length, int depth = 0) {
  std::vector<SpanNode> roots;
  int pos = 0;
  const char* labels[] = {"ARG", "PRED", "MOD-TEMP", "MOD-LOC", "TENSE"};
  while (pos < length) {
    int remaining = length - pos;
    int gap = static_cast<int>(rng.next_below(3));
    pos += gap;
    if (pos >= length) break;
    int span = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(std::min(remaining - gap, 6))));
    SpanNode n;
    n.label = labels[rng.next_below(5)];
    n.start = pos;
    n.end = pos + span;
    if (depth < 2 && span >= 2 && rng.next_coin()) {
      // one nested child strictly inside
      int cstart = n.start + static_cast<int>(rng.next_below(static_cast<uint64_t>(span)));
      int clen = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(n.end - cstart)));
      n.children.push_back(node(labels[rng.next_below(5)], cstart, cstart + clen));
    }
    roots.push_back(std::move(n));
    pos += span;
  }
  return roots;
}

bool bio_well_formed(const std::vector<std::string>& labels) {
  std::string prev = "O";
  for (const auto& l : labels) {
    if (l.size() > 2 && l[0] == 'I') {
      std::string type = l.substr(2);
      if (prev == "O") return false;
      if (prev.substr(2) != type) return false;
    }
    prev = l;
  }
  return true;
}

}  // namespace

TEST_CASE("flatten_highest_level keeps roots only") {
  // root ARG(0,4) with nested PRED(1,2): descendants ignored
  auto seq = flatten_highest_level({node("ARG", 0, 4, {node("PRED", 1, 2)})}, 4);
  CHECK(seq.labels == std::vector<std::string>({"B-ARG", "I-ARG", "I-ARG", "I-ARG"}));

  CHECK(flatten_highest_level({}, 3).labels == std::vector<std::string>({"O", "O", "O"}));

  auto adjacent = flatten_highest_level({node("PRED", 0, 1), node("ARG", 1, 3)}, 3);
  CHECK(adjacent.labels == std::vector<std::string>({"B-PRED", "B-ARG", "I-ARG"}));
}

TEST_CASE("flatten_highest_level keep predicate and child invariance") {
  auto keep_arg = [](const std::string& label) { return label == "ARG"; };
  auto seq = flatten_highest_level({node("PRED", 0, 1), node("ARG", 1, 3)}, 3, keep_arg);
  CHECK(seq.labels == std::vector<std::string>({"O", "B-ARG", "I-ARG"}));

  // deleting descendants does not change the output
  auto with_children = flatten_highest_level(
      {node("ARG", 0, 5, {node("PRED", 1, 2), node("ARG", 3, 5)})}, 5);
  auto without = flatten_highest_level({node("ARG", 0, 5)}, 5);
  CHECK(with_children.labels == without.labels);
}

TEST_CASE("flatten rejects invalid trees") {
  CHECK_THROWS_AS(flatten_highest_level({node("A", 0, 5)}, 4), DataError);
  CHECK_THROWS_AS(flatten_highest_level({node("A", 2, 2)}, 4), DataError);
  CHECK_THROWS_AS(flatten_highest_level({node("A", 0, 2), node("B", 1, 3)}, 4), DataError);
  // child outside parent
  CHECK_THROWS_AS(flatten_highest_level({node("A", 1, 3, {node("B", 0, 2)})}, 4), DataError);
}

TEST_CASE("flatten_modifiers collects at depth and resolves overlaps") {
  auto is_mod = [](const std::string& label) { return label.rfind("MOD", 0) == 0; };

  auto one = flatten_modifiers({node("ARG", 0, 5, {node("MOD-TEMP", 2, 4)})}, 5, is_mod);
  CHECK(one.sequence.labels ==
        std::vector<std::string>({"O", "O", "B-MOD-TEMP", "I-MOD-TEMP", "O"}));
  CHECK(one.conflicts == 0);

  auto none = flatten_modifiers({node("ARG", 0, 3)}, 3, is_mod);
  CHECK(none.sequence.labels == std::vector<std::string>({"O", "O", "O"}));

  // MOD-LOC(0,3) overlapping MOD-TEMP(2,4): earlier start wins, 1 conflict
  auto overlap =
      flatten_modifiers({node("MOD-LOC", 0, 3), node("MOD-TEMP", 2, 4)}, 5, is_mod);
  CHECK(overlap.sequence.labels ==
        std::vector<std::string>({"B-MOD-LOC", "I-MOD-LOC", "I-MOD-LOC", "O", "O"}));
  CHECK(overlap.conflicts == 1);

  // same start: the longer span wins
  auto nested = flatten_modifiers({node("MOD-TEMP", 0, 4, {node("MOD-LOC", 0, 3)})}, 5, is_mod);
  CHECK(nested.sequence.labels[0] == "B-MOD-TEMP");
  CHECK(nested.conflicts == 1);

  CHECK_THROWS_AS(flatten_modifiers({node("MOD-X", 0, 9)}, 5, is_mod), DataError);
}

TEST_CASE("flatten_str subset filter") {
  auto seq = flatten_str({node("TENSE-PAST", 1, 2)}, 3, {"TENSE-PAST"});
  CHECK(seq.labels == std::vector<std::string>({"O", "TENSE-PAST", "O"}));
  CHECK(seq.scheme == LabelScheme::Plain);

  CHECK(flatten_str({node("TENSE-PAST", 1, 2)}, 3, {}).labels ==
        std::vector<std::string>({"O", "O", "O"}));
  CHECK(flatten_str({node("GEO-REL", 0, 2)}, 3, {"TENSE-PAST"}).labels ==
        std::vector<std::string>({"O", "O", "O"}));
}

TEST_CASE("bio decode inverse of highest-level flattening") {
  SplitMix64 rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    int length = 3 + static_cast<int>(rng.next_below(10));
    auto roots = random_tree(rng, length);
    auto seq = flatten_highest_level(roots, length);
    auto decoded = decode_bio_strict(seq.labels);
    REQUIRE(decoded.size() == roots.size());
    for (size_t i = 0; i < roots.size(); ++i) {
      CHECK(decoded[i].label == roots[i].label);
      CHECK(decoded[i].start == roots[i].start);
      CHECK(decoded[i].end == roots[i].end);
    }
  }
}

TEST_CASE("flatten outputs are BIO well-formed over random trees") {
  SplitMix64 rng(405);
  auto is_mod = [](const std::string& label) { return label.rfind("MOD", 0) == 0; };
  for (int trial = 0; trial < 500; ++trial) {
    int length = 2 + static_cast<int>(rng.next_below(12));
    auto roots = random_tree(rng, length);
    auto high = flatten_highest_level(roots, length);
    CHECK(static_cast<int>(high.labels.size()) == length);
    CHECK(bio_well_formed(high.labels));
    auto mods = flatten_modifiers(roots, length, is_mod);
    CHECK(static_cast<int>(mods.sequence.labels.size()) == length);
    CHECK(bio_well_formed(mods.sequence.labels));
  }
}

TEST_CASE("conll io round trip") {
  std::vector<TokenLabelSequence> seqs = {
      {{"Jan", "ziet", "Amsterdam"}, {"B-PER", "O", "B-LOC"}, LabelScheme::BIO},
      {{"de", "man"}, {"O", "O"}, LabelScheme::BIO},
  };
  std::string path = temp_file("bertkit_conll_test.conll");
  write_conll(seqs, path);
  auto loaded = read_conll(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].words == seqs[0].words);
  CHECK(loaded[0].labels == seqs[0].labels);
  CHECK(loaded[1].words == seqs[1].words);

  // write∘read is identity on bytes (modulo trailing newline)
  std::string path2 = temp_file("bertkit_conll_test2.conll");
  write_conll(loaded, path2);
  std::ifstream a(path), b(path2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("conll parse errors and empty file") {
  std::string path = temp_file("bertkit_conll_bad.conll");
  {
    std::ofstream out(path);
    out << "Jan B-PER\nziet O extra\n";
  }
  try {
    read_conll(path);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  {
    std::ofstream out(path);
  }
  CHECK(read_conll(path).empty());
  std::remove(path.c_str());
}

TEST_CASE("span jsonl io") {
  std::vector<AnnotatedSentence> sentences = {
      {{"de", "man", "zwaait"},
       {node("ARG", 0, 2, {node("DET", 0, 1)}), node("PRED", 2, 3)}},
  };
  std::string path = temp_file("bertkit_spans.jsonl");
  write_span_jsonl(sentences, path);
  auto loaded = read_span_jsonl(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].words == sentences[0].words);
  REQUIRE(loaded[0].spans.size() == 2);
  CHECK(loaded[0].spans[0].children.size() == 1);
  CHECK(loaded[0].spans[0].children[0].label == "DET");
  std::remove(path.c_str());
}
