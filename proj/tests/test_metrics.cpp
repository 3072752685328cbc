#include <map>
#include <set>

#include "doctest.h"

#include "bertkit/errors.hpp"
#include "bertkit/metrics.hpp"
#include "bertkit/rng.hpp"

using namespace bertkit;

namespace {

TokenLabelSequence seq(std::vector<std::string> labels) {
  TokenLabelSequence s;
  s.labels = std::move(labels);
  s.words.assign(s.labels.size(), "w");
  return s;
}

// Span-enumeration oracle written as a straight state machine over
// conlleval's start rule, independent of the production decoder.
std::multiset<std::tuple<int, int, std::string>> oracle_spans(
    const std::vector<std::string>& labels) {
  std::multiset<std::tuple<int, int, std::string>> spans;
  int start = -1;
  std::string type;
  for (int t = 0; t <= static_cast<int>(labels.size()); ++t) {
    std::string label = t < static_cast<int>(labels.size()) ? labels[static_cast<size_t>(t)] : "O";
    bool inside = start >= 0;
    bool continues = inside && label.size() > 2 && label[0] == 'I' && label.substr(2) == type;
    if (inside && !continues) {
      spans.insert({start, t, type});
      start = -1;
    }
    if (label != "O" && !continues) {
      start = t;
      type = label.substr(2);
    }
  }
  return spans;
}

PrCounts oracle_counts(const std::vector<TokenLabelSequence>& gold,
                       const std::vector<TokenLabelSequence>& pred) {
  PrCounts counts;
  for (size_t i = 0; i < gold.size(); ++i) {
    auto g = oracle_spans(gold[i].labels);
    auto p = oracle_spans(pred[i].labels);
    for (const auto& span : p) {
      auto it = g.find(span);
      if (it != g.end()) {
        counts.tp += 1;
        g.erase(it);
      } else {
        counts.fp += 1;
      }
    }
    counts.fn += static_cast<int64_t>(g.size());
  }
  return counts;
}

std::vector<std::string> random_bio(SplitMix64& rng, int length) {
  const char* tags[] = {"O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"};
  std::vector<std::string> labels;
  for (int t = 0; t < length; ++t) labels.push_back(tags[rng.next_below(7)]);
  return labels;
}

}  // namespace

TEST_CASE("span_f1 basics") {
  auto perfect = span_f1({seq({"B-PER", "I-PER", "O"})}, {seq({"B-PER", "I-PER", "O"})});
  CHECK(perfect.precision() == 100.0);
  CHECK(perfect.recall() == 100.0);
  CHECK(perfect.f1() == 100.0);

  // boundary mismatch is a full miss
  auto miss = span_f1({seq({"B-PER", "I-PER", "O"})}, {seq({"B-PER", "O", "O"})});
  CHECK(miss.overall.tp == 0);
  CHECK(miss.overall.fp == 1);
  CHECK(miss.overall.fn == 1);
  CHECK(miss.f1() == 0.0);

  auto half = span_f1({seq({"B-PER", "O", "B-LOC"})}, {seq({"B-PER", "O", "B-ORG"})});
  CHECK(half.overall.tp == 1);
  CHECK(half.overall.fp == 1);
  CHECK(half.overall.fn == 1);
  CHECK(half.precision() == 50.0);
  CHECK(half.recall() == 50.0);
  CHECK(half.f1() == 50.0);
}

TEST_CASE("span_f1 conlleval leniency and strict mode") {
  // orphan I-X opens a span in lenient mode
  auto lenient = span_f1({seq({"O", "I-PER", "I-PER"})}, {seq({"O", "B-PER", "I-PER"})});
  CHECK(lenient.overall.tp == 1);

  CHECK_THROWS_AS(span_f1({seq({"O", "I-PER"})}, {seq({"O", "I-PER"})}, true), FormatError);
  CHECK_THROWS_AS(span_f1({seq({"B-PER"})}, {seq({"X-PER"})}), FormatError);
}

TEST_CASE("span_f1 alignment errors") {
  CHECK_THROWS_AS(span_f1({seq({"O"})}, {}), DataError);
  CHECK_THROWS_AS(span_f1({seq({"O", "O"})}, {seq({"O"})}), DataError);
}

TEST_CASE("span_f1 agrees with the enumeration oracle on random pairs") {
  SplitMix64 rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    int length = 1 + static_cast<int>(rng.next_below(14));
    auto gold = seq(random_bio(rng, length));
    auto pred = seq(random_bio(rng, length));
    auto report = span_f1({gold}, {pred});
    auto expected = oracle_counts({gold}, {pred});
    CHECK(report.overall.tp == expected.tp);
    CHECK(report.overall.fp == expected.fp);
    CHECK(report.overall.fn == expected.fn);
  }
}

TEST_CASE("swapping gold and pred swaps precision and recall") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = seq(random_bio(rng, 12));
    auto b = seq(random_bio(rng, 12));
    auto ab = span_f1({a}, {b});
    auto ba = span_f1({b}, {a});
    CHECK(ab.precision() == doctest::Approx(ba.recall()));
    CHECK(ab.recall() == doctest::Approx(ba.precision()));
    CHECK(ab.f1() == doctest::Approx(ba.f1()));
  }
}

TEST_CASE("micro counts add over sentences") {
  SplitMix64 rng(7);
  std::vector<TokenLabelSequence> gold, pred;
  PrCounts sum;
  for (int i = 0; i < 20; ++i) {
    auto g = seq(random_bio(rng, 9));
    auto p = seq(random_bio(rng, 9));
    auto single = span_f1({g}, {p});
    sum.tp += single.overall.tp;
    sum.fp += single.overall.fp;
    sum.fn += single.overall.fn;
    gold.push_back(g);
    pred.push_back(p);
  }
  auto whole = span_f1(gold, pred);
  CHECK(whole.overall.tp == sum.tp);
  CHECK(whole.overall.fp == sum.fp);
  CHECK(whole.overall.fn == sum.fn);
}

TEST_CASE("token_accuracy") {
  CHECK(token_accuracy({seq({"A", "B"})}, {seq({"A", "B"})}).accuracy == 100.0);
  CHECK(token_accuracy({seq({"A", "B"})}, {seq({"B", "A"})}).accuracy == 0.0);
  CHECK(token_accuracy({seq({"A", "A", "A", "A"})}, {seq({"A", "A", "A", "B"})}).accuracy == 75.0);
}

TEST_CASE("macro_f1") {
  auto perfect = macro_f1({seq({"A", "B"})}, {seq({"A", "B"})});
  CHECK(perfect.macro_f1 == 100.0);

  auto zero = macro_f1({seq({"A", "A"})}, {seq({"B", "B"})});
  CHECK(zero.macro_f1 == 0.0);

  // gold [A,A,B,B], pred [A,B,B,B]: F1(A)=2/3, F1(B)=4/5 -> 73.33
  auto mixed = macro_f1({seq({"A", "A", "B", "B"})}, {seq({"A", "B", "B", "B"})});
  CHECK(mixed.macro_f1 == doctest::Approx(100.0 * (2.0 / 3.0 + 4.0 / 5.0) / 2.0).epsilon(1e-9));

  // single gold label: macro equals that label's f1
  auto single = macro_f1({seq({"A", "A"})}, {seq({"A", "B"})});
  CHECK(single.macro_f1 == doctest::Approx(single.per_label.at("A").f1()));

  // predicted-only labels contribute fp but not to the mean
  CHECK(single.per_label.at("B").fp == 1);

  // O included by default, excluded behind the flag
  auto with_o = macro_f1({seq({"O", "A"})}, {seq({"O", "A"})});
  auto without_o = macro_f1({seq({"O", "A"})}, {seq({"O", "A"})}, false);
  CHECK(with_o.o_included);
  CHECK_FALSE(without_o.o_included);
}

TEST_CASE("format_metric rounds half up to one decimal") {
  CHECK(format_metric(88.25) == "88.3");
  CHECK(format_metric(88.24) == "88.2");
  CHECK(format_metric(100.0) == "100.0");
  CHECK(format_metric(0.0) == "0.0");
  CHECK(format_metric(99.95) == "100.0");
}

TEST_CASE("render_table layout") {
  std::vector<TableRow> rows = {
      {"base", "ner", "train", "f1", 95.4},  {"base", "ner", "dev", "f1", 81.3},
      {"base", "ner", "test", "f1", 80.7},   {"ours", "ner", "train", "f1", 98.0},
      {"ours", "ner", "dev", "f1", 87.84},   {"ours", "ner", "test", "f1", 88.25},
  };
  std::string table = render_table(rows);
  CHECK(table.find("train") < table.find("dev"));
  CHECK(table.find("dev") < table.find("test"));
  CHECK(table.find("88.3") != std::string::npos);  // round half up
  CHECK(table.find("87.8") != std::string::npos);

  std::string empty = render_table({});
  CHECK(empty.find("model") != std::string::npos);
  CHECK(empty.find('\n') != std::string::npos);
}
