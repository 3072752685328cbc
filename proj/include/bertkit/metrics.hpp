#pragma once

#include <map>
#include <string>
#include <vector>

#include "bertkit/annotations.hpp"

namespace bertkit {

struct PrCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : 100.0 * tp / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : 100.0 * tp / (tp + fn); }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct SpanF1Report {
  PrCounts overall;
  std::map<std::string, PrCounts> per_type;

  double precision() const { return overall.precision(); }
  double recall() const { return overall.recall(); }
  double f1() const { return overall.f1(); }

  std::string to_text() const;
};

struct AccuracyReport {
  double accuracy = 0.0;        // percentage
  double macro_f1 = 0.0;        // percentage; only set by macro_f1()
  bool has_macro = false;
  bool o_included = true;       // whether "O" counted as a label in the macro mean
  std::map<std::string, int64_t> support;           // gold label counts
  std::map<std::string, PrCounts> per_label;        // set by macro_f1()

  std::string to_text() const;
};

// conlleval-compatible span decoding: a span matches only on exact
// boundaries and type. Lenient mode (the default, matching the CoNLL-2002
// script) lets an orphan I-X open a span; strict mode throws FormatError.
std::vector<LabeledSpan> decode_spans_conlleval(const std::vector<std::string>& labels,
                                                bool strict = false);

SpanF1Report span_f1(const std::vector<TokenLabelSequence>& gold,
                     const std::vector<TokenLabelSequence>& pred, bool strict = false);

AccuracyReport token_accuracy(const std::vector<TokenLabelSequence>& gold,
                              const std::vector<TokenLabelSequence>& pred);

// Token-level macro F1 over the labels occurring in gold; `include_o`
// controls whether "O" is one of them.
AccuracyReport macro_f1(const std::vector<TokenLabelSequence>& gold,
                        const std::vector<TokenLabelSequence>& pred, bool include_o = true);

struct TableRow {
  std::string model;
  std::string task;
  std::string split;
  std::string metric;
  double value = 0.0;
};

// Values rendered to one decimal, round-half-up; splits become columns in
// train/dev/test order.
std::string render_table(const std::vector<TableRow>& rows);

// "88.25" -> "88.3".
std::string format_metric(double value);

}  // namespace bertkit
