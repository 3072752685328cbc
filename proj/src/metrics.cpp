#include "bertkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bertkit/errors.hpp"

namespace bertkit {

namespace {

struct Tag {
  char prefix = 'O';  // 'B', 'I' or 'O'
  std::string type;
};

Tag parse_tag(const std::string& label) {
  if (label == "O") return {};
  if (label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-') {
    return {label[0], label.substr(2)};
  }
  throw FormatError("not a BIO label: " + label);
}

void check_alignment(const std::vector<TokenLabelSequence>& gold,
                     const std::vector<TokenLabelSequence>& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("gold has " + std::to_string(gold.size()) + " sentences, pred has " +
                    std::to_string(pred.size()));
  }
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].labels.size() != pred[i].labels.size()) {
      throw DataError("sentence " + std::to_string(i) + ": gold has " +
                      std::to_string(gold[i].labels.size()) + " tokens, pred has " +
                      std::to_string(pred[i].labels.size()));
    }
  }
}

}  // namespace

std::vector<LabeledSpan> decode_spans_conlleval(const std::vector<std::string>& labels,
                                                bool strict) {
  std::vector<LabeledSpan> spans;
  Tag prev;
  int open_start = -1;
  for (size_t t = 0; t < labels.size(); ++t) {
    Tag tag = parse_tag(labels[t]);
    bool starts = false;
    if (tag.prefix == 'B') {
      starts = true;
    } else if (tag.prefix == 'I') {
      // conlleval: I-X continues a span of the same type; otherwise it
      // opens a new one (lenient) or is malformed (strict).
      if (prev.prefix == 'O' || prev.type != tag.type) {
        if (strict) throw FormatError("orphan " + labels[t] + " at token " + std::to_string(t));
        starts = true;
      }
    }
    bool ends_open = open_start >= 0 && (tag.prefix == 'O' || starts);
    if (ends_open) {
      spans.push_back({prev.type, open_start, static_cast<int>(t)});
      open_start = -1;
    }
    if (starts) open_start = static_cast<int>(t);
    prev = tag;
  }
  if (open_start >= 0) spans.push_back({prev.type, open_start, static_cast<int>(labels.size())});
  return spans;
}

SpanF1Report span_f1(const std::vector<TokenLabelSequence>& gold,
                     const std::vector<TokenLabelSequence>& pred, bool strict) {
  check_alignment(gold, pred);
  SpanF1Report report;
  for (size_t i = 0; i < gold.size(); ++i) {
    auto gold_spans = decode_spans_conlleval(gold[i].labels, strict);
    auto pred_spans = decode_spans_conlleval(pred[i].labels, strict);
    std::set<LabeledSpan> gold_set(gold_spans.begin(), gold_spans.end());
    for (const auto& span : pred_spans) {
      if (gold_set.count(span)) {
        report.overall.tp += 1;
        report.per_type[span.label].tp += 1;
      } else {
        report.overall.fp += 1;
        report.per_type[span.label].fp += 1;
      }
    }
    for (const auto& span : gold_spans) {
      std::vector<LabeledSpan>::iterator it = std::find(pred_spans.begin(), pred_spans.end(), span);
      if (it == pred_spans.end()) {
        report.overall.fn += 1;
        report.per_type[span.label].fn += 1;
      }
    }
  }
  return report;
}

AccuracyReport token_accuracy(const std::vector<TokenLabelSequence>& gold,
                              const std::vector<TokenLabelSequence>& pred) {
  check_alignment(gold, pred);
  AccuracyReport report;
  int64_t correct = 0, total = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    for (size_t t = 0; t < gold[i].labels.size(); ++t) {
      total += 1;
      report.support[gold[i].labels[t]] += 1;
      if (gold[i].labels[t] == pred[i].labels[t]) correct += 1;
    }
  }
  report.accuracy = total == 0 ? 0.0 : 100.0 * correct / total;
  return report;
}

AccuracyReport macro_f1(const std::vector<TokenLabelSequence>& gold,
                        const std::vector<TokenLabelSequence>& pred, bool include_o) {
  check_alignment(gold, pred);
  AccuracyReport report;
  report.o_included = include_o;
  report.has_macro = true;
  int64_t correct = 0, total = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    for (size_t t = 0; t < gold[i].labels.size(); ++t) {
      const std::string& g = gold[i].labels[t];
      const std::string& p = pred[i].labels[t];
      total += 1;
      report.support[g] += 1;
      if (g == p) {
        correct += 1;
        report.per_label[g].tp += 1;
      } else {
        report.per_label[g].fn += 1;
        report.per_label[p].fp += 1;
      }
    }
  }
  report.accuracy = total == 0 ? 0.0 : 100.0 * correct / total;

  double sum = 0.0;
  int64_t n_labels = 0;
  for (const auto& [label, counts] : report.per_label) {
    if (report.support.count(label) == 0) continue;  // predicted-only: fp only
    if (!include_o && label == "O") continue;
    sum += counts.f1();
    n_labels += 1;
  }
  report.macro_f1 = n_labels == 0 ? 0.0 : sum / static_cast<double>(n_labels);
  return report;
}

std::string format_metric(double value) {
  // Round half up at one decimal. The scaled value is computed in double;
  // adding 0.5 and flooring gives 88.25 -> 88.3.
  double scaled = std::floor(value * 10.0 + 0.5);
  long long whole = static_cast<long long>(scaled) / 10;
  long long frac = std::llabs(static_cast<long long>(scaled) % 10);
  std::ostringstream out;
  if (scaled < 0 && whole == 0) out << "-";
  out << whole << "." << frac;
  return out.str();
}

std::string SpanF1Report::to_text() const {
  std::ostringstream out;
  out << "precision " << format_metric(precision()) << " recall " << format_metric(recall())
      << " f1 " << format_metric(f1()) << " (tp " << overall.tp << " fp " << overall.fp << " fn "
      << overall.fn << ")\n";
  for (const auto& [type, counts] : per_type) {
    out << "  " << type << ": precision " << format_metric(counts.precision()) << " recall "
        << format_metric(counts.recall()) << " f1 " << format_metric(counts.f1()) << " (tp "
        << counts.tp << " fp " << counts.fp << " fn " << counts.fn << ")\n";
  }
  return out.str();
}

std::string AccuracyReport::to_text() const {
  std::ostringstream out;
  out << "accuracy " << format_metric(accuracy);
  if (has_macro) {
    out << " macro-f1 " << format_metric(macro_f1) << " (O "
        << (o_included ? "included" : "excluded") << ")";
  }
  out << "\n";
  return out.str();
}

std::string render_table(const std::vector<TableRow>& rows) {
  // Fixed split order first, anything else alphabetically after.
  auto split_rank = [](const std::string& s) {
    if (s == "train") return 0;
    if (s == "dev") return 1;
    if (s == "test") return 2;
    return 3;
  };
  std::vector<std::string> splits;
  for (const auto& row : rows) {
    if (std::find(splits.begin(), splits.end(), row.split) == splits.end())
      splits.push_back(row.split);
  }
  std::sort(splits.begin(), splits.end(), [&](const std::string& a, const std::string& b) {
    if (split_rank(a) != split_rank(b)) return split_rank(a) < split_rank(b);
    return a < b;
  });

  struct Key {
    std::string model, task, metric;
    bool operator<(const Key& o) const {
      return std::tie(model, task, metric) < std::tie(o.model, o.task, o.metric);
    }
  };
  std::map<Key, std::map<std::string, double>> grid;
  for (const auto& row : rows) grid[{row.model, row.task, row.metric}][row.split] = row.value;

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"model", "task", "metric"};
  header.insert(header.end(), splits.begin(), splits.end());
  cells.push_back(header);
  for (const auto& [key, by_split] : grid) {
    std::vector<std::string> line = {key.model, key.task, key.metric};
    for (const auto& split : splits) {
      auto it = by_split.find(split);
      line.push_back(it == by_split.end() ? "-" : format_metric(it->second));
    }
    cells.push_back(line);
  }

  std::vector<size_t> widths(header.size(), 0);
  for (const auto& line : cells)
    for (size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());

  std::ostringstream out;
  for (size_t r = 0; r < cells.size(); ++r) {
    for (size_t c = 0; c < cells[r].size(); ++c) {
      if (c > 0) out << "  ";
      out << cells[r][c];
      for (size_t pad = cells[r][c].size(); pad < widths[c]; ++pad) out << ' ';
    }
    out << "\n";
    if (r == 0) {
      size_t total = 0;
      for (size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c > 0 ? 2 : 0);
      out << std::string(total, '-') << "\n";
    }
  }
  return out.str();
}

}  // namespace bertkit
