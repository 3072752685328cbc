#include "bertkit/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bertkit/errors.hpp"
#include "bertkit/text.hpp"

namespace bertkit {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_siblings(const std::vector<SpanNode>& nodes, const std::string& parent) {
  std::vector<std::pair<int, int>> ranges;
  ranges.reserve(nodes.size());
  for (const auto& n : nodes) ranges.emplace_back(n.start, n.end);
  std::sort(ranges.begin(), ranges.end());
  for (size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first < ranges[i - 1].second) {
      throw DataError("overlapping siblings under " + parent + " at token " +
                      std::to_string(ranges[i].first));
    }
  }
}

void validate_node(const SpanNode& node, int lo, int hi) {
  if (node.start < lo || node.end > hi || node.start >= node.end) {
    throw DataError("span node " + node.label + " [" + std::to_string(node.start) + "," +
                    std::to_string(node.end) + ") violates bounds [" + std::to_string(lo) + "," +
                    std::to_string(hi) + ")");
  }
  check_siblings(node.children, node.label);
  for (const auto& child : node.children) validate_node(child, node.start, node.end);
}

void paint_bio(TokenLabelSequence& seq, const LabeledSpan& span) {
  seq.labels[static_cast<size_t>(span.start)] = "B-" + span.label;
  for (int t = span.start + 1; t < span.end; ++t) seq.labels[static_cast<size_t>(t)] = "I-" + span.label;
}

}  // namespace

void validate_tree(const std::vector<SpanNode>& roots, int length) {
  check_siblings(roots, "<root>");
  for (const auto& root : roots) validate_node(root, 0, length);
}

TokenLabelSequence flatten_highest_level(const std::vector<SpanNode>& roots, int length,
                                         const LabelPredicate& keep) {
  validate_tree(roots, length);
  TokenLabelSequence seq;
  seq.scheme = LabelScheme::BIO;
  seq.labels.assign(static_cast<size_t>(length), "O");
  for (const auto& root : roots) {
    if (keep && !keep(root.label)) continue;
    paint_bio(seq, {root.label, root.start, root.end});
  }
  return seq;
}

namespace {

void collect_modifiers(const SpanNode& node, const LabelPredicate& is_modifier,
                       std::vector<LabeledSpan>& out) {
  if (!is_modifier || is_modifier(node.label)) out.push_back({node.label, node.start, node.end});
  for (const auto& child : node.children) collect_modifiers(child, is_modifier, out);
}

}  // namespace

namespace {

// Bounds only: modifier layers may overlap (that is what the conflict rule
// is for), so sibling checks do not apply here.
void validate_bounds(const SpanNode& node, int length) {
  if (node.start < 0 || node.end > length || node.start >= node.end) {
    throw DataError("span node " + node.label + " [" + std::to_string(node.start) + "," +
                    std::to_string(node.end) + ") violates sentence length " +
                    std::to_string(length));
  }
  for (const auto& child : node.children) validate_bounds(child, length);
}

}  // namespace

ModifierFlattenResult flatten_modifiers(const std::vector<SpanNode>& roots, int length,
                                        const LabelPredicate& is_modifier) {
  for (const auto& root : roots) validate_bounds(root, length);
  std::vector<LabeledSpan> collected;
  for (const auto& root : roots) collect_modifiers(root, is_modifier, collected);

  // Earliest start wins, then the longer span, then label for a total
  // order.
  std::sort(collected.begin(), collected.end(), [](const LabeledSpan& a, const LabeledSpan& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end > b.end;
    return a.label < b.label;
  });

  ModifierFlattenResult result;
  result.sequence.scheme = LabelScheme::BIO;
  result.sequence.labels.assign(static_cast<size_t>(length), "O");
  int covered_end = 0;
  for (const auto& span : collected) {
    if (span.start < covered_end) {
      result.conflicts += 1;
      continue;
    }
    paint_bio(result.sequence, span);
    covered_end = span.end;
  }
  return result;
}

TokenLabelSequence flatten_str(const std::vector<SpanNode>& roots, int length,
                               const std::set<std::string>& subset) {
  validate_tree(roots, length);
  TokenLabelSequence seq;
  seq.scheme = LabelScheme::Plain;
  seq.labels.assign(static_cast<size_t>(length), "O");
  for (const auto& root : roots) {
    if (subset.count(root.label) == 0) continue;
    for (int t = root.start; t < root.end; ++t) seq.labels[static_cast<size_t>(t)] = root.label;
  }
  return seq;
}

std::vector<LabeledSpan> decode_bio_strict(const std::vector<std::string>& labels) {
  std::vector<LabeledSpan> spans;
  std::string open_type;
  int open_start = -1;
  auto close = [&](int end) {
    if (open_start >= 0) spans.push_back({open_type, open_start, end});
    open_start = -1;
    open_type.clear();
  };
  for (size_t t = 0; t < labels.size(); ++t) {
    const std::string& l = labels[t];
    if (l == "O") {
      close(static_cast<int>(t));
    } else if (l.size() > 2 && l[0] == 'B' && l[1] == '-') {
      close(static_cast<int>(t));
      open_type = l.substr(2);
      open_start = static_cast<int>(t);
    } else if (l.size() > 2 && l[0] == 'I' && l[1] == '-') {
      if (open_start < 0 || open_type != l.substr(2)) {
        throw FormatError("orphan " + l + " at token " + std::to_string(t));
      }
    } else {
      throw FormatError("not a BIO label: " + l);
    }
  }
  close(static_cast<int>(labels.size()));
  return spans;
}

std::vector<TokenLabelSequence> read_conll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read CoNLL file: " + path);
  std::vector<TokenLabelSequence> sequences;
  TokenLabelSequence current;
  bool all_bio = true;
  std::string line;
  size_t line_no = 0;

  auto flush = [&]() {
    if (current.words.empty()) return;
    current.scheme = all_bio ? LabelScheme::BIO : LabelScheme::Plain;
    sequences.push_back(std::move(current));
    current = {};
    all_bio = true;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string norm = normalize_text(line);
    if (norm.empty()) {
      flush();
      continue;
    }
    auto cols = split_on_spaces(norm);
    if (cols.size() != 2) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 2 columns, got " +
                       std::to_string(cols.size()));
    }
    const std::string& label = cols[1];
    bool bio = label == "O" || (label.size() > 2 && (label[0] == 'B' || label[0] == 'I') &&
                                label[1] == '-');
    if (!bio) all_bio = false;
    current.words.push_back(cols[0]);
    current.labels.push_back(label);
  }
  flush();
  return sequences;
}

void write_conll(const std::vector<TokenLabelSequence>& sequences, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CoNLL file: " + path);
  for (size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    if (seq.words.size() != seq.labels.size()) {
      throw DataError("sentence " + std::to_string(i) + " has " + std::to_string(seq.words.size()) +
                      " words but " + std::to_string(seq.labels.size()) + " labels");
    }
    if (i > 0) out << "\n";
    for (size_t t = 0; t < seq.words.size(); ++t) {
      out << seq.words[t] << " " << seq.labels[t] << "\n";
    }
  }
}

namespace {

SpanNode parse_span(const ordered_json& j) {
  SpanNode node;
  node.label = j.at("label").get<std::string>();
  node.start = j.at("start").get<int>();
  node.end = j.at("end").get<int>();
  if (j.contains("children")) {
    for (const auto& c : j.at("children")) node.children.push_back(parse_span(c));
  }
  return node;
}

ordered_json span_to_json(const SpanNode& node) {
  ordered_json j;
  j["label"] = node.label;
  j["start"] = node.start;
  j["end"] = node.end;
  ordered_json children = ordered_json::array();
  for (const auto& c : node.children) children.push_back(span_to_json(c));
  j["children"] = children;
  return j;
}

}  // namespace

std::vector<AnnotatedSentence> read_span_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read span file: " + path);
  std::vector<AnnotatedSentence> out;
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
    AnnotatedSentence sent;
    for (const auto& w : j.at("words")) sent.words.push_back(w.get<std::string>());
    for (const auto& s : j.at("spans")) sent.spans.push_back(parse_span(s));
    out.push_back(std::move(sent));
  }
  return out;
}

void write_span_jsonl(const std::vector<AnnotatedSentence>& sentences, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write span file: " + path);
  for (const auto& sent : sentences) {
    ordered_json j;
    j["words"] = sent.words;
    ordered_json spans = ordered_json::array();
    for (const auto& s : sent.spans) spans.push_back(span_to_json(s));
    j["spans"] = spans;
    out << j.dump() << "\n";
  }
}

}  // namespace bertkit
