#pragma once

#include <functional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace bertkit {

// Hierarchical span annotation over one sentence. Token indices are
// half-open [start, end).
struct SpanNode {
  std::string label;
  int start = 0;
  int end = 0;
  std::vector<SpanNode> children;
};

enum class LabelScheme { BIO, Plain };

struct TokenLabelSequence {
  std::vector<std::string> words;
  std::vector<std::string> labels;
  LabelScheme scheme = LabelScheme::BIO;
};

using LabelPredicate = std::function<bool(const std::string&)>;

// Throws DataError naming the offending node when nesting or bounds are
// violated.
void validate_tree(const std::vector<SpanNode>& roots, int length);

// Highest-level flattening: only root spans whose label passes `keep` are
// BIO-encoded; descendants are ignored; uncovered tokens are "O".
TokenLabelSequence flatten_highest_level(const std::vector<SpanNode>& roots, int length,
                                         const LabelPredicate& keep = nullptr);

struct ModifierFlattenResult {
  TokenLabelSequence sequence;
  int conflicts = 0;
};

// Collects modifier-typed nodes at any depth. Overlaps keep the
// earlier-starting (then longer) span; losers are counted as conflicts.
ModifierFlattenResult flatten_modifiers(const std::vector<SpanNode>& roots, int length,
                                        const LabelPredicate& is_modifier = nullptr);

// Root-level spans restricted to `subset`, emitted as plain per-token
// labels (no B-/I- marking).
TokenLabelSequence flatten_str(const std::vector<SpanNode>& roots, int length,
                               const std::set<std::string>& subset);

struct LabeledSpan {
  std::string label;
  int start = 0;
  int end = 0;

  bool operator==(const LabeledSpan&) const = default;
  bool operator<(const LabeledSpan& o) const {
    return std::tie(start, end, label) < std::tie(o.start, o.end, o.label);
  }
};

// Strict BIO decoding: every I-X must continue a B-X/I-X run. Used by the
// flattening round-trip; evaluation has its own lenient decoder.
std::vector<LabeledSpan> decode_bio_strict(const std::vector<std::string>& labels);

// Two-column CoNLL text: "word label" lines, blank-line sentence
// separators. Ragged lines raise ParseError with the line number.
std::vector<TokenLabelSequence> read_conll(const std::string& path);
void write_conll(const std::vector<TokenLabelSequence>& sequences, const std::string& path);

// JSON-lines hierarchical input, one sentence per line:
// {"words": [...], "spans": [{"label", "start", "end", "children"}]}.
struct AnnotatedSentence {
  std::vector<std::string> words;
  std::vector<SpanNode> spans;
};

std::vector<AnnotatedSentence> read_span_jsonl(const std::string& path);
void write_span_jsonl(const std::vector<AnnotatedSentence>& sentences, const std::string& path);

}  // namespace bertkit
