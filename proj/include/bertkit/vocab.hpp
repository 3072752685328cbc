#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bertkit/corpus.hpp"

namespace bertkit {

// WordPiece-format vocabulary: index = token id, continuations carry a
// "##" prefix, specials occupy ids 0..4 in fixed order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  static const std::vector<std::string>& special_names();

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> pieces);

  int size() const { return static_cast<int>(pieces_.size()); }
  const std::string& piece(int id) const { return pieces_.at(static_cast<size_t>(id)); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  // -1 when absent.
  int piece_id(const std::string& piece) const;
  bool contains(const std::string& piece) const { return piece_id(piece) >= 0; }

  static bool is_special_id(int id) { return id >= 0 && id < kNumSpecials; }

  // vocab.txt: one piece per line, line number = id, UTF-8, "\n"
  // terminators, no BOM.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> ids_;

  void validate() const;
};

struct InduceOptions {
  bool lowercase = false;
  int max_word_chars = 100;
};

// Deterministic byte-pair-merge induction over whitespace words in
// WordPiece symbol space. The alphabet (both word-initial and "##" forms
// of every observed character) is always included; merges are applied
// most-frequent-first with ties broken by lexicographic (left, right)
// pair order, until the vocabulary reaches target_size or no pair repeats.
Vocabulary induce_vocabulary(const CorpusManifest& manifest, int target_size,
                             const InduceOptions& options = {});

struct TokenizedSentence {
  std::vector<std::string> pieces;
  std::vector<int> ids;
  // Half-open piece-index ranges, one per surface word.
  std::vector<std::pair<int, int>> word_boundaries;

  int piece_count() const { return static_cast<int>(pieces.size()); }
};

// Greedy longest-match WordPiece tokenization of a single word. A word
// with no match at any point (or longer than max_word_chars) becomes one
// [UNK].
std::vector<std::string> tokenize_word(const std::string& word, const Vocabulary& vocab,
                                       int max_word_chars = 100);

TokenizedSentence tokenize_sentence(const Sentence& sentence, const Vocabulary& vocab,
                                    int max_word_chars = 100);

// Strips "##" and joins; throws FormatError when the first piece is a
// continuation.
std::string detokenize(const std::vector<std::string>& pieces);

}  // namespace bertkit
