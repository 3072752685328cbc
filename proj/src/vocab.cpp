#include "bertkit/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "bertkit/errors.hpp"
#include "bertkit/text.hpp"

namespace bertkit {

const std::vector<std::string>& Vocabulary::special_names() {
  static const std::vector<std::string> names = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return names;
}

Vocabulary::Vocabulary(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  ids_.reserve(pieces_.size());
  for (size_t i = 0; i < pieces_.size(); ++i) {
    if (!ids_.emplace(pieces_[i], static_cast<int>(i)).second) {
      throw FormatError("duplicate vocabulary piece: " + pieces_[i]);
    }
  }
  validate();
}

void Vocabulary::validate() const {
  if (pieces_.size() < kNumSpecials) throw FormatError("vocabulary smaller than the special set");
  const auto& names = special_names();
  for (int i = 0; i < kNumSpecials; ++i) {
    if (pieces_[static_cast<size_t>(i)] != names[static_cast<size_t>(i)]) {
      throw FormatError("special token at id " + std::to_string(i) + " must be " +
                        names[static_cast<size_t>(i)]);
    }
  }
  for (size_t i = kNumSpecials; i < pieces_.size(); ++i) {
    const std::string& p = pieces_[i];
    if (p.empty() || p == "##") throw FormatError("empty vocabulary piece at id " + std::to_string(i));
    if (p.find(' ') != std::string::npos || p.find('\t') != std::string::npos ||
        p.find('\n') != std::string::npos) {
      throw FormatError("vocabulary piece contains whitespace: " + p);
    }
  }
}

int Vocabulary::piece_id(const std::string& piece) const {
  auto it = ids_.find(piece);
  return it == ids_.end() ? -1 : it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary: " + path);
  for (const auto& p : pieces_) out << p << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary: " + path);
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  // A trailing newline produces no extra entry with getline; empty interior
  // lines are invalid and rejected by the constructor.
  while (!pieces.empty() && pieces.back().empty()) pieces.pop_back();
  return Vocabulary(std::move(pieces));
}

namespace {

using Symbol = std::string;

struct WordEntry {
  std::vector<Symbol> symbols;
  int64_t freq = 0;
};

}  // namespace

Vocabulary induce_vocabulary(const CorpusManifest& manifest, int target_size,
                             const InduceOptions& options) {
  // Word-type frequencies.
  std::map<std::string, int64_t> word_freq;
  for (const auto& doc : manifest.documents) {
    for (const auto& sent : doc.sentences) {
      for (const auto& w : sent.words) {
        std::string word = options.lowercase ? lowercase(w) : w;
        word_freq[word] += 1;
      }
    }
  }

  // Initial symbolization and the alphabet: every observed character in
  // both word-initial and continuation form.
  std::set<Symbol> alphabet;
  std::vector<WordEntry> words;
  words.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) {
    auto cps = decode_utf8(word);
    if (cps.empty()) continue;
    WordEntry entry;
    entry.freq = freq;
    for (size_t i = 0; i < cps.size(); ++i) {
      std::string ch = encode_utf8(cps[i]);
      alphabet.insert(ch);
      alphabet.insert("##" + ch);
      entry.symbols.push_back(i == 0 ? ch : "##" + ch);
    }
    words.push_back(std::move(entry));
  }

  int base = static_cast<int>(alphabet.size()) + Vocabulary::kNumSpecials;
  if (target_size < base) {
    throw ConfigError("vocabulary target size " + std::to_string(target_size) +
                      " below alphabet plus specials (" + std::to_string(base) + ")");
  }

  std::vector<std::string> pieces = Vocabulary::special_names();
  pieces.insert(pieces.end(), alphabet.begin(), alphabet.end());  // std::set: lexicographic
  std::set<std::string> have(pieces.begin(), pieces.end());

  // Greedy merges. Pair counts are recomputed per round; desk-scale
  // corpora keep this cheap.
  while (static_cast<int>(pieces.size()) < target_size) {
    std::map<std::pair<Symbol, Symbol>, int64_t> pair_freq;
    for (const auto& entry : words) {
      for (size_t i = 0; i + 1 < entry.symbols.size(); ++i) {
        pair_freq[{entry.symbols[i], entry.symbols[i + 1]}] += entry.freq;
      }
    }
    if (pair_freq.empty()) break;

    // Highest frequency wins; ties go to the lexicographically smallest
    // (left, right) pair — std::map iteration order makes the first
    // maximum the winner.
    std::pair<Symbol, Symbol> best;
    int64_t best_freq = 0;
    for (const auto& [pair, freq] : pair_freq) {
      if (freq > best_freq) {
        best = pair;
        best_freq = freq;
      }
    }
    // The right symbol is always a continuation; the merge keeps the left
    // symbol's prefix status.
    Symbol merged = best.first + best.second.substr(2);
    for (auto& entry : words) {
      auto& syms = entry.symbols;
      std::vector<Symbol> out;
      out.reserve(syms.size());
      for (size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == best.first && syms[i + 1] == best.second) {
          out.push_back(merged);
          ++i;
        } else {
          out.push_back(syms[i]);
        }
      }
      syms = std::move(out);
    }
    if (have.insert(merged).second) pieces.push_back(merged);
  }

  return Vocabulary(std::move(pieces));
}

std::vector<std::string> tokenize_word(const std::string& word, const Vocabulary& vocab,
                                       int max_word_chars) {
  if (word.empty()) throw DataError("tokenize_word requires a non-empty word");
  auto cps = decode_utf8(word);
  if (static_cast<int>(cps.size()) > max_word_chars) {
    return {Vocabulary::special_names()[Vocabulary::kUnk]};
  }
  std::vector<std::string> out;
  size_t start = 0;
  while (start < cps.size()) {
    size_t end = cps.size();
    std::string match;
    while (end > start) {
      std::string sub = encode_utf8(std::vector<uint32_t>(cps.begin() + start, cps.begin() + end));
      if (start > 0) sub = "##" + sub;
      if (vocab.contains(sub)) {
        match = std::move(sub);
        break;
      }
      --end;
    }
    if (match.empty()) {
      return {Vocabulary::special_names()[Vocabulary::kUnk]};
    }
    out.push_back(std::move(match));
    start = end;
  }
  return out;
}

TokenizedSentence tokenize_sentence(const Sentence& sentence, const Vocabulary& vocab,
                                    int max_word_chars) {
  TokenizedSentence out;
  for (const auto& word : sentence.words) {
    int begin = static_cast<int>(out.pieces.size());
    for (auto& piece : tokenize_word(word, vocab, max_word_chars)) {
      out.ids.push_back(vocab.piece_id(piece));
      out.pieces.push_back(std::move(piece));
    }
    out.word_boundaries.emplace_back(begin, static_cast<int>(out.pieces.size()));
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& pieces) {
  std::string out;
  for (size_t i = 0; i < pieces.size(); ++i) {
    const std::string& p = pieces[i];
    bool continuation = p.size() > 2 && p[0] == '#' && p[1] == '#';
    if (continuation) {
      if (i == 0) throw FormatError("leading continuation piece: " + p);
      out += p.substr(2);
    } else {
      if (i > 0) out += ' ';
      out += p;
    }
  }
  return out;
}

}  // namespace bertkit
