#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bertkit/annotations.hpp"
#include "bertkit/corpus.hpp"
#include "bertkit/train.hpp"

namespace bertkit {

// Templated Dutch-like corpus with controllable regularities. Sentences
// follow verb-second templates and open with a cyclic position marker
// (Eerst / Vervolgens / Daarna / Tenslotte), which gives sentence-order
// prediction a learnable cue.
struct SynthConfig {
  int num_docs = 200;
  int min_sentences = 4;
  int max_sentences = 10;
  uint64_t seed = 1;
  // Uniform style: a fixed ten-word template over a small single-piece
  // inventory, so token positions repeat exactly across sentences. The
  // varied style keeps the ten-word template but swaps a compound object
  // (splitting into several pieces) into a fraction of sentences, and can
  // drop the adverb slot.
  bool uniform_sentences = false;
  double adverb_prob = 1.0;
  double compound_prob = 0.1;
};

// Plaintext with blank-line document separators, ready for ingestion.
std::string synth_corpus_text(const SynthConfig& config);

CorpusManifest synth_corpus(const SynthConfig& config, const std::string& source = "synth");

// Word-classification task whose label is the first character's class
// ("K1" for a..k, "K2" otherwise; roughly balanced). Word order is random.
std::vector<TokenLabelSequence> synth_token_charclass(int count, uint64_t seed);

struct TokenTaskSplit {
  std::vector<TokenLabelSequence> train;
  std::vector<TokenLabelSequence> dev;
};

// Word-category task (SUBJ/VERB/OBJ/PLACE) in randomized word order. The
// inventory is split by word type: train sentences use one half per
// category, dev sentences the other, so classifying dev words requires
// features learned outside the fine-tuning set.
TokenTaskSplit synth_token_category(int train_count, int dev_count, uint64_t seed);

// Binary polarity corpus: positive texts contain "goed", negative
// "slecht". Labels are "neg"/"pos".
std::vector<LabeledText> synth_sentiment(int count, uint64_t seed);

// Coin-flip labels over random texts; nothing to learn.
std::vector<LabeledText> synth_random_labels(int count, uint64_t seed);

}  // namespace bertkit
