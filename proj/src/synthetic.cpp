#include "bertkit/synthetic.hpp"

#include <array>
#include <sstream>

#include "bertkit/rng.hpp"

namespace bertkit {

namespace {

const std::vector<std::string> kMarkers = {"Eerst", "Vervolgens", "Daarna", "Tenslotte"};

const std::vector<std::string> kSubjects = {
    "man",    "vrouw",  "kind",     "hond",   "kat",    "leraar", "bakker",
    "boer",   "dokter", "buurman",  "schilder", "visser", "schrijver", "zanger",
    "student", "agent", "tuinman",  "kok",    "smid",   "molenaar"};

const std::vector<std::string> kVerbs = {
    "ziet",  "hoort",    "zoekt", "vindt", "draagt", "koopt", "verkoopt", "maakt",
    "breekt", "opent",   "sluit", "wast",  "telt",   "kiest", "leest",    "schildert"};

const std::vector<std::string> kObjects = {
    "boek",   "huis",  "fiets",  "brood",   "appel",  "stoel",  "tafel",   "raam",
    "deur",   "schip", "klok",   "lamp",    "mand",   "fles",   "spiegel", "sleutel",
    "jas",    "hoed",  "kaas",   "bloem"};

const std::vector<std::string> kPlaces = {"markt",  "haven",  "kerk",   "molen",
                                          "tuin",   "keuken", "zolder", "kelder",
                                          "straat", "brug",   "bos",    "veld"};

const std::vector<std::string> kPreps = {"in", "bij", "naast", "achter", "voor", "onder"};

const std::vector<std::string> kAdverbs = {"snel",  "rustig", "graag", "vaak",
                                           "nooit", "altijd", "zacht", "luid"};

// Compounds split into several word pieces under a ~300-piece vocabulary,
// which keeps whole-word masking non-trivial in the varied style.
const std::vector<std::string> kCompounds = {"boekenkast", "fietspad",   "huisdeur",
                                             "appelboom",  "deursleutel", "bloempot",
                                             "kaasmarkt",  "klokkenmaker"};

// Short, high-frequency inventory for the uniform style; every word merges
// into a single piece, so sentence positions are stable.
const std::vector<std::string> kUniSubjects = {"man",  "vrouw", "kind", "hond",
                                               "kat",  "boer",  "kok",  "smid"};
const std::vector<std::string> kUniVerbs = {"ziet",  "hoort", "zoekt", "vindt",
                                            "koopt", "maakt", "telt",  "leest"};
const std::vector<std::string> kUniObjects = {"boek", "huis", "fiets", "brood",
                                              "stoel", "raam", "klok", "fles"};
const std::vector<std::string> kUniPlaces = {"markt", "haven", "kerk", "tuin",
                                             "brug",  "veld",  "bos",  "straat"};
const std::vector<std::string> kUniAdverbs = {"snel", "vaak", "nooit", "altijd",
                                              "zacht", "luid", "graag", "rustig"};
const std::vector<std::string> kUniPreps = {"in", "bij", "voor", "onder"};

template <typename T>
const T& pick(const std::vector<T>& items, SplitMix64& rng) {
  return items[static_cast<size_t>(rng.next_below(items.size()))];
}

const char* article_for(const std::string& object) {
  // alternate so both articles occur
  return object.size() % 2 == 0 ? "het" : "de";
}

// Two inventory words per sentence-position class, so every content slot
// of sentence j is drawn from class j mod 4.
template <typename T>
const T& pick_class(const std::vector<T>& items, int position, SplitMix64& rng) {
  size_t cls = static_cast<size_t>(position) % 4;
  size_t per_class = items.size() / 4;
  return items[cls * per_class + static_cast<size_t>(rng.next_below(per_class))];
}

// Verb-second sentence with the cyclic marker in front:
// "Daarna koopt de bakker rustig het brood voor de vrouw bij de markt."
// Content slots are class-partitioned by sentence position, which is the
// regularity sentence-order prediction can learn.
std::string varied_sentence(int position, SplitMix64& rng, const SynthConfig& config) {
  const std::string& marker = kMarkers[static_cast<size_t>(position) % kMarkers.size()];
  const std::string& verb = pick_class(kVerbs, position, rng);
  const std::string& subject = pick_class(kSubjects, position, rng);
  bool compound = rng.next_double() < config.compound_prob;
  const std::string& object =
      compound ? pick_class(kCompounds, position, rng) : pick_class(kObjects, position, rng);
  const std::string& beneficiary = pick_class(kSubjects, position, rng);
  const std::string& place = pick_class(kPlaces, position, rng);
  std::ostringstream out;
  out << marker << " " << verb << " de " << subject << " ";
  if (rng.next_double() < config.adverb_prob) out << pick_class(kAdverbs, position, rng) << " ";
  out << article_for(object) << " " << object << " " << (rng.next_coin() ? "voor" : "aan")
      << " de " << beneficiary << " " << pick(kPreps, rng) << " de " << place << ".";
  return out.str();
}

// Fixed ten-word template; every slot draws from the single-piece
// inventory restricted to the sentence's position class, so both the
// initial marker and the open-class words carry the ordering cue.
std::string uniform_sentence(int position, SplitMix64& rng) {
  const std::string& marker = kMarkers[static_cast<size_t>(position) % kMarkers.size()];
  const std::string& object = pick_class(kUniObjects, position, rng);
  std::ostringstream out;
  out << marker << " " << pick_class(kUniVerbs, position, rng) << " de "
      << pick_class(kUniSubjects, position, rng) << " " << article_for(object) << " " << object
      << " " << pick_class(kUniAdverbs, position, rng) << " " << pick(kUniPreps, rng) << " de "
      << pick_class(kUniPlaces, position, rng) << ".";
  return out.str();
}

}  // namespace

std::string synth_corpus_text(const SynthConfig& config) {
  std::ostringstream out;
  for (int d = 0; d < config.num_docs; ++d) {
    SplitMix64 rng(stream_key(config.seed, "synth_doc", static_cast<uint64_t>(d)));
    int span = config.max_sentences - config.min_sentences + 1;
    int count = config.min_sentences + static_cast<int>(rng.next_below(static_cast<uint64_t>(span)));
    if (d > 0) out << "\n";
    for (int s = 0; s < count; ++s) {
      out << (config.uniform_sentences ? uniform_sentence(s, rng)
                                       : varied_sentence(s, rng, config))
          << " ";
    }
    out << "\n";
  }
  return out.str();
}

CorpusManifest synth_corpus(const SynthConfig& config, const std::string& source) {
  return ingest_plaintext_string(synth_corpus_text(config), source);
}

std::vector<TokenLabelSequence> synth_token_charclass(int count, uint64_t seed) {
  std::vector<std::string> inventory;
  for (const auto& w : kSubjects) inventory.push_back(w);
  for (const auto& w : kVerbs) inventory.push_back(w);
  for (const auto& w : kObjects) inventory.push_back(w);
  for (const auto& w : kPlaces) inventory.push_back(w);
  for (const auto& w : kAdverbs) inventory.push_back(w);

  auto char_class = [](const std::string& word) {
    return word[0] <= 'k' ? std::string("K1") : std::string("K2");
  };

  std::vector<TokenLabelSequence> out;
  for (int i = 0; i < count; ++i) {
    SplitMix64 rng(stream_key(seed, "charclass", static_cast<uint64_t>(i)));
    int len = 5 + static_cast<int>(rng.next_below(5));
    TokenLabelSequence seq;
    seq.scheme = LabelScheme::Plain;
    for (int w = 0; w < len; ++w) {
      const std::string& word = pick(inventory, rng);
      seq.words.push_back(word);
      seq.labels.push_back(char_class(word));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

TokenTaskSplit synth_token_category(int train_count, int dev_count, uint64_t seed) {
  struct Category {
    std::string label;
    const std::vector<std::string>* words;
  };
  // The same open-class words the pretraining corpus teaches, split per
  // category between fine-tune train and dev.
  const std::array<Category, 4> categories = {{{"SUBJ", &kSubjects},
                                               {"VERB", &kVerbs},
                                               {"OBJ", &kObjects},
                                               {"PLACE", &kPlaces}}};

  std::vector<std::pair<std::string, std::string>> train_inv, dev_inv;  // (word, label)
  for (const auto& cat : categories) {
    for (size_t i = 0; i < cat.words->size(); ++i) {
      auto& side = i % 2 == 0 ? train_inv : dev_inv;
      side.emplace_back((*cat.words)[i], cat.label);
    }
  }

  auto build = [&](int count, const std::vector<std::pair<std::string, std::string>>& inv,
                   const char* stream) {
    std::vector<TokenLabelSequence> sequences;
    for (int i = 0; i < count; ++i) {
      SplitMix64 rng(stream_key(seed, stream, static_cast<uint64_t>(i)));
      int len = 5 + static_cast<int>(rng.next_below(5));
      TokenLabelSequence seq;
      seq.scheme = LabelScheme::Plain;
      for (int w = 0; w < len; ++w) {
        const auto& [word, label] = inv[static_cast<size_t>(rng.next_below(inv.size()))];
        seq.words.push_back(word);
        seq.labels.push_back(label);
      }
      sequences.push_back(std::move(seq));
    }
    return sequences;
  };

  TokenTaskSplit split;
  split.train = build(train_count, train_inv, "category_train");
  split.dev = build(dev_count, dev_inv, "category_dev");
  return split;
}

std::vector<LabeledText> synth_sentiment(int count, uint64_t seed) {
  std::vector<LabeledText> out;
  SynthConfig defaults;
  for (int i = 0; i < count; ++i) {
    SplitMix64 rng(stream_key(seed, "sentiment", static_cast<uint64_t>(i)));
    bool positive = i % 2 == 0;  // balanced by construction
    const std::string& object = pick(kObjects, rng);
    const std::string& subject = pick(kSubjects, rng);
    std::ostringstream text;
    text << "De " << subject << " vindt " << article_for(object) << " " << object << " "
         << (positive ? "goed" : "slecht") << ". "
         << varied_sentence(static_cast<int>(rng.next_below(4)), rng, defaults);
    out.push_back({text.str(), positive ? "pos" : "neg"});
  }
  return out;
}

std::vector<LabeledText> synth_random_labels(int count, uint64_t seed) {
  std::vector<LabeledText> out;
  SynthConfig defaults;
  for (int i = 0; i < count; ++i) {
    SplitMix64 rng(stream_key(seed, "random_labels", static_cast<uint64_t>(i)));
    std::string text = varied_sentence(static_cast<int>(rng.next_below(4)), rng, defaults);
    out.push_back({text, rng.next_coin() ? "a" : "b"});
  }
  return out;
}

}  // namespace bertkit
