#include "bertkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bertkit/errors.hpp"
#include "bertkit/metrics.hpp"
#include "bertkit/text.hpp"

namespace bertkit {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (epochs <= 0 || batch_size <= 0) throw ConfigError("epochs and batch_size must be positive");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (warmup_steps < 0 || checkpoint_every <= 0) {
    throw ConfigError("warmup_steps must be non-negative, checkpoint_every positive");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
}

TrainConfig parse_train_config_text(const std::string& text, const TrainConfig& defaults) {
  TrainConfig config = defaults;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string norm = normalize_text(line);
    if (norm.empty() || norm[0] == '#') continue;
    size_t eq = norm.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: " + norm);
    }
    std::string key = normalize_text(norm.substr(0, eq));
    std::string value = normalize_text(norm.substr(eq + 1));
    try {
      if (key == "steps") {
        config.steps = std::stoll(value);
      } else if (key == "epochs") {
        config.epochs = std::stoi(value);
      } else if (key == "batch_size") {
        config.batch_size = std::stoi(value);
      } else if (key == "learning_rate") {
        config.learning_rate = std::stod(value);
      } else if (key == "warmup_steps") {
        config.warmup_steps = std::stoll(value);
      } else if (key == "weight_decay") {
        config.weight_decay = std::stod(value);
      } else if (key == "checkpoint_every") {
        config.checkpoint_every = std::stoll(value);
      } else if (key == "seed") {
        config.seed = std::stoull(value);
      } else if (key == "freeze_encoder") {
        config.freeze_encoder = value == "true" || value == "1";
      } else if (key == "eval_checkpoints") {
        config.eval_checkpoints.clear();
        std::istringstream items(value);
        std::string item;
        while (std::getline(items, item, ',')) {
          if (!item.empty()) config.eval_checkpoints.push_back(std::stoll(item));
        }
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
      throw ConfigError("value out of range for " + key + ": " + value);
    }
  }
  config.validate();
  return config;
}

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_train_config_text(buffer.str());
}

double linear_warmup_lr(int64_t step, int64_t warmup_steps, int64_t total_steps, double peak) {
  if (total_steps <= 0) return 0.0;
  if (step <= 0) return 0.0;
  if (step >= total_steps) return 0.0;
  if (warmup_steps > 0 && step < warmup_steps) {
    return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps == warmup_steps) return peak;
  return peak * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup_steps);
}

void adamw_update(std::vector<TensorView<float>>& params,
                  const std::vector<TensorView<float>>& grads,
                  std::vector<TensorView<float>>& moment1,
                  std::vector<TensorView<float>>& moment2, int64_t t, double lr,
                  double weight_decay) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-6;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t v = 0; v < params.size(); ++v) {
    float* p = params[v].data;
    const float* g = grads[v].data;
    float* m = moment1[v].data;
    float* s = moment2[v].data;
    bool decay = params[v].decay;
    for (int64_t i = 0; i < params[v].size(); ++i) {
      double gi = g[i];
      double mi = beta1 * m[i] + (1.0 - beta1) * gi;
      double si = beta2 * s[i] + (1.0 - beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      s[i] = static_cast<float>(si);
      double update = (mi / bc1) / (std::sqrt(si / bc2) + eps);
      if (decay) update += weight_decay * p[i];
      p[i] = static_cast<float>(p[i] - lr * update);
    }
  }
}

namespace {

void zero_views(std::vector<TensorView<float>>& views) {
  for (auto& v : views) std::fill(v.data, v.data + v.size(), 0.0f);
}

EncodedBatch make_pretrain_batch(const std::vector<MaskedExample>& examples,
                                 const std::vector<size_t>& indices, int seq_len) {
  EncodedBatch batch;
  batch.seq_len = seq_len;
  for (size_t idx : indices) {
    const auto& ex = examples[idx];
    batch.input_ids.push_back(ex.input_ids);
    batch.segment_ids.push_back(ex.segment_ids);
    batch.attention_mask.push_back(ex.attention_mask);
    batch.mlm_positions.push_back(ex.mlm_positions);
    batch.mlm_labels.push_back(ex.mlm_labels);
    batch.sop_labels.push_back(ex.sop_label);
  }
  return batch;
}

std::vector<size_t> epoch_permutation(size_t n, uint64_t seed, int64_t epoch) {
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), size_t{0});
  SplitMix64 rng(stream_key(seed, "shuffle", static_cast<uint64_t>(epoch)));
  rng.shuffle(perm);
  return perm;
}

std::string checkpoint_name(int64_t step) {
  char name[32];
  std::snprintf(name, sizeof(name), "ckpt-%07lld.bin", static_cast<long long>(step));
  return name;
}

}  // namespace

PretrainResult pretrain(const std::vector<MaskedExample>& examples, const TrainConfig& config,
                        const ModelConfig& model_config, const std::string& out_dir,
                        const std::string& resume_from) {
  config.validate();
  if (examples.empty()) throw ConfigError("pretrain requires a non-empty example set");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create run directory: " + out_dir);

  int seq_len = static_cast<int>(examples.front().input_ids.size());
  for (const auto& ex : examples) {
    if (static_cast<int>(ex.input_ids.size()) != seq_len) {
      throw DataError("examples disagree on sequence length");
    }
  }

  Encoder<float> enc(model_config);
  Parameters<float> adam_m = zero_parameters<float>(model_config);
  Parameters<float> adam_v = zero_parameters<float>(model_config);
  int64_t start_step = 0;

  if (resume_from.empty()) {
    enc.init(config.seed);
  } else {
    Checkpoint ckpt = load_checkpoint(resume_from);
    enc.params() = ckpt.params;
    if (ckpt.has_optimizer) {
      adam_m = ckpt.adam_m;
      adam_v = ckpt.adam_v;
    }
    start_step = ckpt.step;
  }

  auto param_views = registry(enc.params());
  auto m_views = registry(adam_m);
  auto v_views = registry(adam_v);
  Parameters<float> grads = zero_parameters<float>(model_config);
  auto grad_views = registry(grads);

  PretrainResult result;
  auto save_at = [&](int64_t step) {
    Checkpoint ckpt;
    ckpt.step = step;
    ckpt.config = model_config;
    ckpt.params = enc.params();
    ckpt.has_optimizer = true;
    ckpt.adam_m = adam_m;
    ckpt.adam_v = adam_v;
    ckpt.adam_t = step;
    ckpt.train_seed = config.seed;
    std::string path = (fs::path(out_dir) / checkpoint_name(step)).string();
    save_checkpoint(ckpt, path);
    result.checkpoint_files.push_back(path);
    result.checkpoint_steps.push_back(step);
  };

  std::string log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  std::ofstream log(log_path, resume_from.empty() ? std::ios::binary
                                                  : (std::ios::binary | std::ios::app));
  if (!log) throw IoError("cannot write training log: " + log_path);
  result.log_file = log_path;

  if (start_step == 0) save_at(0);

  size_t n = examples.size();
  size_t batch = std::min<size_t>(static_cast<size_t>(config.batch_size), n);
  int64_t batches_per_epoch = std::max<int64_t>(1, static_cast<int64_t>(n / batch));

  ForwardCache<float> cache;
  for (int64_t step = start_step; step < config.steps; ++step) {
    int64_t epoch = step / batches_per_epoch;
    int64_t offset = (step % batches_per_epoch) * static_cast<int64_t>(batch);
    auto perm = epoch_permutation(n, config.seed, epoch);
    std::vector<size_t> indices(perm.begin() + offset, perm.begin() + offset + static_cast<int64_t>(batch));

    zero_views(grad_views);
    Dropout dropout(model_config.dropout_rate, stream_key(config.seed, "dropout", static_cast<uint64_t>(step)));
    auto losses = pretrain_step<float>(enc, make_pretrain_batch(examples, indices, seq_len), cache,
                                       &grads, model_config.dropout_rate > 0 ? &dropout : nullptr);

    double mlm = losses.mlm.loss, sop = losses.sop.loss;
    if (!std::isfinite(mlm) || !std::isfinite(sop)) {
      throw NumericError("non-finite loss at step " + std::to_string(step) +
                         "; last checkpoint retained in " + out_dir);
    }
    if (step == start_step) result.initial_mlm_loss = mlm;
    result.final_mlm_loss = mlm;

    double lr = linear_warmup_lr(step + 1, config.warmup_steps, config.steps, config.learning_rate);
    adamw_update(param_views, grad_views, m_views, v_views, step + 1, lr, config.weight_decay);

    ordered_json entry;
    entry["step"] = step + 1;
    entry["mlm_loss"] = mlm;
    entry["sop_loss"] = sop;
    entry["lr"] = lr;
    log << entry.dump() << "\n";

    int64_t done = step + 1;
    if (done % config.checkpoint_every == 0 && done != config.steps) save_at(done);
  }
  if (config.steps > 0) save_at(config.steps);
  return result;
}

namespace {

EncodedBatch eval_batch(const std::vector<MaskedExample>& examples, size_t begin, size_t end) {
  std::vector<size_t> indices(end - begin);
  std::iota(indices.begin(), indices.end(), begin);
  return make_pretrain_batch(examples, indices, static_cast<int>(examples.front().input_ids.size()));
}

}  // namespace

double sop_accuracy(const Checkpoint& ckpt, const std::vector<MaskedExample>& examples,
                    int batch_size, int64_t limit) {
  Encoder<float> enc(ckpt.config);
  enc.params() = ckpt.params;
  size_t n = examples.size();
  if (limit > 0) n = std::min<size_t>(n, static_cast<size_t>(limit));
  int64_t correct = 0, total = 0;
  ForwardCache<float> cache;
  for (size_t begin = 0; begin < n; begin += static_cast<size_t>(batch_size)) {
    size_t end = std::min(n, begin + static_cast<size_t>(batch_size));
    auto batch = eval_batch(examples, begin, end);
    enc.forward(batch, cache, nullptr);
    auto out = sop_loss_value(enc, cache, batch);
    correct += out.correct;
    total += out.count;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double mlm_eval_loss(const Checkpoint& ckpt, const std::vector<MaskedExample>& examples,
                     int batch_size, int64_t limit) {
  Encoder<float> enc(ckpt.config);
  enc.params() = ckpt.params;
  size_t n = examples.size();
  if (limit > 0) n = std::min<size_t>(n, static_cast<size_t>(limit));
  double total_loss = 0.0;
  int64_t total = 0;
  ForwardCache<float> cache;
  for (size_t begin = 0; begin < n; begin += static_cast<size_t>(batch_size)) {
    size_t end = std::min(n, begin + static_cast<size_t>(batch_size));
    auto batch = eval_batch(examples, begin, end);
    enc.forward(batch, cache, nullptr);
    auto out = mlm_loss_value(enc, cache, batch);
    total_loss += static_cast<double>(out.loss) * static_cast<double>(out.count);
    total += out.count;
  }
  return total == 0 ? 0.0 : total_loss / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Fine-tuning

std::vector<LabeledText> read_labeled_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read labeled text file: " + path);
  std::vector<LabeledText> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      ordered_json j = ordered_json::parse(line);
      out.push_back({j.at("text").get<std::string>(), j.at("label").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("bad JSON at " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_labeled_jsonl(const std::vector<LabeledText>& texts, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write labeled text file: " + path);
  for (const auto& t : texts) {
    ordered_json j;
    j["text"] = t.text;
    j["label"] = t.label;
    out << j.dump() << "\n";
  }
}

namespace {

struct LabelMap {
  std::vector<std::string> names;

  int id(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  }
};

LabelMap label_map_from_token(const std::vector<TokenLabelSequence>& train) {
  std::set<std::string> labels;
  for (const auto& seq : train)
    for (const auto& l : seq.labels) labels.insert(l);
  return {std::vector<std::string>(labels.begin(), labels.end())};
}

LabelMap label_map_from_text(const std::vector<LabeledText>& train) {
  std::set<std::string> labels;
  for (const auto& t : train) labels.insert(t.label);
  return {std::vector<std::string>(labels.begin(), labels.end())};
}

// [CLS] pieces [SEP] with labels on first pieces. Words whose first piece
// does not fit are dropped from the loss (and from predictions).
struct EncodedTokenSentence {
  std::vector<int> ids, segs, amask, labels;
  std::vector<int> word_first_piece;  // -1 when truncated away
};

EncodedTokenSentence encode_token_sentence(const TokenLabelSequence& seq,
                                           const std::vector<int>& label_ids,
                                           const Vocabulary& vocab, int max_seq_len) {
  EncodedTokenSentence out;
  out.ids.assign(static_cast<size_t>(max_seq_len), Vocabulary::kPad);
  out.segs.assign(static_cast<size_t>(max_seq_len), 0);
  out.amask.assign(static_cast<size_t>(max_seq_len), 0);
  out.labels.assign(static_cast<size_t>(max_seq_len), -1);
  out.word_first_piece.assign(seq.words.size(), -1);

  int t = 0;
  out.ids[static_cast<size_t>(t++)] = Vocabulary::kCls;
  int budget = max_seq_len - 1;  // room for the trailing [SEP]
  for (size_t w = 0; w < seq.words.size(); ++w) {
    auto pieces = tokenize_word(seq.words[w], vocab);
    if (t + static_cast<int>(pieces.size()) > budget) break;
    out.word_first_piece[w] = t;
    if (label_ids[w] >= 0) out.labels[static_cast<size_t>(t)] = label_ids[w];
    for (const auto& piece : pieces) {
      out.ids[static_cast<size_t>(t++)] = vocab.piece_id(piece);
    }
  }
  out.ids[static_cast<size_t>(t++)] = Vocabulary::kSep;
  for (int i = 0; i < t; ++i) out.amask[static_cast<size_t>(i)] = 1;
  return out;
}

std::vector<int> encode_text_ids(const std::string& text, const Vocabulary& vocab,
                                 int max_seq_len) {
  Sentence sentence = Sentence::from_text(text);
  std::vector<int> ids;
  ids.push_back(Vocabulary::kCls);
  int budget = max_seq_len - 2;
  int content = 0;
  for (const auto& word : sentence.words) {
    if (content >= budget) break;
    for (const auto& piece : tokenize_word(word, vocab)) {
      if (content >= budget) break;
      ids.push_back(vocab.piece_id(piece));
      ++content;
    }
  }
  ids.push_back(Vocabulary::kSep);
  return ids;
}

struct Trainer {
  Encoder<float> enc;
  ClassifierHead<float> head;
  Parameters<float> grads, adam_m, adam_v;
  ClassifierHead<float> head_grads, head_m, head_v;
  std::vector<TensorView<float>> all_params, all_grads, all_m, all_v;
  bool freeze_encoder = false;

  Trainer(const Checkpoint& ckpt, int num_labels, uint64_t seed, bool freeze)
      : enc(ckpt.config),
        head(ClassifierHead<float>::zero(ckpt.config.hidden_size, num_labels)),
        grads(zero_parameters<float>(ckpt.config)),
        adam_m(zero_parameters<float>(ckpt.config)),
        adam_v(zero_parameters<float>(ckpt.config)),
        head_grads(ClassifierHead<float>::zero(ckpt.config.hidden_size, num_labels)),
        head_m(ClassifierHead<float>::zero(ckpt.config.hidden_size, num_labels)),
        head_v(ClassifierHead<float>::zero(ckpt.config.hidden_size, num_labels)),
        freeze_encoder(freeze) {
    enc.params() = ckpt.params;
    head.init(seed);
    if (!freeze_encoder) {
      all_params = registry(enc.params());
      all_grads = registry(grads);
      all_m = registry(adam_m);
      all_v = registry(adam_v);
    }
    for (auto& view : registry(head)) all_params.push_back(view);
    for (auto& view : registry(head_grads)) all_grads.push_back(view);
    for (auto& view : registry(head_m)) all_m.push_back(view);
    for (auto& view : registry(head_v)) all_v.push_back(view);
  }

  void zero_grads() {
    for (auto& v : all_grads) std::fill(v.data, v.data + v.size(), 0.0f);
  }
};

}  // namespace

FinetuneResult finetune_token_task(const Checkpoint& checkpoint,
                                   const std::vector<TokenLabelSequence>& train,
                                   const std::vector<TokenLabelSequence>& dev,
                                   const Vocabulary& vocab, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ConfigError("empty training set");
  LabelMap labels = label_map_from_token(train);
  int max_seq_len = checkpoint.config.max_seq_len;

  auto encode_all = [&](const std::vector<TokenLabelSequence>& seqs) {
    std::vector<EncodedTokenSentence> out;
    out.reserve(seqs.size());
    for (const auto& seq : seqs) {
      std::vector<int> ids(seq.labels.size());
      for (size_t w = 0; w < seq.labels.size(); ++w) ids[w] = labels.id(seq.labels[w]);
      out.push_back(encode_token_sentence(seq, ids, vocab, max_seq_len));
    }
    return out;
  };
  auto enc_train = encode_all(train);
  auto enc_dev = encode_all(dev);

  Trainer trainer(checkpoint, static_cast<int>(labels.names.size()), config.seed,
                  config.freeze_encoder);

  size_t n = enc_train.size();
  size_t batch_size = std::min<size_t>(static_cast<size_t>(config.batch_size), n);
  int64_t batches_per_epoch =
      static_cast<int64_t>((n + batch_size - 1) / batch_size);
  int64_t total_steps = batches_per_epoch * config.epochs;

  FinetuneResult result;
  ForwardCache<float> cache;
  int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto perm = epoch_permutation(n, config.seed, epoch);
    double epoch_loss = 0.0;
    int64_t epoch_batches = 0;
    for (int64_t b = 0; b < batches_per_epoch; ++b) {
      size_t begin = static_cast<size_t>(b) * batch_size;
      size_t end = std::min(n, begin + batch_size);
      EncodedBatch batch;
      batch.seq_len = max_seq_len;
      for (size_t i = begin; i < end; ++i) {
        const auto& ex = enc_train[perm[i]];
        batch.input_ids.push_back(ex.ids);
        batch.segment_ids.push_back(ex.segs);
        batch.attention_mask.push_back(ex.amask);
        batch.token_labels.push_back(ex.labels);
      }
      trainer.zero_grads();
      Dropout dropout(checkpoint.config.dropout_rate,
                      stream_key(config.seed, "ft_dropout", static_cast<uint64_t>(step)));
      auto out = token_classification_step<float>(
          trainer.enc, trainer.head, batch, cache,
          trainer.freeze_encoder ? nullptr : &trainer.grads, &trainer.head_grads,
          checkpoint.config.dropout_rate > 0 ? &dropout : nullptr);
      if (!std::isfinite(static_cast<double>(out.loss))) {
        throw NumericError("non-finite fine-tuning loss at step " + std::to_string(step));
      }
      epoch_loss += out.loss;
      epoch_batches += 1;
      double lr =
          linear_warmup_lr(step + 1, config.warmup_steps, total_steps, config.learning_rate);
      adamw_update(trainer.all_params, trainer.all_grads, trainer.all_m, trainer.all_v, step + 1,
                   lr, config.weight_decay);
      ++step;
    }

    // Dev accuracy over labeled (first-piece) positions.
    int64_t correct = 0, total = 0;
    for (size_t i = 0; i < enc_dev.size(); ++i) {
      const auto& ex = enc_dev[i];
      EncodedBatch batch;
      batch.seq_len = max_seq_len;
      batch.input_ids.push_back(ex.ids);
      batch.segment_ids.push_back(ex.segs);
      batch.attention_mask.push_back(ex.amask);
      trainer.enc.forward(batch, cache, nullptr);
      Mat<float> logits =
          (cache.seq_out[0] * trainer.head.w).rowwise() + trainer.head.b.transpose();
      for (size_t w = 0; w < dev[i].labels.size(); ++w) {
        int pos = ex.word_first_piece[w];
        if (pos < 0) continue;
        int argmax = 0;
        logits.row(pos).maxCoeff(&argmax);
        total += 1;
        if (labels.names[static_cast<size_t>(argmax)] == dev[i].labels[w]) correct += 1;
      }
    }
    EpochMetric metric;
    metric.epoch = epoch + 1;
    metric.train_loss = epoch_batches == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_batches);
    metric.dev_metric = total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    result.epoch_metrics.push_back(metric);
  }

  result.model.config = checkpoint.config;
  result.model.params = trainer.enc.params();
  result.model.head = trainer.head;
  result.model.label_names = labels.names;
  return result;
}

FinetuneResult finetune_sequence_task(const Checkpoint& checkpoint,
                                      const std::vector<LabeledText>& train,
                                      const std::vector<LabeledText>& dev,
                                      const Vocabulary& vocab, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ConfigError("empty training set");
  LabelMap labels = label_map_from_text(train);
  if (labels.names.size() < 2) throw ConfigError("degenerate label set: single-class training set");
  int max_seq_len = checkpoint.config.max_seq_len;

  auto encode_all = [&](const std::vector<LabeledText>& texts) {
    std::vector<std::vector<int>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(encode_text_ids(t.text, vocab, max_seq_len));
    return out;
  };
  auto enc_train = encode_all(train);
  auto enc_dev = encode_all(dev);

  auto fill_example = [&](EncodedBatch& batch, const std::vector<int>& ids) {
    std::vector<int> padded(static_cast<size_t>(max_seq_len), Vocabulary::kPad);
    std::vector<int> segs(static_cast<size_t>(max_seq_len), 0);
    std::vector<int> amask(static_cast<size_t>(max_seq_len), 0);
    for (size_t t = 0; t < ids.size(); ++t) {
      padded[t] = ids[t];
      amask[t] = 1;
    }
    batch.input_ids.push_back(std::move(padded));
    batch.segment_ids.push_back(std::move(segs));
    batch.attention_mask.push_back(std::move(amask));
  };

  Trainer trainer(checkpoint, static_cast<int>(labels.names.size()), config.seed,
                  config.freeze_encoder);

  size_t n = enc_train.size();
  size_t batch_size = std::min<size_t>(static_cast<size_t>(config.batch_size), n);
  int64_t batches_per_epoch = static_cast<int64_t>((n + batch_size - 1) / batch_size);
  int64_t total_steps = batches_per_epoch * config.epochs;

  FinetuneResult result;
  ForwardCache<float> cache;
  int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto perm = epoch_permutation(n, config.seed, epoch);
    double epoch_loss = 0.0;
    int64_t epoch_batches = 0;
    for (int64_t b = 0; b < batches_per_epoch; ++b) {
      size_t begin = static_cast<size_t>(b) * batch_size;
      size_t end = std::min(n, begin + batch_size);
      EncodedBatch batch;
      batch.seq_len = max_seq_len;
      for (size_t i = begin; i < end; ++i) {
        fill_example(batch, enc_train[perm[i]]);
        batch.seq_labels.push_back(labels.id(train[perm[i]].label));
      }
      trainer.zero_grads();
      Dropout dropout(checkpoint.config.dropout_rate,
                      stream_key(config.seed, "ft_dropout", static_cast<uint64_t>(step)));
      auto out = sequence_classification_step<float>(
          trainer.enc, trainer.head, batch, cache,
          trainer.freeze_encoder ? nullptr : &trainer.grads, &trainer.head_grads,
          checkpoint.config.dropout_rate > 0 ? &dropout : nullptr);
      if (!std::isfinite(static_cast<double>(out.loss))) {
        throw NumericError("non-finite fine-tuning loss at step " + std::to_string(step));
      }
      epoch_loss += out.loss;
      epoch_batches += 1;
      double lr =
          linear_warmup_lr(step + 1, config.warmup_steps, total_steps, config.learning_rate);
      adamw_update(trainer.all_params, trainer.all_grads, trainer.all_m, trainer.all_v, step + 1,
                   lr, config.weight_decay);
      ++step;
    }

    int64_t correct = 0, total = 0;
    for (size_t i = 0; i < enc_dev.size(); ++i) {
      EncodedBatch batch;
      batch.seq_len = max_seq_len;
      fill_example(batch, enc_dev[i]);
      trainer.enc.forward(batch, cache, nullptr);
      Eigen::Matrix<float, 1, Eigen::Dynamic> logits =
          cache.pooled.row(0) * trainer.head.w + trainer.head.b.transpose();
      int argmax = 0;
      logits.maxCoeff(&argmax);
      total += 1;
      if (labels.names[static_cast<size_t>(argmax)] == dev[i].label) correct += 1;
    }
    EpochMetric metric;
    metric.epoch = epoch + 1;
    metric.train_loss = epoch_batches == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_batches);
    metric.dev_metric = total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    result.epoch_metrics.push_back(metric);
  }

  result.model.config = checkpoint.config;
  result.model.params = trainer.enc.params();
  result.model.head = trainer.head;
  result.model.label_names = labels.names;
  return result;
}

std::vector<std::vector<std::string>> predict_token_labels(
    const FineTunedModel& model, const std::vector<TokenLabelSequence>& sequences,
    const Vocabulary& vocab, int batch_size) {
  (void)batch_size;
  Encoder<float> enc(model.config);
  enc.params() = model.params;
  std::vector<std::vector<std::string>> out;
  ForwardCache<float> cache;
  for (const auto& seq : sequences) {
    std::vector<int> no_labels(seq.words.size(), -1);
    auto ex = encode_token_sentence(seq, no_labels, vocab, model.config.max_seq_len);
    EncodedBatch batch;
    batch.seq_len = model.config.max_seq_len;
    batch.input_ids.push_back(ex.ids);
    batch.segment_ids.push_back(ex.segs);
    batch.attention_mask.push_back(ex.amask);
    enc.forward(batch, cache, nullptr);
    Mat<float> logits = (cache.seq_out[0] * model.head.w).rowwise() + model.head.b.transpose();
    std::vector<std::string> predicted;
    for (size_t w = 0; w < seq.words.size(); ++w) {
      int pos = ex.word_first_piece[w];
      if (pos < 0) {
        predicted.push_back(model.label_names.empty() ? "O" : model.label_names[0]);
        continue;
      }
      int argmax = 0;
      logits.row(pos).maxCoeff(&argmax);
      predicted.push_back(model.label_names[static_cast<size_t>(argmax)]);
    }
    out.push_back(std::move(predicted));
  }
  return out;
}

std::vector<std::string> predict_sequence_labels(const FineTunedModel& model,
                                                 const std::vector<LabeledText>& texts,
                                                 const Vocabulary& vocab, int batch_size) {
  (void)batch_size;
  Encoder<float> enc(model.config);
  enc.params() = model.params;
  std::vector<std::string> out;
  ForwardCache<float> cache;
  for (const auto& t : texts) {
    auto ids = encode_text_ids(t.text, vocab, model.config.max_seq_len);
    EncodedBatch batch;
    batch.seq_len = model.config.max_seq_len;
    std::vector<int> padded(static_cast<size_t>(model.config.max_seq_len), Vocabulary::kPad);
    std::vector<int> segs(static_cast<size_t>(model.config.max_seq_len), 0);
    std::vector<int> amask(static_cast<size_t>(model.config.max_seq_len), 0);
    for (size_t i = 0; i < ids.size(); ++i) {
      padded[i] = ids[i];
      amask[i] = 1;
    }
    batch.input_ids.push_back(std::move(padded));
    batch.segment_ids.push_back(std::move(segs));
    batch.attention_mask.push_back(std::move(amask));
    enc.forward(batch, cache, nullptr);
    Eigen::Matrix<float, 1, Eigen::Dynamic> logits =
        cache.pooled.row(0) * model.head.w + model.head.b.transpose();
    int argmax = 0;
    logits.maxCoeff(&argmax);
    out.push_back(model.label_names[static_cast<size_t>(argmax)]);
  }
  return out;
}

std::string ComparisonReport::to_tsv() const {
  std::ostringstream out;
  out << "checkpoint\ttask\tmetric\tvalue\n";
  for (const auto& cell : cells) {
    out << cell.checkpoint << "\t" << cell.task << "\t" << cell.metric << "\t"
        << format_metric(cell.value) << "\n";
  }
  return out.str();
}

double ComparisonReport::value(const std::string& checkpoint, const std::string& task) const {
  for (const auto& cell : cells) {
    if (cell.checkpoint == checkpoint && cell.task == task) return cell.value;
  }
  throw DataError("no comparison cell for " + checkpoint + " / " + task);
}

ComparisonReport compare_checkpoints(const std::vector<std::string>& checkpoint_paths,
                                     const std::vector<TaskSpec>& tasks, const Vocabulary& vocab,
                                     const TrainConfig& config) {
  if (checkpoint_paths.size() < 2) {
    throw ConfigError("compare_checkpoints needs at least two checkpoints");
  }
  ComparisonReport report;
  std::set<std::string> names;
  for (const auto& path : checkpoint_paths) {
    Checkpoint ckpt = load_checkpoint(path);
    std::string name = "step-" + std::to_string(ckpt.step);
    int suffix = 2;
    while (!names.insert(name).second) {
      name = "step-" + std::to_string(ckpt.step) + "#" + std::to_string(suffix++);
    }
    for (const auto& task : tasks) {
      double metric = 0.0;
      if (task.kind == TaskSpec::Kind::Token) {
        auto result = finetune_token_task(ckpt, task.token_train, task.token_dev, vocab, config);
        metric = result.epoch_metrics.back().dev_metric;
      } else {
        auto result = finetune_sequence_task(ckpt, task.seq_train, task.seq_dev, vocab, config);
        metric = result.epoch_metrics.back().dev_metric;
      }
      report.cells.push_back({name, task.name, "dev_accuracy", metric});
    }
  }
  return report;
}

}  // namespace bertkit
