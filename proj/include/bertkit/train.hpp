#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bertkit/annotations.hpp"
#include "bertkit/model.hpp"
#include "bertkit/pretrain.hpp"
#include "bertkit/vocab.hpp"

namespace bertkit {

struct TrainConfig {
  int64_t steps = 2000;
  int epochs = 4;
  int batch_size = 16;
  double learning_rate = 5e-5;
  int64_t warmup_steps = 100;
  double weight_decay = 0.01;
  int64_t checkpoint_every = 1000;
  uint64_t seed = 42;
  std::vector<int64_t> eval_checkpoints;
  bool freeze_encoder = false;

  void validate() const;
};

// Line-based key=value file; '#' starts a comment; unknown keys are
// ConfigError.
TrainConfig parse_train_config(const std::string& path);
TrainConfig parse_train_config_text(const std::string& text, const TrainConfig& defaults = {});

// Piecewise-linear schedule: 0 at step 0, peak at warmup, 0 at total.
double linear_warmup_lr(int64_t step, int64_t warmup_steps, int64_t total_steps, double peak);

// Decoupled-weight-decay Adam over parallel tensor registries
// (beta1 0.9, beta2 0.999, eps 1e-6).
void adamw_update(std::vector<TensorView<float>>& params,
                  const std::vector<TensorView<float>>& grads,
                  std::vector<TensorView<float>>& moment1,
                  std::vector<TensorView<float>>& moment2, int64_t t, double lr,
                  double weight_decay);

struct PretrainResult {
  std::vector<std::string> checkpoint_files;  // step order; always includes step 0 and final
  std::vector<int64_t> checkpoint_steps;
  double initial_mlm_loss = 0.0;
  double final_mlm_loss = 0.0;
  std::string log_file;
};

// Optimizes MLM + SOP with linear warmup/decay. Writes ckpt-<step>.bin
// files and a JSON-lines log {step, mlm_loss, sop_loss, lr} into out_dir.
// A non-finite loss aborts with NumericError; the last saved checkpoint
// stays on disk. `resume_from` restarts mid-run bitwise-identically.
PretrainResult pretrain(const std::vector<MaskedExample>& examples, const TrainConfig& config,
                        const ModelConfig& model_config, const std::string& out_dir,
                        const std::string& resume_from = "");

// Accuracy of the SOP head over up to `limit` examples, dropout off.
double sop_accuracy(const Checkpoint& ckpt, const std::vector<MaskedExample>& examples,
                    int batch_size = 32, int64_t limit = 0);
double mlm_eval_loss(const Checkpoint& ckpt, const std::vector<MaskedExample>& examples,
                     int batch_size = 32, int64_t limit = 0);

struct LabeledText {
  std::string text;
  std::string label;
};

// JSON-lines, one {"text": ..., "label": ...} object per line.
std::vector<LabeledText> read_labeled_jsonl(const std::string& path);
void write_labeled_jsonl(const std::vector<LabeledText>& texts, const std::string& path);

struct FineTunedModel {
  ModelConfig config;
  Parameters<float> params;
  ClassifierHead<float> head;
  std::vector<std::string> label_names;
};

struct EpochMetric {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;  // accuracy percentage
};

struct FinetuneResult {
  FineTunedModel model;
  std::vector<EpochMetric> epoch_metrics;
};

// Four epochs by default, dev accuracy after each, last-epoch model
// returned (no early stopping). Labels live on the first piece of each
// word; other pieces are masked out of the loss.
FinetuneResult finetune_token_task(const Checkpoint& checkpoint,
                                   const std::vector<TokenLabelSequence>& train,
                                   const std::vector<TokenLabelSequence>& dev,
                                   const Vocabulary& vocab, const TrainConfig& config);

FinetuneResult finetune_sequence_task(const Checkpoint& checkpoint,
                                      const std::vector<LabeledText>& train,
                                      const std::vector<LabeledText>& dev,
                                      const Vocabulary& vocab, const TrainConfig& config);

// Word-level predictions (one label per word, read at its first piece).
std::vector<std::vector<std::string>> predict_token_labels(
    const FineTunedModel& model, const std::vector<TokenLabelSequence>& sequences,
    const Vocabulary& vocab, int batch_size = 32);

std::vector<std::string> predict_sequence_labels(const FineTunedModel& model,
                                                 const std::vector<LabeledText>& texts,
                                                 const Vocabulary& vocab, int batch_size = 32);

struct TaskSpec {
  enum class Kind { Token, Sequence };
  std::string name;
  Kind kind = Kind::Token;
  std::vector<TokenLabelSequence> token_train, token_dev;
  std::vector<LabeledText> seq_train, seq_dev;
};

struct ComparisonCell {
  std::string checkpoint;
  std::string task;
  std::string metric;
  double value = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonCell> cells;

  std::string to_tsv() const;
  double value(const std::string& checkpoint, const std::string& task) const;
};

// Fine-tunes every checkpoint on every task independently (same seeds per
// cell) and reports dev accuracy.
ComparisonReport compare_checkpoints(const std::vector<std::string>& checkpoint_paths,
                                     const std::vector<TaskSpec>& tasks, const Vocabulary& vocab,
                                     const TrainConfig& config);

}  // namespace bertkit
