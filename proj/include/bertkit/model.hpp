#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bertkit/rng.hpp"

namespace bertkit {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ModelConfig {
  int num_layers = 2;
  int hidden_size = 64;
  int num_heads = 2;
  int intermediate_size = 256;
  int max_seq_len = 64;
  int vocab_size = 0;
  int type_vocab_size = 2;
  double dropout_rate = 0.1;
  uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

template <typename T>
struct LayerParams {
  Mat<T> wq, wk, wv, wo;        // hidden x hidden
  Vec<T> bq, bk, bv, bo;        // hidden
  Vec<T> ln1_gain, ln1_bias;    // post-attention layer norm
  Mat<T> w1;                    // hidden x intermediate
  Vec<T> b1;
  Mat<T> w2;                    // intermediate x hidden
  Vec<T> b2;
  Vec<T> ln2_gain, ln2_bias;    // post-FFN layer norm
};

// MLM output weights are tied to tok_emb; only the output bias is separate.
template <typename T>
struct Parameters {
  Mat<T> tok_emb;  // vocab x hidden
  Mat<T> pos_emb;  // max_seq_len x hidden
  Mat<T> seg_emb;  // type_vocab x hidden
  Vec<T> emb_ln_gain, emb_ln_bias;
  std::vector<LayerParams<T>> layers;
  Mat<T> pooler_w;  // hidden x hidden
  Vec<T> pooler_b;
  Mat<T> mlm_w;  // hidden x hidden transform
  Vec<T> mlm_b;
  Vec<T> mlm_ln_gain, mlm_ln_bias;
  Vec<T> mlm_out_bias;  // vocab
  Mat<T> sop_w;         // hidden x 2
  Vec<T> sop_b;
};

template <typename T>
struct ClassifierHead {
  Mat<T> w;  // hidden x num_labels
  Vec<T> b;

  static ClassifierHead zero(int hidden, int labels);
  void init(uint64_t seed);
};

// Flat view over one tensor; the registry below powers the optimizer,
// serialization and the gradient check uniformly.
template <typename T>
struct TensorView {
  std::string name;
  T* data = nullptr;
  int64_t rows = 0;
  int64_t cols = 0;
  bool decay = false;  // weight decay applies (matrices yes, vectors no)

  int64_t size() const { return rows * cols; }
};

template <typename T>
std::vector<TensorView<T>> registry(Parameters<T>& params);
template <typename T>
std::vector<TensorView<T>> registry(ClassifierHead<T>& head);

template <typename T>
Parameters<T> zero_parameters(const ModelConfig& config);
template <typename T>
void init_parameters(Parameters<T>& params, uint64_t seed);

// One already-packed sequence batch. Unused task fields stay empty.
struct EncodedBatch {
  int seq_len = 0;
  std::vector<std::vector<int>> input_ids;
  std::vector<std::vector<int>> segment_ids;
  std::vector<std::vector<int>> attention_mask;
  std::vector<std::vector<int>> mlm_positions;
  std::vector<std::vector<int>> mlm_labels;
  std::vector<int> sop_labels;
  std::vector<std::vector<int>> token_labels;  // -1 where unlabeled
  std::vector<int> seq_labels;

  int batch_size() const { return static_cast<int>(input_ids.size()); }
};

template <typename T>
struct LayerCache {
  Mat<T> x_in;                  // input to the block
  Mat<T> q, k, v;               // seq x hidden
  std::vector<Mat<T>> probs;    // per head, seq x seq
  std::vector<Mat<T>> probs_drop_mask;
  Mat<T> context;               // concatenated heads, seq x hidden
  Mat<T> attn_drop_mask;
  Mat<T> x_res1;                // x_in + dropout(attn_out), pre layer norm
  Vec<T> ln1_mean, ln1_inv_std;
  Mat<T> x1;                    // after first layer norm
  Mat<T> ffn_pre;               // x1 w1 + b1
  Mat<T> ffn_act;               // gelu(ffn_pre)
  Mat<T> ffn_drop_mask;
  Mat<T> x_res2;
  Vec<T> ln2_mean, ln2_inv_std;
  Mat<T> x2;                    // block output
};

template <typename T>
struct ForwardCache {
  // Per example.
  std::vector<Mat<T>> emb_sum;
  std::vector<Vec<T>> emb_ln_mean, emb_ln_inv_std;
  std::vector<Mat<T>> emb_drop_mask;
  std::vector<Mat<T>> x0;
  std::vector<std::vector<LayerCache<T>>> layers;  // [example][layer]
  std::vector<Mat<T>> seq_out;                     // final sequence output
  Mat<T> pooled_pre;                               // batch x hidden, pre-tanh
  Mat<T> pooled;                                   // batch x hidden
};

// Dropout streams are keyed per (seed, step) so training is resumable
// without serialized RNG state.
struct Dropout {
  double rate = 0.0;
  SplitMix64 rng;

  Dropout(double rate_, uint64_t key) : rate(rate_), rng(key) {}
};

template <typename T>
class Encoder {
 public:
  explicit Encoder(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  Parameters<T>& params() { return params_; }
  const Parameters<T>& params() const { return params_; }

  void init(uint64_t seed) { init_parameters(params_, seed); }

  // Post-layer-norm transformer encoder. `dropout` may be null (eval /
  // gradient checks). Throws DimensionError on shape mismatches.
  void forward(const EncodedBatch& batch, ForwardCache<T>& cache, Dropout* dropout) const;

 private:
  ModelConfig config_;
  Parameters<T> params_;
};

template <typename T>
struct LossOut {
  T loss = T(0);
  int64_t count = 0;    // positions (MLM/token) or examples (SOP/sequence)
  int64_t correct = 0;  // argmax agreement, for accuracy tracking
};

struct BackwardOptions {
  bool freeze_token_embeddings = false;
};

// Head passes. Each *_loss computes the scalar and, when `grads` is given,
// accumulates head gradients and the upstream d(sequence)/d(pooled),
// then propagates through the encoder into `grads`.

template <typename T>
LossOut<T> mlm_loss_value(const Encoder<T>& enc, const ForwardCache<T>& cache,
                          const EncodedBatch& batch);
template <typename T>
LossOut<T> sop_loss_value(const Encoder<T>& enc, const ForwardCache<T>& cache,
                          const EncodedBatch& batch);

// Pre-training objective: loss = mlm_weight * MLM + sop_weight * SOP.
// Returns both components; gradients accumulate into `grads` when non-null.
template <typename T>
struct PretrainLoss {
  LossOut<T> mlm;
  LossOut<T> sop;
};

template <typename T>
PretrainLoss<T> pretrain_step(const Encoder<T>& enc, const EncodedBatch& batch,
                              ForwardCache<T>& cache, Parameters<T>* grads, Dropout* dropout,
                              T mlm_weight = T(1), T sop_weight = T(1),
                              const BackwardOptions& options = {});

template <typename T>
LossOut<T> token_classification_step(const Encoder<T>& enc, ClassifierHead<T>& head,
                                     const EncodedBatch& batch, ForwardCache<T>& cache,
                                     Parameters<T>* grads, ClassifierHead<T>* head_grads,
                                     Dropout* dropout,
                                     std::vector<std::vector<int>>* predictions = nullptr);

template <typename T>
LossOut<T> sequence_classification_step(const Encoder<T>& enc, ClassifierHead<T>& head,
                                        const EncodedBatch& batch, ForwardCache<T>& cache,
                                        Parameters<T>* grads, ClassifierHead<T>* head_grads,
                                        Dropout* dropout, std::vector<int>* predictions = nullptr);

// Checkpoint container: version byte, JSON header (step + config + extras),
// then named little-endian float32 tensors.
struct Checkpoint {
  int64_t step = 0;
  ModelConfig config;
  Parameters<float> params;
  // Optimizer state (Adam moments) when saved mid-training.
  bool has_optimizer = false;
  Parameters<float> adam_m, adam_v;
  int64_t adam_t = 0;
  uint64_t train_seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct GradCheckOptions {
  double tolerance = 1e-4;
  int num_coords = 200;
  double step = 1e-5;
  uint64_t seed = 7;
  // Test hook: scale the analytic gradient of one tensor to verify the
  // harness catches wrong gradients.
  std::string corrupt_tensor;
  double corrupt_factor = 1.0;
};

struct GradCheckCoord {
  std::string tensor;
  int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool passed = false;
  int num_checked = 0;
  double max_rel_error = 0.0;
  std::vector<GradCheckCoord> worst;  // sorted by rel_error, descending

  std::string to_text() const;
};

// Central-difference verification of the analytic gradients on the
// pre-training loss, run in double precision with dropout off.
GradCheckReport gradient_check(const ModelConfig& config, const GradCheckOptions& options = {});

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace bertkit
