#include "bertkit/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"

#include "bertkit/errors.hpp"

namespace bertkit {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void ModelConfig::validate() const {
  if (hidden_size <= 0 || num_heads <= 0 || hidden_size % num_heads != 0) {
    throw ConfigError("hidden_size must be a positive multiple of num_heads");
  }
  if (vocab_size < 5) throw ConfigError("vocab_size must cover the 5 special tokens");
  if (max_seq_len < 8) throw ConfigError("max_seq_len must be at least 8");
  if (num_layers < 0 || intermediate_size <= 0 || type_vocab_size <= 0) {
    throw ConfigError("non-positive model dimension");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate outside [0,1)");
}

std::string ModelConfig::to_json() const {
  ordered_json j;
  j["num_layers"] = num_layers;
  j["hidden_size"] = hidden_size;
  j["num_heads"] = num_heads;
  j["intermediate_size"] = intermediate_size;
  j["max_seq_len"] = max_seq_len;
  j["vocab_size"] = vocab_size;
  j["type_vocab_size"] = type_vocab_size;
  j["dropout_rate"] = dropout_rate;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  ModelConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.intermediate_size = j.at("intermediate_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.type_vocab_size = j.at("type_vocab_size").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

template <typename T>
Parameters<T> zero_parameters(const ModelConfig& config) {
  config.validate();
  int h = config.hidden_size, i = config.intermediate_size, v = config.vocab_size;
  Parameters<T> p;
  p.tok_emb = Mat<T>::Zero(v, h);
  p.pos_emb = Mat<T>::Zero(config.max_seq_len, h);
  p.seg_emb = Mat<T>::Zero(config.type_vocab_size, h);
  p.emb_ln_gain = Vec<T>::Zero(h);
  p.emb_ln_bias = Vec<T>::Zero(h);
  p.layers.resize(static_cast<size_t>(config.num_layers));
  for (auto& layer : p.layers) {
    layer.wq = Mat<T>::Zero(h, h);
    layer.wk = Mat<T>::Zero(h, h);
    layer.wv = Mat<T>::Zero(h, h);
    layer.wo = Mat<T>::Zero(h, h);
    layer.bq = Vec<T>::Zero(h);
    layer.bk = Vec<T>::Zero(h);
    layer.bv = Vec<T>::Zero(h);
    layer.bo = Vec<T>::Zero(h);
    layer.ln1_gain = Vec<T>::Zero(h);
    layer.ln1_bias = Vec<T>::Zero(h);
    layer.w1 = Mat<T>::Zero(h, i);
    layer.b1 = Vec<T>::Zero(i);
    layer.w2 = Mat<T>::Zero(i, h);
    layer.b2 = Vec<T>::Zero(h);
    layer.ln2_gain = Vec<T>::Zero(h);
    layer.ln2_bias = Vec<T>::Zero(h);
  }
  p.pooler_w = Mat<T>::Zero(h, h);
  p.pooler_b = Vec<T>::Zero(h);
  p.mlm_w = Mat<T>::Zero(h, h);
  p.mlm_b = Vec<T>::Zero(h);
  p.mlm_ln_gain = Vec<T>::Zero(h);
  p.mlm_ln_bias = Vec<T>::Zero(h);
  p.mlm_out_bias = Vec<T>::Zero(v);
  p.sop_w = Mat<T>::Zero(h, 2);
  p.sop_b = Vec<T>::Zero(2);
  return p;
}

template <typename T>
std::vector<TensorView<T>> registry(Parameters<T>& p) {
  std::vector<TensorView<T>> out;
  auto add_mat = [&](const std::string& name, Mat<T>& m) {
    out.push_back({name, m.data(), m.rows(), m.cols(), true});
  };
  auto add_vec = [&](const std::string& name, Vec<T>& v) {
    out.push_back({name, v.data(), v.size(), 1, false});
  };
  add_mat("tok_emb", p.tok_emb);
  add_mat("pos_emb", p.pos_emb);
  add_mat("seg_emb", p.seg_emb);
  add_vec("emb_ln_gain", p.emb_ln_gain);
  add_vec("emb_ln_bias", p.emb_ln_bias);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l) + ".";
    auto& layer = p.layers[l];
    add_mat(prefix + "wq", layer.wq);
    add_vec(prefix + "bq", layer.bq);
    add_mat(prefix + "wk", layer.wk);
    add_vec(prefix + "bk", layer.bk);
    add_mat(prefix + "wv", layer.wv);
    add_vec(prefix + "bv", layer.bv);
    add_mat(prefix + "wo", layer.wo);
    add_vec(prefix + "bo", layer.bo);
    add_vec(prefix + "ln1_gain", layer.ln1_gain);
    add_vec(prefix + "ln1_bias", layer.ln1_bias);
    add_mat(prefix + "w1", layer.w1);
    add_vec(prefix + "b1", layer.b1);
    add_mat(prefix + "w2", layer.w2);
    add_vec(prefix + "b2", layer.b2);
    add_vec(prefix + "ln2_gain", layer.ln2_gain);
    add_vec(prefix + "ln2_bias", layer.ln2_bias);
  }
  add_mat("pooler_w", p.pooler_w);
  add_vec("pooler_b", p.pooler_b);
  add_mat("mlm_w", p.mlm_w);
  add_vec("mlm_b", p.mlm_b);
  add_vec("mlm_ln_gain", p.mlm_ln_gain);
  add_vec("mlm_ln_bias", p.mlm_ln_bias);
  add_vec("mlm_out_bias", p.mlm_out_bias);
  add_mat("sop_w", p.sop_w);
  add_vec("sop_b", p.sop_b);
  return out;
}

template <typename T>
std::vector<TensorView<T>> registry(ClassifierHead<T>& head) {
  std::vector<TensorView<T>> out;
  out.push_back({"head_w", head.w.data(), head.w.rows(), head.w.cols(), true});
  out.push_back({"head_b", head.b.data(), head.b.size(), 1, false});
  return out;
}

template <typename T>
void init_parameters(Parameters<T>& params, uint64_t seed) {
  // Truncated normal (std 0.02) for matrices, zeros for biases, ones for
  // layer-norm gains. One stream in registry order keeps this reproducible.
  SplitMix64 rng(stream_key(seed, "init", 0));
  for (auto& view : registry(params)) {
    bool gain = view.name.size() >= 5 && view.name.ends_with("_gain");
    for (int64_t i = 0; i < view.size(); ++i) {
      if (view.cols > 1) {
        view.data[i] = static_cast<T>(rng.next_trunc_normal(0.02));
      } else {
        view.data[i] = gain ? T(1) : T(0);
      }
    }
  }
}

template <typename T>
ClassifierHead<T> ClassifierHead<T>::zero(int hidden, int labels) {
  ClassifierHead<T> head;
  head.w = Mat<T>::Zero(hidden, labels);
  head.b = Vec<T>::Zero(labels);
  return head;
}

template <typename T>
void ClassifierHead<T>::init(uint64_t seed) {
  SplitMix64 rng(stream_key(seed, "head_init", 0));
  for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.next_trunc_normal(0.02));
  b.setZero();
}

namespace {

constexpr double kLnEps = 1e-12;

template <typename T>
void layer_norm_forward(const Mat<T>& x, const Vec<T>& gain, const Vec<T>& bias, Mat<T>& y,
                        Vec<T>& mean, Vec<T>& inv_std) {
  int64_t rows = x.rows(), n = x.cols();
  y.resize(rows, n);
  mean.resize(rows);
  inv_std.resize(rows);
  for (int64_t r = 0; r < rows; ++r) {
    T mu = x.row(r).mean();
    T var = (x.row(r).array() - mu).square().sum() / static_cast<T>(n);
    T inv = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    mean(r) = mu;
    inv_std(r) = inv;
    y.row(r) = (((x.row(r).array() - mu) * inv) * gain.transpose().array() +
                bias.transpose().array())
                   .matrix();
  }
}

// dgain/dbias accumulate; returns dx.
template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& x, const Vec<T>& mean,
                           const Vec<T>& inv_std, const Vec<T>& gain, Vec<T>& dgain, Vec<T>& dbias) {
  int64_t rows = x.rows(), n = x.cols();
  Mat<T> dx(rows, n);
  for (int64_t r = 0; r < rows; ++r) {
    T inv = inv_std(r);
    auto centered = (x.row(r).array() - mean(r)).eval();
    auto xhat = (centered * inv).eval();
    auto dxhat = (dy.row(r).array() * gain.transpose().array()).eval();
    T dvar = (dxhat * centered).sum() * T(-0.5) * inv * inv * inv;
    T dmean = (-dxhat * inv).sum();
    dx.row(r) = (dxhat * inv + dvar * T(2) / static_cast<T>(n) * centered +
                 dmean / static_cast<T>(n))
                    .matrix();
    dgain.array() += (dy.row(r).array() * xhat).transpose();
    dbias.array() += dy.row(r).transpose().array();
  }
  return dx;
}

template <typename T>
T gelu_scalar(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475)));
}

template <typename T>
T gelu_grad_scalar(T x) {
  T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475)));
  T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
  return cdf + x * pdf;
}

template <typename T>
Mat<T> dropout_mask(Dropout* dropout, int64_t rows, int64_t cols) {
  Mat<T> mask;
  if (dropout == nullptr || dropout->rate <= 0.0) return mask;  // empty = identity
  mask.resize(rows, cols);
  T keep = T(1) / static_cast<T>(1.0 - dropout->rate);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      mask(r, c) = dropout->rng.next_double() < dropout->rate ? T(0) : keep;
    }
  }
  return mask;
}

template <typename T>
void apply_mask(Mat<T>& x, const Mat<T>& mask) {
  if (mask.size() > 0) x.array() *= mask.array();
}

template <typename T>
Mat<T> masked_if(const Mat<T>& x, const Mat<T>& mask) {
  if (mask.size() == 0) return x;
  return (x.array() * mask.array()).matrix();
}

// Stable softmax cross entropy over one logits row. Returns loss; writes
// the softmax distribution into `probs`.
template <typename T>
T softmax_xent_row(const Eigen::Ref<const Eigen::Matrix<T, 1, Eigen::Dynamic>>& logits, int label,
                   Eigen::Matrix<T, 1, Eigen::Dynamic>& probs) {
  T m = logits.maxCoeff();
  probs = (logits.array() - m).exp();
  T z = probs.sum();
  probs /= z;
  T lse = m + std::log(z);
  return lse - logits(label);
}

}  // namespace

template <typename T>
Encoder<T>::Encoder(const ModelConfig& config)
    : config_(config), params_(zero_parameters<T>(config)) {}

template <typename T>
void Encoder<T>::forward(const EncodedBatch& batch, ForwardCache<T>& cache,
                         Dropout* dropout) const {
  const auto& cfg = config_;
  const auto& p = params_;
  int batch_size = batch.batch_size();
  int seq = batch.seq_len;
  if (batch_size == 0) throw DimensionError("empty batch");
  if (seq <= 0 || seq > cfg.max_seq_len) {
    throw DimensionError("batch seq_len " + std::to_string(seq) + " outside position table (" +
                         std::to_string(cfg.max_seq_len) + ")");
  }
  int heads = cfg.num_heads;
  int dh = cfg.hidden_size / heads;
  T scale = T(1) / std::sqrt(static_cast<T>(dh));

  cache.emb_sum.resize(batch_size);
  cache.emb_ln_mean.resize(batch_size);
  cache.emb_ln_inv_std.resize(batch_size);
  cache.emb_drop_mask.assign(batch_size, Mat<T>());
  cache.x0.resize(batch_size);
  cache.layers.assign(batch_size, std::vector<LayerCache<T>>(static_cast<size_t>(cfg.num_layers)));
  cache.seq_out.resize(batch_size);
  cache.pooled_pre.resize(batch_size, cfg.hidden_size);
  cache.pooled.resize(batch_size, cfg.hidden_size);

  for (int b = 0; b < batch_size; ++b) {
    const auto& ids = batch.input_ids[static_cast<size_t>(b)];
    const auto& segs = batch.segment_ids[static_cast<size_t>(b)];
    const auto& amask = batch.attention_mask[static_cast<size_t>(b)];
    if (static_cast<int>(ids.size()) != seq || static_cast<int>(segs.size()) != seq ||
        static_cast<int>(amask.size()) != seq) {
      throw DimensionError("example " + std::to_string(b) +
                           ": input_ids/segment_ids/attention_mask length != seq_len");
    }

    Mat<T> emb(seq, cfg.hidden_size);
    for (int t = 0; t < seq; ++t) {
      int id = ids[static_cast<size_t>(t)];
      int sg = segs[static_cast<size_t>(t)];
      if (id < 0 || id >= cfg.vocab_size) {
        throw DimensionError("token id " + std::to_string(id) + " outside tok_emb");
      }
      if (sg < 0 || sg >= cfg.type_vocab_size) {
        throw DimensionError("segment id " + std::to_string(sg) + " outside seg_emb");
      }
      emb.row(t) = p.tok_emb.row(id) + p.pos_emb.row(t) + p.seg_emb.row(sg);
    }
    cache.emb_sum[static_cast<size_t>(b)] = emb;

    Mat<T> x;
    layer_norm_forward(emb, p.emb_ln_gain, p.emb_ln_bias, x,
                       cache.emb_ln_mean[static_cast<size_t>(b)],
                       cache.emb_ln_inv_std[static_cast<size_t>(b)]);
    cache.emb_drop_mask[static_cast<size_t>(b)] = dropout_mask<T>(dropout, seq, cfg.hidden_size);
    apply_mask(x, cache.emb_drop_mask[static_cast<size_t>(b)]);
    cache.x0[static_cast<size_t>(b)] = x;

    for (int l = 0; l < cfg.num_layers; ++l) {
      auto& lc = cache.layers[static_cast<size_t>(b)][static_cast<size_t>(l)];
      const auto& lp = p.layers[static_cast<size_t>(l)];
      lc.x_in = x;
      lc.q = (x * lp.wq).rowwise() + lp.bq.transpose();
      lc.k = (x * lp.wk).rowwise() + lp.bk.transpose();
      lc.v = (x * lp.wv).rowwise() + lp.bv.transpose();

      lc.probs.assign(static_cast<size_t>(heads), Mat<T>());
      lc.probs_drop_mask.assign(static_cast<size_t>(heads), Mat<T>());
      lc.context.resize(seq, cfg.hidden_size);
      for (int h = 0; h < heads; ++h) {
        auto qh = lc.q.middleCols(h * dh, dh);
        auto kh = lc.k.middleCols(h * dh, dh);
        auto vh = lc.v.middleCols(h * dh, dh);
        Mat<T> scores = scale * (qh * kh.transpose());
        // Hard key masking: excluded keys get exactly zero probability.
        Mat<T>& probs = lc.probs[static_cast<size_t>(h)];
        probs.resize(seq, seq);
        for (int r = 0; r < seq; ++r) {
          T m = std::numeric_limits<T>::lowest();
          for (int c = 0; c < seq; ++c) {
            if (amask[static_cast<size_t>(c)] != 0) m = std::max(m, scores(r, c));
          }
          T z = T(0);
          for (int c = 0; c < seq; ++c) {
            if (amask[static_cast<size_t>(c)] != 0) {
              T e = std::exp(scores(r, c) - m);
              probs(r, c) = e;
              z += e;
            } else {
              probs(r, c) = T(0);
            }
          }
          probs.row(r) /= z;
        }
        lc.probs_drop_mask[static_cast<size_t>(h)] = dropout_mask<T>(dropout, seq, seq);
        Mat<T> dropped = masked_if(probs, lc.probs_drop_mask[static_cast<size_t>(h)]);
        lc.context.middleCols(h * dh, dh) = dropped * vh;
      }

      Mat<T> attn_out = (lc.context * lp.wo).rowwise() + lp.bo.transpose();
      lc.attn_drop_mask = dropout_mask<T>(dropout, seq, cfg.hidden_size);
      apply_mask(attn_out, lc.attn_drop_mask);
      lc.x_res1 = lc.x_in + attn_out;
      layer_norm_forward(lc.x_res1, lp.ln1_gain, lp.ln1_bias, lc.x1, lc.ln1_mean, lc.ln1_inv_std);

      lc.ffn_pre = (lc.x1 * lp.w1).rowwise() + lp.b1.transpose();
      lc.ffn_act = lc.ffn_pre.unaryExpr([](T v) { return gelu_scalar(v); });
      Mat<T> ffn_out = (lc.ffn_act * lp.w2).rowwise() + lp.b2.transpose();
      lc.ffn_drop_mask = dropout_mask<T>(dropout, seq, cfg.hidden_size);
      apply_mask(ffn_out, lc.ffn_drop_mask);
      lc.x_res2 = lc.x1 + ffn_out;
      layer_norm_forward(lc.x_res2, lp.ln2_gain, lp.ln2_bias, lc.x2, lc.ln2_mean, lc.ln2_inv_std);
      x = lc.x2;
    }

    cache.seq_out[static_cast<size_t>(b)] = x;
    cache.pooled_pre.row(b) = x.row(0) * p.pooler_w + p.pooler_b.transpose();
    cache.pooled.row(b) = cache.pooled_pre.row(b).array().tanh().matrix();
  }
}

namespace {

// Propagates d(sequence_output) and d(pooled) through the encoder into
// `grads`. dseq is consumed.
template <typename T>
void encoder_backward(const Encoder<T>& enc, const EncodedBatch& batch,
                      const ForwardCache<T>& cache, std::vector<Mat<T>>& dseq,
                      const Mat<T>& dpooled, Parameters<T>& grads,
                      const BackwardOptions& options) {
  const auto& cfg = enc.config();
  const auto& p = enc.params();
  int heads = cfg.num_heads;
  int dh = cfg.hidden_size / heads;
  T scale = T(1) / std::sqrt(static_cast<T>(dh));
  int seq = batch.seq_len;

  for (int b = 0; b < batch.batch_size(); ++b) {
    Mat<T> dx = std::move(dseq[static_cast<size_t>(b)]);

    if (dpooled.size() > 0) {
      Eigen::Matrix<T, 1, Eigen::Dynamic> dpre =
          (dpooled.row(b).array() *
           (T(1) - cache.pooled.row(b).array() * cache.pooled.row(b).array()))
              .matrix();
      grads.pooler_w +=
          cache.seq_out[static_cast<size_t>(b)].row(0).transpose() * dpre;
      grads.pooler_b += dpre.transpose();
      dx.row(0) += dpre * p.pooler_w.transpose();
    }

    for (int l = cfg.num_layers - 1; l >= 0; --l) {
      const auto& lc = cache.layers[static_cast<size_t>(b)][static_cast<size_t>(l)];
      const auto& lp = p.layers[static_cast<size_t>(l)];
      auto& lg = grads.layers[static_cast<size_t>(l)];

      Mat<T> dres2 = layer_norm_backward(dx, lc.x_res2, lc.ln2_mean, lc.ln2_inv_std, lp.ln2_gain,
                                         lg.ln2_gain, lg.ln2_bias);
      Mat<T> dffn = masked_if(dres2, lc.ffn_drop_mask);
      Mat<T> dx1 = dres2;  // residual branch

      lg.w2 += lc.ffn_act.transpose() * dffn;
      lg.b2 += dffn.colwise().sum().transpose();
      Mat<T> dact = dffn * lp.w2.transpose();
      Mat<T> dpre =
          (dact.array() * lc.ffn_pre.unaryExpr([](T v) { return gelu_grad_scalar(v); }).array())
              .matrix();
      lg.w1 += lc.x1.transpose() * dpre;
      lg.b1 += dpre.colwise().sum().transpose();
      dx1 += dpre * lp.w1.transpose();

      Mat<T> dres1 = layer_norm_backward(dx1, lc.x_res1, lc.ln1_mean, lc.ln1_inv_std, lp.ln1_gain,
                                         lg.ln1_gain, lg.ln1_bias);
      Mat<T> dattn = masked_if(dres1, lc.attn_drop_mask);
      Mat<T> dx_in = dres1;  // residual branch

      lg.wo += lc.context.transpose() * dattn;
      lg.bo += dattn.colwise().sum().transpose();
      Mat<T> dcontext = dattn * lp.wo.transpose();

      Mat<T> dq(seq, cfg.hidden_size), dk(seq, cfg.hidden_size), dv(seq, cfg.hidden_size);
      for (int h = 0; h < heads; ++h) {
        const Mat<T>& probs = lc.probs[static_cast<size_t>(h)];
        const Mat<T>& pmask = lc.probs_drop_mask[static_cast<size_t>(h)];
        Mat<T> dropped = masked_if(probs, pmask);
        auto dch = dcontext.middleCols(h * dh, dh);
        auto vh = lc.v.middleCols(h * dh, dh);
        auto qh = lc.q.middleCols(h * dh, dh);
        auto kh = lc.k.middleCols(h * dh, dh);

        Mat<T> ddropped = dch * vh.transpose();
        dv.middleCols(h * dh, dh) = dropped.transpose() * dch;
        Mat<T> dprobs = masked_if(ddropped, pmask);
        // Softmax backward per row; zero rows where probability is zero.
        Mat<T> dscores(seq, seq);
        for (int r = 0; r < seq; ++r) {
          T inner = (dprobs.row(r).array() * probs.row(r).array()).sum();
          dscores.row(r) =
              (probs.row(r).array() * (dprobs.row(r).array() - inner)).matrix();
        }
        dq.middleCols(h * dh, dh) = scale * (dscores * kh);
        dk.middleCols(h * dh, dh) = scale * (dscores.transpose() * qh);
      }

      lg.wq += lc.x_in.transpose() * dq;
      lg.bq += dq.colwise().sum().transpose();
      dx_in += dq * lp.wq.transpose();
      lg.wk += lc.x_in.transpose() * dk;
      lg.bk += dk.colwise().sum().transpose();
      dx_in += dk * lp.wk.transpose();
      lg.wv += lc.x_in.transpose() * dv;
      lg.bv += dv.colwise().sum().transpose();
      dx_in += dv * lp.wv.transpose();

      dx = std::move(dx_in);
    }

    apply_mask(dx, cache.emb_drop_mask[static_cast<size_t>(b)]);
    Mat<T> demb = layer_norm_backward(dx, cache.emb_sum[static_cast<size_t>(b)],
                                      cache.emb_ln_mean[static_cast<size_t>(b)],
                                      cache.emb_ln_inv_std[static_cast<size_t>(b)], p.emb_ln_gain,
                                      grads.emb_ln_gain, grads.emb_ln_bias);
    const auto& ids = batch.input_ids[static_cast<size_t>(b)];
    const auto& segs = batch.segment_ids[static_cast<size_t>(b)];
    for (int t = 0; t < seq; ++t) {
      if (!options.freeze_token_embeddings) {
        grads.tok_emb.row(ids[static_cast<size_t>(t)]) += demb.row(t);
      }
      grads.pos_emb.row(t) += demb.row(t);
      grads.seg_emb.row(segs[static_cast<size_t>(t)]) += demb.row(t);
    }
  }
}

template <typename T>
std::vector<Mat<T>> zero_dseq(const ForwardCache<T>& cache) {
  std::vector<Mat<T>> dseq(cache.seq_out.size());
  for (size_t b = 0; b < cache.seq_out.size(); ++b) {
    dseq[b] = Mat<T>::Zero(cache.seq_out[b].rows(), cache.seq_out[b].cols());
  }
  return dseq;
}

struct GatherIndex {
  int example = 0;
  int position = 0;
  int label = 0;
};

// MLM head shared by the loss-only and backward paths. Fills gathered rows,
// transform activations and logits for all masked positions in the batch.
template <typename T>
struct MlmForward {
  std::vector<GatherIndex> where;
  Mat<T> gathered;   // M x H input rows
  Mat<T> pre;        // M x H transform pre-activation
  Mat<T> act;        // M x H gelu
  Mat<T> normed;     // M x H after layer norm
  Vec<T> ln_mean, ln_inv_std;
  Mat<T> probs;      // M x V softmax
  T loss = T(0);
  int64_t correct = 0;
};

template <typename T>
MlmForward<T> mlm_forward(const Encoder<T>& enc, const ForwardCache<T>& cache,
                          const EncodedBatch& batch) {
  const auto& cfg = enc.config();
  const auto& p = enc.params();
  MlmForward<T> out;
  for (int b = 0; b < batch.batch_size(); ++b) {
    const auto& positions = batch.mlm_positions[static_cast<size_t>(b)];
    const auto& labels = batch.mlm_labels[static_cast<size_t>(b)];
    if (positions.size() != labels.size()) {
      throw DimensionError("mlm_positions and mlm_labels lengths differ in example " +
                           std::to_string(b));
    }
    for (size_t j = 0; j < positions.size(); ++j) {
      int pos = positions[j];
      int label = labels[j];
      if (pos < 0 || pos >= batch.seq_len) {
        throw DimensionError("mlm position " + std::to_string(pos) + " outside sequence");
      }
      if (label < 0 || label >= cfg.vocab_size) {
        throw DimensionError("mlm label " + std::to_string(label) + " outside vocabulary");
      }
      out.where.push_back({b, pos, label});
    }
  }
  if (out.where.empty()) throw DataError("mlm loss with zero masked positions");

  int64_t m = static_cast<int64_t>(out.where.size());
  out.gathered.resize(m, cfg.hidden_size);
  for (int64_t j = 0; j < m; ++j) {
    out.gathered.row(j) =
        cache.seq_out[static_cast<size_t>(out.where[static_cast<size_t>(j)].example)].row(
            out.where[static_cast<size_t>(j)].position);
  }
  out.pre = (out.gathered * p.mlm_w).rowwise() + p.mlm_b.transpose();
  out.act = out.pre.unaryExpr([](T v) { return gelu_scalar(v); });
  layer_norm_forward(out.act, p.mlm_ln_gain, p.mlm_ln_bias, out.normed, out.ln_mean,
                     out.ln_inv_std);

  Mat<T> logits = (out.normed * p.tok_emb.transpose()).rowwise() + p.mlm_out_bias.transpose();
  out.probs.resize(m, cfg.vocab_size);
  T total = T(0);
  for (int64_t j = 0; j < m; ++j) {
    Eigen::Matrix<T, 1, Eigen::Dynamic> probs_row;
    total += softmax_xent_row<T>(logits.row(j), out.where[static_cast<size_t>(j)].label, probs_row);
    out.probs.row(j) = probs_row;
    int argmax = 0;
    logits.row(j).maxCoeff(&argmax);
    if (argmax == out.where[static_cast<size_t>(j)].label) out.correct += 1;
  }
  out.loss = total / static_cast<T>(m);
  return out;
}

// SOP head shared paths.
template <typename T>
struct SopForward {
  Mat<T> probs;  // B x 2
  T loss = T(0);
  int64_t correct = 0;
};

template <typename T>
SopForward<T> sop_forward(const Encoder<T>& enc, const ForwardCache<T>& cache,
                          const EncodedBatch& batch) {
  const auto& p = enc.params();
  int batch_size = batch.batch_size();
  if (static_cast<int>(batch.sop_labels.size()) != batch_size) {
    throw DimensionError("sop_labels length != batch size");
  }
  SopForward<T> out;
  Mat<T> logits = (cache.pooled * p.sop_w).rowwise() + p.sop_b.transpose();
  out.probs.resize(batch_size, 2);
  T total = T(0);
  for (int b = 0; b < batch_size; ++b) {
    int label = batch.sop_labels[static_cast<size_t>(b)];
    if (label < 0 || label > 1) throw DimensionError("sop label must be 0 or 1");
    Eigen::Matrix<T, 1, Eigen::Dynamic> probs_row;
    total += softmax_xent_row<T>(logits.row(b), label, probs_row);
    out.probs.row(b) = probs_row;
    int argmax = 0;
    logits.row(b).maxCoeff(&argmax);
    if (argmax == label) out.correct += 1;
  }
  out.loss = total / static_cast<T>(batch_size);
  return out;
}

}  // namespace

template <typename T>
LossOut<T> mlm_loss_value(const Encoder<T>& enc, const ForwardCache<T>& cache,
                          const EncodedBatch& batch) {
  auto fwd = mlm_forward(enc, cache, batch);
  return {fwd.loss, static_cast<int64_t>(fwd.where.size()), fwd.correct};
}

template <typename T>
LossOut<T> sop_loss_value(const Encoder<T>& enc, const ForwardCache<T>& cache,
                          const EncodedBatch& batch) {
  auto fwd = sop_forward(enc, cache, batch);
  return {fwd.loss, batch.batch_size(), fwd.correct};
}

template <typename T>
PretrainLoss<T> pretrain_step(const Encoder<T>& enc, const EncodedBatch& batch,
                              ForwardCache<T>& cache, Parameters<T>* grads, Dropout* dropout,
                              T mlm_weight, T sop_weight, const BackwardOptions& options) {
  enc.forward(batch, cache, dropout);
  auto mlm = mlm_forward(enc, cache, batch);
  auto sop = sop_forward(enc, cache, batch);

  PretrainLoss<T> result;
  result.mlm = {mlm.loss, static_cast<int64_t>(mlm.where.size()), mlm.correct};
  result.sop = {sop.loss, batch.batch_size(), sop.correct};
  if (grads == nullptr) return result;

  const auto& p = enc.params();
  int64_t m = static_cast<int64_t>(mlm.where.size());

  // MLM head backward.
  Mat<T> dlogits = mlm.probs;
  for (int64_t j = 0; j < m; ++j) {
    dlogits(j, mlm.where[static_cast<size_t>(j)].label) -= T(1);
  }
  dlogits *= mlm_weight / static_cast<T>(m);

  Mat<T> dnormed = dlogits * p.tok_emb;
  if (!options.freeze_token_embeddings) grads->tok_emb += dlogits.transpose() * mlm.normed;
  grads->mlm_out_bias += dlogits.colwise().sum().transpose();

  Mat<T> dact = layer_norm_backward(dnormed, mlm.act, mlm.ln_mean, mlm.ln_inv_std, p.mlm_ln_gain,
                                    grads->mlm_ln_gain, grads->mlm_ln_bias);
  Mat<T> dpre =
      (dact.array() * mlm.pre.unaryExpr([](T v) { return gelu_grad_scalar(v); }).array()).matrix();
  grads->mlm_w += mlm.gathered.transpose() * dpre;
  grads->mlm_b += dpre.colwise().sum().transpose();
  Mat<T> dgathered = dpre * p.mlm_w.transpose();

  auto dseq = zero_dseq(cache);
  for (int64_t j = 0; j < m; ++j) {
    const auto& idx = mlm.where[static_cast<size_t>(j)];
    dseq[static_cast<size_t>(idx.example)].row(idx.position) += dgathered.row(j);
  }

  // SOP head backward.
  Mat<T> dz = sop.probs;
  for (int b = 0; b < batch.batch_size(); ++b) {
    dz(b, batch.sop_labels[static_cast<size_t>(b)]) -= T(1);
  }
  dz *= sop_weight / static_cast<T>(batch.batch_size());
  grads->sop_w += cache.pooled.transpose() * dz;
  grads->sop_b += dz.colwise().sum().transpose();
  Mat<T> dpooled = dz * p.sop_w.transpose();

  encoder_backward(enc, batch, cache, dseq, dpooled, *grads, options);
  return result;
}

template <typename T>
LossOut<T> token_classification_step(const Encoder<T>& enc, ClassifierHead<T>& head,
                                     const EncodedBatch& batch, ForwardCache<T>& cache,
                                     Parameters<T>* grads, ClassifierHead<T>* head_grads,
                                     Dropout* dropout,
                                     std::vector<std::vector<int>>* predictions) {
  enc.forward(batch, cache, dropout);
  int num_labels = static_cast<int>(head.w.cols());
  int64_t count = 0;
  for (const auto& labels : batch.token_labels) {
    for (int l : labels) {
      if (l >= 0) ++count;
    }
  }
  if (count == 0) throw DataError("token classification loss with an empty label mask");

  if (predictions) predictions->assign(static_cast<size_t>(batch.batch_size()), {});
  LossOut<T> out;
  out.count = count;
  auto dseq = zero_dseq(cache);
  T total = T(0);
  for (int b = 0; b < batch.batch_size(); ++b) {
    const auto& labels = batch.token_labels[static_cast<size_t>(b)];
    if (static_cast<int>(labels.size()) != batch.seq_len) {
      throw DimensionError("token_labels length != seq_len in example " + std::to_string(b));
    }
    Mat<T> logits =
        (cache.seq_out[static_cast<size_t>(b)] * head.w).rowwise() + head.b.transpose();
    Mat<T> dlogits = Mat<T>::Zero(logits.rows(), logits.cols());
    if (predictions) {
      (*predictions)[static_cast<size_t>(b)].assign(static_cast<size_t>(batch.seq_len), -1);
    }
    for (int t = 0; t < batch.seq_len; ++t) {
      int label = labels[static_cast<size_t>(t)];
      if (label < 0) continue;
      if (label >= num_labels) {
        throw DimensionError("token label " + std::to_string(label) + " outside head");
      }
      Eigen::Matrix<T, 1, Eigen::Dynamic> probs_row;
      total += softmax_xent_row<T>(logits.row(t), label, probs_row);
      int argmax = 0;
      logits.row(t).maxCoeff(&argmax);
      if (argmax == label) out.correct += 1;
      if (predictions) (*predictions)[static_cast<size_t>(b)][static_cast<size_t>(t)] = argmax;
      if (grads || head_grads) {
        probs_row(label) -= T(1);
        dlogits.row(t) = probs_row / static_cast<T>(count);
      }
    }
    if (head_grads) {
      head_grads->w += cache.seq_out[static_cast<size_t>(b)].transpose() * dlogits;
      head_grads->b += dlogits.colwise().sum().transpose();
    }
    if (grads) dseq[static_cast<size_t>(b)] += dlogits * head.w.transpose();
  }
  out.loss = total / static_cast<T>(count);
  if (grads) {
    Mat<T> dpooled;
    encoder_backward(enc, batch, cache, dseq, dpooled, *grads, {});
  }
  return out;
}

template <typename T>
LossOut<T> sequence_classification_step(const Encoder<T>& enc, ClassifierHead<T>& head,
                                        const EncodedBatch& batch, ForwardCache<T>& cache,
                                        Parameters<T>* grads, ClassifierHead<T>* head_grads,
                                        Dropout* dropout, std::vector<int>* predictions) {
  enc.forward(batch, cache, dropout);
  int batch_size = batch.batch_size();
  int num_labels = static_cast<int>(head.w.cols());
  if (static_cast<int>(batch.seq_labels.size()) != batch_size) {
    throw DimensionError("seq_labels length != batch size");
  }
  if (predictions) predictions->assign(static_cast<size_t>(batch_size), -1);

  Mat<T> logits = (cache.pooled * head.w).rowwise() + head.b.transpose();
  Mat<T> dlogits = Mat<T>::Zero(batch_size, num_labels);
  LossOut<T> out;
  out.count = batch_size;
  T total = T(0);
  for (int b = 0; b < batch_size; ++b) {
    int label = batch.seq_labels[static_cast<size_t>(b)];
    if (label < 0 || label >= num_labels) {
      throw DimensionError("sequence label " + std::to_string(label) + " outside head");
    }
    Eigen::Matrix<T, 1, Eigen::Dynamic> probs_row;
    total += softmax_xent_row<T>(logits.row(b), label, probs_row);
    int argmax = 0;
    logits.row(b).maxCoeff(&argmax);
    if (argmax == label) out.correct += 1;
    if (predictions) (*predictions)[static_cast<size_t>(b)] = argmax;
    if (grads || head_grads) {
      probs_row(label) -= T(1);
      dlogits.row(b) = probs_row / static_cast<T>(batch_size);
    }
  }
  out.loss = total / static_cast<T>(batch_size);
  if (head_grads) {
    head_grads->w += cache.pooled.transpose() * dlogits;
    head_grads->b += dlogits.colwise().sum().transpose();
  }
  if (grads) {
    auto dseq = zero_dseq(cache);
    Mat<T> dpooled = dlogits * head.w.transpose();
    encoder_backward(enc, batch, cache, dseq, dpooled, *grads, {});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

void write_bytes(std::ofstream& out, const void* data, size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename V>
void write_pod(std::ofstream& out, V value) {
  write_bytes(out, &value, sizeof(V));
}

void read_bytes(std::ifstream& in, void* data, size_t n, const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("truncated checkpoint: " + path);
}

template <typename V>
V read_pod(std::ifstream& in, const std::string& path) {
  V value;
  read_bytes(in, &value, sizeof(V), path);
  return value;
}

void write_tensor(std::ofstream& out, const std::string& name, const TensorView<float>& view) {
  uint16_t name_len = static_cast<uint16_t>(name.size());
  write_pod(out, name_len);
  write_bytes(out, name.data(), name.size());
  write_pod<uint8_t>(out, 2);
  write_pod<uint64_t>(out, static_cast<uint64_t>(view.rows));
  write_pod<uint64_t>(out, static_cast<uint64_t>(view.cols));
  write_bytes(out, view.data, sizeof(float) * static_cast<size_t>(view.size()));
}

constexpr uint8_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);

  ordered_json header;
  header["step"] = ckpt.step;
  header["config"] = ordered_json::parse(ckpt.config.to_json());
  header["has_optimizer"] = ckpt.has_optimizer;
  header["adam_t"] = ckpt.adam_t;
  header["train_seed"] = std::to_string(ckpt.train_seed);
  std::string header_text = header.dump();

  write_pod(out, kCheckpointVersion);
  write_pod<uint64_t>(out, header_text.size());
  write_bytes(out, header_text.data(), header_text.size());

  auto& params = const_cast<Parameters<float>&>(ckpt.params);
  auto views = registry(params);
  uint32_t count = static_cast<uint32_t>(views.size());
  std::vector<std::pair<std::string, TensorView<float>>> all;
  for (auto& v : views) all.emplace_back(v.name, v);
  if (ckpt.has_optimizer) {
    auto& m = const_cast<Parameters<float>&>(ckpt.adam_m);
    auto& v = const_cast<Parameters<float>&>(ckpt.adam_v);
    for (auto& view : registry(m)) all.emplace_back("adam_m/" + view.name, view);
    for (auto& view : registry(v)) all.emplace_back("adam_v/" + view.name, view);
    count = static_cast<uint32_t>(all.size());
  }
  write_pod(out, count);
  for (auto& [name, view] : all) write_tensor(out, name, view);
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);

  uint8_t version = read_pod<uint8_t>(in, path);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  uint64_t header_len = read_pod<uint64_t>(in, path);
  std::string header_text(header_len, '\0');
  read_bytes(in, header_text.data(), header_len, path);
  ordered_json header = ordered_json::parse(header_text);

  Checkpoint ckpt;
  ckpt.step = header.at("step").get<int64_t>();
  ckpt.config = ModelConfig::from_json(header.at("config").dump());
  ckpt.has_optimizer = header.at("has_optimizer").get<bool>();
  ckpt.adam_t = header.at("adam_t").get<int64_t>();
  ckpt.train_seed = std::stoull(header.at("train_seed").get<std::string>());

  ckpt.params = zero_parameters<float>(ckpt.config);
  if (ckpt.has_optimizer) {
    ckpt.adam_m = zero_parameters<float>(ckpt.config);
    ckpt.adam_v = zero_parameters<float>(ckpt.config);
  }

  std::map<std::string, TensorView<float>> by_name;
  for (auto& view : registry(ckpt.params)) by_name[view.name] = view;
  if (ckpt.has_optimizer) {
    for (auto& view : registry(ckpt.adam_m)) by_name["adam_m/" + view.name] = view;
    for (auto& view : registry(ckpt.adam_v)) by_name["adam_v/" + view.name] = view;
  }

  uint32_t count = read_pod<uint32_t>(in, path);
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = read_pod<uint16_t>(in, path);
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len, path);
    uint8_t rank = read_pod<uint8_t>(in, path);
    if (rank != 2) throw FormatError("unexpected tensor rank in " + path);
    uint64_t rows = read_pod<uint64_t>(in, path);
    uint64_t cols = read_pod<uint64_t>(in, path);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("unknown tensor " + name + " in " + path);
    if (static_cast<uint64_t>(it->second.rows) != rows ||
        static_cast<uint64_t>(it->second.cols) != cols) {
      throw FormatError("shape mismatch for tensor " + name + " in " + path);
    }
    read_bytes(in, it->second.data, sizeof(float) * rows * cols, path);
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Gradient check

std::string GradCheckReport::to_text() const {
  std::string out = passed ? "gradient check PASSED" : "gradient check FAILED";
  out += " (" + std::to_string(num_checked) + " coordinates, max rel error " +
         std::to_string(max_rel_error) + ")\n";
  for (const auto& c : worst) {
    out += "  " + c.tensor + "[" + std::to_string(c.index) + "] analytic " +
           std::to_string(c.analytic) + " numeric " + std::to_string(c.numeric) + " rel " +
           std::to_string(c.rel_error) + "\n";
  }
  return out;
}

GradCheckReport gradient_check(const ModelConfig& config, const GradCheckOptions& options) {
  ModelConfig cfg = config;
  cfg.dropout_rate = 0.0;
  Encoder<double> enc(cfg);
  enc.init(options.seed);

  // A small deterministic batch: one full-length example and one padded.
  SplitMix64 rng(stream_key(options.seed, "gradcheck_batch", 0));
  EncodedBatch batch;
  int seq = cfg.max_seq_len;
  batch.seq_len = seq;
  auto rand_id = [&]() { return 5 + static_cast<int>(rng.next_below(static_cast<uint64_t>(cfg.vocab_size - 5))); };
  for (int b = 0; b < 2; ++b) {
    int content = b == 0 ? seq : seq - 3;
    std::vector<int> ids(static_cast<size_t>(seq), 0), segs(static_cast<size_t>(seq), 0),
        amask(static_cast<size_t>(seq), 0);
    int sep1 = content / 2;
    for (int t = 0; t < content; ++t) {
      ids[static_cast<size_t>(t)] = rand_id();
      segs[static_cast<size_t>(t)] = t <= sep1 ? 0 : 1;
      amask[static_cast<size_t>(t)] = 1;
    }
    ids[0] = 2;                                      // [CLS]
    ids[static_cast<size_t>(sep1)] = 3;              // [SEP]
    ids[static_cast<size_t>(content - 1)] = 3;       // [SEP]
    batch.input_ids.push_back(ids);
    batch.segment_ids.push_back(segs);
    batch.attention_mask.push_back(amask);
    std::vector<int> positions, labels;
    for (int j = 0; j < 3; ++j) {
      int pos = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(sep1 - 1)));
      positions.push_back(pos);
      labels.push_back(rand_id());
    }
    batch.mlm_positions.push_back(positions);
    batch.mlm_labels.push_back(labels);
    batch.sop_labels.push_back(b % 2);
  }

  auto grads = zero_parameters<double>(cfg);
  ForwardCache<double> cache;
  pretrain_step<double>(enc, batch, cache, &grads, nullptr);

  auto param_views = registry(enc.params());
  auto grad_views = registry(grads);
  int64_t total = 0;
  for (const auto& v : param_views) total += v.size();

  auto loss_at = [&]() {
    ForwardCache<double> scratch;
    auto result = pretrain_step<double>(enc, batch, scratch, nullptr, nullptr);
    return result.mlm.loss + result.sop.loss;
  };

  // With a corruption target configured, sample inside that tensor so the
  // harness sanity test is exact.
  int64_t corrupt_offset = -1, corrupt_size = 0;
  if (!options.corrupt_tensor.empty()) {
    int64_t offset = 0;
    for (const auto& v : param_views) {
      if (v.name == options.corrupt_tensor) {
        corrupt_offset = offset;
        corrupt_size = v.size();
        break;
      }
      offset += v.size();
    }
    if (corrupt_offset < 0) throw ConfigError("unknown tensor: " + options.corrupt_tensor);
  }

  SplitMix64 pick(stream_key(options.seed, "gradcheck_coords", 0));
  GradCheckReport report;
  report.num_checked = options.num_coords;
  for (int c = 0; c < options.num_coords; ++c) {
    int64_t flat;
    if (corrupt_offset >= 0) {
      flat = corrupt_offset + static_cast<int64_t>(pick.next_below(static_cast<uint64_t>(corrupt_size)));
    } else {
      flat = static_cast<int64_t>(pick.next_below(static_cast<uint64_t>(total)));
    }
    size_t tensor_idx = 0;
    while (flat >= param_views[tensor_idx].size()) {
      flat -= param_views[tensor_idx].size();
      ++tensor_idx;
    }
    auto& view = param_views[tensor_idx];
    double saved = view.data[flat];
    view.data[flat] = saved + options.step;
    double plus = loss_at();
    view.data[flat] = saved - options.step;
    double minus = loss_at();
    view.data[flat] = saved;

    double numeric = (plus - minus) / (2.0 * options.step);
    double analytic = grad_views[tensor_idx].data[flat];
    if (view.name == options.corrupt_tensor) analytic *= options.corrupt_factor;
    double rel = std::abs(analytic - numeric) /
                 std::max({1.0, std::abs(analytic), std::abs(numeric)});

    GradCheckCoord coord{view.name, flat, analytic, numeric, rel};
    report.worst.push_back(coord);
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  std::sort(report.worst.begin(), report.worst.end(),
            [](const GradCheckCoord& a, const GradCheckCoord& b) { return a.rel_error > b.rel_error; });
  if (report.worst.size() > 10) report.worst.resize(10);
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

template struct ClassifierHead<float>;
template struct ClassifierHead<double>;
template class Encoder<float>;
template class Encoder<double>;

template Parameters<float> zero_parameters<float>(const ModelConfig&);
template Parameters<double> zero_parameters<double>(const ModelConfig&);
template void init_parameters<float>(Parameters<float>&, uint64_t);
template void init_parameters<double>(Parameters<double>&, uint64_t);
template std::vector<TensorView<float>> registry(Parameters<float>&);
template std::vector<TensorView<double>> registry(Parameters<double>&);
template std::vector<TensorView<float>> registry(ClassifierHead<float>&);
template std::vector<TensorView<double>> registry(ClassifierHead<double>&);

template LossOut<float> mlm_loss_value(const Encoder<float>&, const ForwardCache<float>&,
                                       const EncodedBatch&);
template LossOut<double> mlm_loss_value(const Encoder<double>&, const ForwardCache<double>&,
                                        const EncodedBatch&);
template LossOut<float> sop_loss_value(const Encoder<float>&, const ForwardCache<float>&,
                                       const EncodedBatch&);
template LossOut<double> sop_loss_value(const Encoder<double>&, const ForwardCache<double>&,
                                        const EncodedBatch&);
template PretrainLoss<float> pretrain_step(const Encoder<float>&, const EncodedBatch&,
                                           ForwardCache<float>&, Parameters<float>*, Dropout*,
                                           float, float, const BackwardOptions&);
template PretrainLoss<double> pretrain_step(const Encoder<double>&, const EncodedBatch&,
                                            ForwardCache<double>&, Parameters<double>*, Dropout*,
                                            double, double, const BackwardOptions&);
template LossOut<float> token_classification_step(const Encoder<float>&, ClassifierHead<float>&,
                                                  const EncodedBatch&, ForwardCache<float>&,
                                                  Parameters<float>*, ClassifierHead<float>*,
                                                  Dropout*, std::vector<std::vector<int>>*);
template LossOut<double> token_classification_step(const Encoder<double>&, ClassifierHead<double>&,
                                                   const EncodedBatch&, ForwardCache<double>&,
                                                   Parameters<double>*, ClassifierHead<double>*,
                                                   Dropout*, std::vector<std::vector<int>>*);
template LossOut<float> sequence_classification_step(const Encoder<float>&, ClassifierHead<float>&,
                                                     const EncodedBatch&, ForwardCache<float>&,
                                                     Parameters<float>*, ClassifierHead<float>*,
                                                     Dropout*, std::vector<int>*);
template LossOut<double> sequence_classification_step(const Encoder<double>&,
                                                      ClassifierHead<double>&, const EncodedBatch&,
                                                      ForwardCache<double>&, Parameters<double>*,
                                                      ClassifierHead<double>*, Dropout*,
                                                      std::vector<int>*);

}  // namespace bertkit
