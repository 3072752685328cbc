#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "bertkit/errors.hpp"
#include "bertkit/model.hpp"
#include "bertkit/vocab.hpp"

using namespace bertkit;

namespace {

ModelConfig tiny_config() {
  ModelConfig config;
  config.num_layers = 1;
  config.hidden_size = 8;
  config.num_heads = 2;
  config.intermediate_size = 16;
  config.max_seq_len = 12;
  config.vocab_size = 23;
  config.dropout_rate = 0.0;
  return config;
}

ModelConfig small_config(int vocab = 101) {
  ModelConfig config;
  config.num_layers = 2;
  config.hidden_size = 64;
  config.num_heads = 2;
  config.intermediate_size = 256;
  config.max_seq_len = 16;
  config.vocab_size = vocab;
  config.dropout_rate = 0.0;
  return config;
}

void add_example(EncodedBatch& batch, int content, SplitMix64& rng, int vocab_size) {
  int seq = batch.seq_len;
  std::vector<int> ids(static_cast<size_t>(seq), 0), segs(static_cast<size_t>(seq), 0),
      amask(static_cast<size_t>(seq), 0);
  int sep1 = content / 2;
  for (int t = 0; t < content; ++t) {
    ids[static_cast<size_t>(t)] =
        5 + static_cast<int>(rng.next_below(static_cast<uint64_t>(vocab_size - 5)));
    segs[static_cast<size_t>(t)] = t <= sep1 ? 0 : 1;
    amask[static_cast<size_t>(t)] = 1;
  }
  ids[0] = Vocabulary::kCls;
  ids[static_cast<size_t>(sep1)] = Vocabulary::kSep;
  ids[static_cast<size_t>(content - 1)] = Vocabulary::kSep;
  batch.input_ids.push_back(ids);
  batch.segment_ids.push_back(segs);
  batch.attention_mask.push_back(amask);
}

EncodedBatch pretrain_batch(const ModelConfig& config, int batch_size, uint64_t seed,
                            int pad_last = 3) {
  SplitMix64 rng(seed);
  EncodedBatch batch;
  batch.seq_len = config.max_seq_len;
  for (int b = 0; b < batch_size; ++b) {
    int content = config.max_seq_len - (b == batch_size - 1 ? pad_last : 0);
    add_example(batch, content, rng, config.vocab_size);
    std::vector<int> positions, labels;
    int sep1 = content / 2;
    for (int j = 0; j < 2; ++j) {
      positions.push_back(1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(sep1 - 1))));
      labels.push_back(
          5 + static_cast<int>(rng.next_below(static_cast<uint64_t>(config.vocab_size - 5))));
    }
    batch.mlm_positions.push_back(positions);
    batch.mlm_labels.push_back(labels);
    batch.sop_labels.push_back(b % 2);
  }
  return batch;
}

}  // namespace

TEST_CASE("model config validation and json") {
  ModelConfig bad = tiny_config();
  bad.hidden_size = 9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.vocab_size = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.max_seq_len = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  auto back = ModelConfig::from_json(tiny_config().to_json());
  CHECK(back.hidden_size == 8);
  CHECK(back.vocab_size == 23);

  // the paper-scale shape stays constructible
  ModelConfig base;
  base.num_layers = 12;
  base.hidden_size = 768;
  base.num_heads = 12;
  base.intermediate_size = 3072;
  base.max_seq_len = 512;
  base.vocab_size = 30000;
  base.validate();
  auto params = zero_parameters<float>(base);
  CHECK(params.layers.size() == 12);
  CHECK(params.tok_emb.rows() == 30000);
}

TEST_CASE("forward shape contract and purity") {
  auto config = small_config();
  Encoder<float> enc(config);
  enc.init(1);
  auto batch = pretrain_batch(config, 2, 5);

  ForwardCache<float> cache;
  enc.forward(batch, cache, nullptr);
  REQUIRE(cache.seq_out.size() == 2);
  CHECK(cache.seq_out[0].rows() == 16);
  CHECK(cache.seq_out[0].cols() == 64);
  CHECK(cache.pooled.rows() == 2);
  CHECK(cache.pooled.cols() == 64);

  ForwardCache<float> cache2;
  enc.forward(batch, cache2, nullptr);
  CHECK((cache.seq_out[0] - cache2.seq_out[0]).norm() == 0.0f);
  CHECK((cache.pooled - cache2.pooled).norm() == 0.0f);
}

TEST_CASE("attention rows: pads get zero, valid keys sum to one") {
  auto config = small_config();
  Encoder<float> enc(config);
  enc.init(2);
  auto batch = pretrain_batch(config, 2, 6, 5);  // last example has 5 pads

  ForwardCache<float> cache;
  enc.forward(batch, cache, nullptr);
  int seq = config.max_seq_len;
  for (int b = 0; b < 2; ++b) {
    const auto& amask = batch.attention_mask[static_cast<size_t>(b)];
    for (size_t l = 0; l < cache.layers[static_cast<size_t>(b)].size(); ++l) {
      for (const auto& probs : cache.layers[static_cast<size_t>(b)][l].probs) {
        for (int r = 0; r < seq; ++r) {
          float pad_sum = 0.0f, valid_sum = 0.0f;
          for (int c = 0; c < seq; ++c) {
            if (amask[static_cast<size_t>(c)] == 0)
              pad_sum += probs(r, c);
            else
              valid_sum += probs(r, c);
          }
          CHECK(pad_sum == 0.0f);
          CHECK(valid_sum == doctest::Approx(1.0f).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("forward is permutation-equivariant over the batch") {
  auto config = small_config();
  Encoder<float> enc(config);
  enc.init(3);
  auto batch = pretrain_batch(config, 3, 7);

  EncodedBatch swapped = batch;
  std::swap(swapped.input_ids[0], swapped.input_ids[2]);
  std::swap(swapped.segment_ids[0], swapped.segment_ids[2]);
  std::swap(swapped.attention_mask[0], swapped.attention_mask[2]);

  ForwardCache<float> a, b;
  enc.forward(batch, a, nullptr);
  enc.forward(swapped, b, nullptr);
  CHECK((a.seq_out[0] - b.seq_out[2]).norm() == 0.0f);
  CHECK((a.seq_out[2] - b.seq_out[0]).norm() == 0.0f);
  CHECK((a.pooled.row(1) - b.pooled.row(1)).norm() == 0.0f);
}

TEST_CASE("shape mismatches raise dimension errors") {
  auto config = small_config();
  Encoder<float> enc(config);
  enc.init(4);
  auto batch = pretrain_batch(config, 1, 8);
  batch.input_ids[0].pop_back();
  ForwardCache<float> cache;
  CHECK_THROWS_AS(enc.forward(batch, cache, nullptr), DimensionError);

  auto bad_ids = pretrain_batch(config, 1, 8);
  bad_ids.input_ids[0][3] = config.vocab_size + 5;
  CHECK_THROWS_AS(enc.forward(bad_ids, cache, nullptr), DimensionError);
}

TEST_CASE("mlm loss: uniform logits give ln(V), concentration gives ~0") {
  auto config = tiny_config();
  Encoder<float> enc(config);  // zero parameters: all logits zero = uniform
  auto batch = pretrain_batch(config, 2, 9);
  ForwardCache<float> cache;
  enc.forward(batch, cache, nullptr);
  auto out = mlm_loss_value(enc, cache, batch);
  CHECK(out.loss == doctest::Approx(std::log(23.0)).epsilon(1e-6));

  // single masked position, output bias concentrated on its label
  EncodedBatch one = pretrain_batch(config, 1, 9);
  one.mlm_positions[0] = {2};
  one.mlm_labels[0] = {7};
  enc.params().mlm_out_bias(7) = 50.0f;
  enc.forward(one, cache, nullptr);
  auto low = mlm_loss_value(enc, cache, one);
  CHECK(low.loss < 1e-4f);
  enc.params().mlm_out_bias(7) = 0.0f;

  EncodedBatch empty = pretrain_batch(config, 1, 9);
  empty.mlm_positions[0].clear();
  empty.mlm_labels[0].clear();
  enc.forward(empty, cache, nullptr);
  CHECK_THROWS_AS(mlm_loss_value(enc, cache, empty), DataError);
}

TEST_CASE("initial mlm loss near ln(vocab) under random init") {
  auto config = small_config(101);
  Encoder<float> enc(config);
  enc.init(11);
  auto batch = pretrain_batch(config, 8, 10);
  ForwardCache<float> cache;
  enc.forward(batch, cache, nullptr);
  auto out = mlm_loss_value(enc, cache, batch);
  CHECK(std::abs(out.loss - std::log(101.0)) < 0.3);
}

TEST_CASE("sop loss: uniform gives ln 2, flip symmetry holds") {
  auto config = tiny_config();
  Encoder<float> enc(config);
  auto batch = pretrain_batch(config, 4, 12);
  ForwardCache<float> cache;
  enc.forward(batch, cache, nullptr);
  auto uniform = sop_loss_value(enc, cache, batch);
  CHECK(uniform.loss == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  enc.init(13);
  enc.forward(batch, cache, nullptr);
  auto base = sop_loss_value(enc, cache, batch);

  enc.params().sop_w.col(0).swap(enc.params().sop_w.col(1));
  std::swap(enc.params().sop_b(0), enc.params().sop_b(1));
  EncodedBatch flipped = batch;
  for (auto& l : flipped.sop_labels) l = 1 - l;
  enc.forward(flipped, cache, nullptr);
  auto flip = sop_loss_value(enc, cache, flipped);
  CHECK(flip.loss == doctest::Approx(base.loss).epsilon(1e-6));
}

TEST_CASE("token classification loss: ln(K) at uniform, errors on empty mask") {
  auto config = tiny_config();
  Encoder<float> enc(config);
  auto head = ClassifierHead<float>::zero(config.hidden_size, 5);
  auto batch = pretrain_batch(config, 1, 14);
  batch.token_labels.assign(1, std::vector<int>(static_cast<size_t>(config.max_seq_len), -1));
  batch.token_labels[0][3] = 2;
  ForwardCache<float> cache;
  auto out = token_classification_step<float>(enc, head, batch, cache, nullptr, nullptr, nullptr);
  CHECK(out.loss == doctest::Approx(std::log(5.0)).epsilon(1e-6));

  batch.token_labels[0][3] = -1;
  CHECK_THROWS_AS(
      token_classification_step<float>(enc, head, batch, cache, nullptr, nullptr, nullptr),
      DataError);

  // argmax equals labels everywhere: loss below uniform, accuracy 1
  auto head2 = ClassifierHead<float>::zero(config.hidden_size, 5);
  head2.b(2) = 8.0f;
  batch.token_labels[0][3] = 2;
  batch.token_labels[0][5] = 2;
  auto good = token_classification_step<float>(enc, head2, batch, cache, nullptr, nullptr, nullptr);
  CHECK(good.loss < std::log(5.0));
  CHECK(good.correct == good.count);
}

TEST_CASE("gradient check passes on the tiny config") {
  GradCheckOptions options;
  options.num_coords = 200;
  options.tolerance = 1e-4;
  auto report = gradient_check(tiny_config(), options);
  INFO(report.to_text());
  CHECK(report.passed);
  CHECK(report.num_checked >= 200);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("gradient check catches a gradient off by 10%") {
  GradCheckOptions options;
  options.num_coords = 50;
  options.corrupt_tensor = "mlm_out_bias";
  options.corrupt_factor = 1.1;
  auto report = gradient_check(tiny_config(), options);
  CHECK_FALSE(report.passed);

  options.corrupt_tensor = "no_such_tensor";
  CHECK_THROWS_AS(gradient_check(tiny_config(), options), ConfigError);
}

TEST_CASE("zero-loss batch raises, not a silent pass") {
  auto config = tiny_config();
  Encoder<double> enc(config);
  enc.init(1);
  auto batch = pretrain_batch(config, 1, 15);
  batch.mlm_positions[0].clear();
  batch.mlm_labels[0].clear();
  ForwardCache<double> cache;
  auto grads = zero_parameters<double>(config);
  CHECK_THROWS_AS(pretrain_step<double>(enc, batch, cache, &grads, nullptr), DataError);
}

TEST_CASE("frozen embeddings receive zero gradient") {
  auto config = tiny_config();
  Encoder<double> enc(config);
  enc.init(21);
  auto batch = pretrain_batch(config, 2, 16);
  ForwardCache<double> cache;

  auto grads = zero_parameters<double>(config);
  BackwardOptions options;
  options.freeze_token_embeddings = true;
  pretrain_step<double>(enc, batch, cache, &grads, nullptr, 1.0, 1.0, options);
  CHECK(grads.tok_emb.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.pos_emb.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("doubling the loss weights doubles every gradient") {
  auto config = tiny_config();
  Encoder<double> enc(config);
  enc.init(22);
  auto batch = pretrain_batch(config, 2, 17);
  ForwardCache<double> cache;

  auto g1 = zero_parameters<double>(config);
  auto g2 = zero_parameters<double>(config);
  pretrain_step<double>(enc, batch, cache, &g1, nullptr, 1.0, 1.0);
  pretrain_step<double>(enc, batch, cache, &g2, nullptr, 2.0, 2.0);

  auto v1 = registry(g1);
  auto v2 = registry(g2);
  double worst = 0.0;
  for (size_t t = 0; t < v1.size(); ++t) {
    for (int64_t i = 0; i < v1[t].size(); ++i) {
      worst = std::max(worst, std::abs(v2[t].data[i] - 2.0 * v1[t].data[i]));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("dropout draws differ by key but repeat for the same key") {
  auto config = small_config();
  config.dropout_rate = 0.1;
  Encoder<float> enc(config);
  enc.init(30);
  auto batch = pretrain_batch(config, 2, 18);

  ForwardCache<float> a, b, c;
  Dropout d1(0.1, 999), d2(0.1, 999), d3(0.1, 1000);
  enc.forward(batch, a, &d1);
  enc.forward(batch, b, &d2);
  enc.forward(batch, c, &d3);
  CHECK((a.seq_out[0] - b.seq_out[0]).norm() == 0.0f);
  CHECK((a.seq_out[0] - c.seq_out[0]).norm() > 0.0f);
}

TEST_CASE("checkpoint round trip is bitwise identical") {
  auto config = small_config();
  Encoder<float> enc(config);
  enc.init(31);

  Checkpoint ckpt;
  ckpt.step = 123;
  ckpt.config = config;
  ckpt.params = enc.params();
  ckpt.has_optimizer = true;
  ckpt.adam_m = zero_parameters<float>(config);
  ckpt.adam_v = zero_parameters<float>(config);
  ckpt.adam_m.tok_emb(0, 0) = 0.5f;
  ckpt.adam_t = 123;
  ckpt.train_seed = 77;

  std::string path = (std::filesystem::temp_directory_path() / "bertkit_ckpt_test.bin").string();
  save_checkpoint(ckpt, path);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.step == 123);
  CHECK(loaded.adam_t == 123);
  CHECK(loaded.train_seed == 77);
  CHECK(loaded.has_optimizer);
  CHECK(loaded.adam_m.tok_emb(0, 0) == 0.5f);

  auto batch = pretrain_batch(config, 2, 19);
  ForwardCache<float> a, b;
  enc.forward(batch, a, nullptr);
  Encoder<float> enc2(loaded.config);
  enc2.params() = loaded.params;
  enc2.forward(batch, b, nullptr);
  for (int r = 0; r < a.seq_out[0].rows(); ++r) {
    for (int c2 = 0; c2 < a.seq_out[0].cols(); ++c2) {
      CHECK(a.seq_out[0](r, c2) == b.seq_out[0](r, c2));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects wrong versions and missing files") {
  std::string path = (std::filesystem::temp_directory_path() / "bertkit_ckpt_bad.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    char version = 9;
    out.write(&version, 1);
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), IoError);
}
