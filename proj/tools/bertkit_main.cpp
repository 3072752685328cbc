// Command-line front end for the pipeline: corpus ingestion through
// pre-training, fine-tuning and evaluation. Every subcommand writes a
// config echo next to its outputs so runs are reproducible.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bertkit/annotations.hpp"
#include "bertkit/corpus.hpp"
#include "bertkit/errors.hpp"
#include "bertkit/metrics.hpp"
#include "bertkit/model.hpp"
#include "bertkit/pretrain.hpp"
#include "bertkit/synthetic.hpp"
#include "bertkit/train.hpp"
#include "bertkit/vocab.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bertkit::IoError("cannot write " + path);
  out << text;
}

// Config echo: resolved option values, no timestamps, so reruns are
// byte-identical.
void write_config_echo(const std::string& anchor, const std::string& subcommand,
                       const ordered_json& options) {
  ordered_json echo;
  echo["subcommand"] = subcommand;
  echo["options"] = options;
  std::string path;
  if (fs::is_directory(anchor)) {
    path = (fs::path(anchor) / "config.json").string();
  } else {
    path = anchor + ".config.json";
  }
  write_text_file(path, echo.dump(2) + "\n");
}

// Usage problems (unknown keys, malformed lines) exit 1 like other CLI
// misuse; they are not data errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Line-based key=value config. Values from the command line win; unknown
// keys are rejected.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string norm = bertkit::normalize_text(line);
    if (norm.empty() || norm[0] == '#') continue;
    size_t eq = norm.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = bertkit::normalize_text(norm.substr(0, eq));
    std::string value = bertkit::normalize_text(norm.substr(eq + 1));
    if (key == "config") throw UsageError("config files cannot nest");
    auto* option = cmd->get_option_no_throw("--" + key);
    if (option == nullptr) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": unknown config key: " + key);
    }
    if (option->count() > 0) continue;  // command line wins
    option->add_result(value);
    option->run_callback();
  }
}

bertkit::LabelPredicate keep_from_list(const std::vector<std::string>& labels) {
  if (labels.empty()) return nullptr;
  std::set<std::string> keep(labels.begin(), labels.end());
  return [keep](const std::string& label) { return keep.count(label) > 0; };
}

std::vector<bertkit::TableRow> read_rows_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bertkit::IoError("cannot read rows file: " + path);
  std::vector<bertkit::TableRow> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 5) {
      throw bertkit::ParseError(path + ":" + std::to_string(line_no) +
                                ": expected 5 tab-separated columns");
    }
    if (line_no == 1 && cols[0] == "model") continue;  // optional header
    try {
      rows.push_back({cols[0], cols[1], cols[2], cols[3], std::stod(cols[4])});
    } catch (const std::exception&) {
      throw bertkit::ParseError(path + ":" + std::to_string(line_no) + ": bad value " + cols[4]);
    }
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale BERT-style pre-training and evaluation pipeline"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* cmd, uint64_t* seed) {
    cmd->add_option("--seed", *seed, "run seed");
    cmd->set_config("--config", "", "key=value config file");
    cmd->allow_config_extras(false);
  };

  // --- ingest ---------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "plaintext -> canonical corpus JSONL");
  std::string ingest_in, ingest_out, ingest_source;
  int ingest_min_sentences = 2;
  double ingest_max_nonletter = 0.2;
  uint64_t ingest_seed = 0;
  ingest->add_option("--in", ingest_in, "UTF-8 plaintext, blank-line document separators")
      ->required();
  ingest->add_option("--out", ingest_out, "output corpus JSONL")->required();
  ingest->add_option("--source", ingest_source, "corpus source tag")->required();
  ingest->add_option("--min-sentences", ingest_min_sentences, "drop shorter documents");
  ingest->add_option("--max-nonletter", ingest_max_nonletter, "drop noisier documents");
  add_common(ingest, &ingest_seed);

  // --- exclude --------------------------------------------------------
  auto* exclude = app.add_subcommand("exclude", "remove documents by id list");
  std::string exclude_in, exclude_ids, exclude_out;
  uint64_t exclude_seed = 0;
  exclude->add_option("--in", exclude_in, "corpus JSONL")->required();
  exclude->add_option("--ids", exclude_ids, "exclusion list, one doc_id per line")->required();
  exclude->add_option("--out", exclude_out, "output corpus JSONL")->required();
  add_common(exclude, &exclude_seed);

  // --- split ----------------------------------------------------------
  auto* split = app.add_subcommand("split", "deterministic 80/10/10 document split");
  std::string split_in, split_prefix;
  uint64_t split_seed = 42;
  split->add_option("--in", split_in, "corpus JSONL")->required();
  split->add_option("--out-prefix", split_prefix, "writes <prefix>.{train,dev,test}.jsonl")
      ->required();
  add_common(split, &split_seed);

  // --- vocab ----------------------------------------------------------
  auto* vocab_cmd = app.add_subcommand("vocab", "induce a WordPiece vocabulary");
  std::string vocab_in, vocab_out;
  int vocab_size = 300;
  bool vocab_lowercase = false;
  uint64_t vocab_seed = 0;
  vocab_cmd->add_option("--in", vocab_in, "corpus JSONL")->required();
  vocab_cmd->add_option("--out", vocab_out, "vocab.txt")->required();
  vocab_cmd->add_option("--size", vocab_size, "target vocabulary size");
  vocab_cmd->add_flag("--lowercase", vocab_lowercase, "lowercase before induction");
  add_common(vocab_cmd, &vocab_seed);

  // --- shards ---------------------------------------------------------
  auto* shards = app.add_subcommand("shards", "SOP pairs + whole-word masking -> shards");
  std::string shards_in, shards_vocab, shards_out;
  int shards_seq_len = 64, shards_size = 1000;
  double shards_mask_rate = 0.15;
  uint64_t shards_seed = 42;
  shards->add_option("--in", shards_in, "corpus JSONL")->required();
  shards->add_option("--vocab", shards_vocab, "vocab.txt")->required();
  shards->add_option("--out-dir", shards_out, "shard directory")->required();
  shards->add_option("--max-seq-len", shards_seq_len, "packed sequence length");
  shards->add_option("--shard-size", shards_size, "examples per shard");
  shards->add_option("--mask-rate", shards_mask_rate, "masked token fraction");
  add_common(shards, &shards_seed);

  // --- pretrain -------------------------------------------------------
  auto* pretrain_cmd = app.add_subcommand("pretrain", "MLM + SOP pre-training");
  std::string pre_shards, pre_out, pre_resume;
  bertkit::TrainConfig pre_train;
  pre_train.learning_rate = 1e-3;
  int pre_layers = 2, pre_hidden = 64, pre_heads = 2, pre_intermediate = 256;
  double pre_dropout = 0.1;
  pretrain_cmd->add_option("--shards", pre_shards, "shard directory or manifest.json")->required();
  pretrain_cmd->add_option("--out-dir", pre_out, "run directory")->required();
  pretrain_cmd->add_option("--steps", pre_train.steps, "training steps");
  pretrain_cmd->add_option("--batch-size", pre_train.batch_size, "examples per step");
  pretrain_cmd->add_option("--learning-rate", pre_train.learning_rate, "peak learning rate");
  pretrain_cmd->add_option("--warmup-steps", pre_train.warmup_steps, "linear warmup steps");
  pretrain_cmd->add_option("--weight-decay", pre_train.weight_decay, "decoupled weight decay");
  pretrain_cmd->add_option("--checkpoint-every", pre_train.checkpoint_every, "checkpoint period");
  pretrain_cmd->add_option("--layers", pre_layers, "transformer blocks");
  pretrain_cmd->add_option("--hidden", pre_hidden, "hidden size");
  pretrain_cmd->add_option("--heads", pre_heads, "attention heads");
  pretrain_cmd->add_option("--intermediate", pre_intermediate, "feed-forward size");
  pretrain_cmd->add_option("--dropout", pre_dropout, "dropout rate");
  pretrain_cmd->add_option("--resume", pre_resume, "checkpoint to resume from");
  add_common(pretrain_cmd, &pre_train.seed);

  // --- finetune -------------------------------------------------------
  auto* finetune_cmd = app.add_subcommand("finetune", "fine-tune a checkpoint on a task");
  std::string ft_checkpoint, ft_task, ft_train_path, ft_dev_path, ft_vocab, ft_out;
  bertkit::TrainConfig ft_train;
  finetune_cmd->add_option("--checkpoint", ft_checkpoint, "pre-trained checkpoint")->required();
  finetune_cmd->add_option("--task", ft_task, "token | sequence")
      ->required()
      ->check(CLI::IsMember({"token", "sequence"}));
  finetune_cmd->add_option("--train", ft_train_path, "CoNLL (token) or JSONL (sequence)")
      ->required();
  finetune_cmd->add_option("--dev", ft_dev_path, "dev set, same format")->required();
  finetune_cmd->add_option("--vocab", ft_vocab, "vocab.txt")->required();
  finetune_cmd->add_option("--out-dir", ft_out, "run directory")->required();
  finetune_cmd->add_option("--epochs", ft_train.epochs, "fine-tuning epochs");
  finetune_cmd->add_option("--batch-size", ft_train.batch_size, "batch size");
  finetune_cmd->add_option("--learning-rate", ft_train.learning_rate, "peak learning rate");
  finetune_cmd->add_option("--warmup-steps", ft_train.warmup_steps, "linear warmup steps");
  finetune_cmd->add_flag("--freeze-encoder", ft_train.freeze_encoder, "train the head only");
  add_common(finetune_cmd, &ft_train.seed);

  // --- compare --------------------------------------------------------
  auto* compare_cmd = app.add_subcommand("compare", "fine-tune several checkpoints per task");
  std::vector<std::string> cmp_checkpoints;
  std::string cmp_vocab, cmp_out;
  std::string cmp_token_train, cmp_token_dev, cmp_seq_train, cmp_seq_dev;
  bertkit::TrainConfig cmp_train;
  compare_cmd->add_option("--checkpoints", cmp_checkpoints, "checkpoint files")
      ->required()
      ->delimiter(',');
  compare_cmd->add_option("--vocab", cmp_vocab, "vocab.txt")->required();
  compare_cmd->add_option("--out", cmp_out, "comparison TSV")->required();
  compare_cmd->add_option("--token-train", cmp_token_train, "token task train CoNLL");
  compare_cmd->add_option("--token-dev", cmp_token_dev, "token task dev CoNLL");
  compare_cmd->add_option("--seq-train", cmp_seq_train, "sequence task train JSONL");
  compare_cmd->add_option("--seq-dev", cmp_seq_dev, "sequence task dev JSONL");
  compare_cmd->add_option("--epochs", cmp_train.epochs, "fine-tuning epochs");
  compare_cmd->add_option("--batch-size", cmp_train.batch_size, "batch size");
  compare_cmd->add_option("--learning-rate", cmp_train.learning_rate, "peak learning rate");
  add_common(compare_cmd, &cmp_train.seed);

  // --- flatten --------------------------------------------------------
  auto* flatten_cmd = app.add_subcommand("flatten", "hierarchical spans -> token labels");
  std::string fl_in, fl_out, fl_mode = "highest", fl_prefix = "MOD";
  std::vector<std::string> fl_keep, fl_subset;
  uint64_t fl_seed = 0;
  flatten_cmd->add_option("--in", fl_in, "span JSONL")->required();
  flatten_cmd->add_option("--out", fl_out, "output CoNLL")->required();
  flatten_cmd->add_option("--mode", fl_mode, "highest | modifiers | str")
      ->check(CLI::IsMember({"highest", "modifiers", "str"}));
  flatten_cmd->add_option("--keep", fl_keep, "labels kept in highest mode")->delimiter(',');
  flatten_cmd->add_option("--prefix", fl_prefix, "modifier label prefix");
  flatten_cmd->add_option("--subset", fl_subset, "label subset for str mode")->delimiter(',');
  add_common(flatten_cmd, &fl_seed);

  // --- evaluate -------------------------------------------------------
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against gold");
  std::string ev_gold, ev_pred, ev_metric = "span-f1", ev_out;
  bool ev_strict = false, ev_exclude_o = false;
  uint64_t ev_seed = 0;
  evaluate_cmd->add_option("--gold", ev_gold, "gold CoNLL")->required();
  evaluate_cmd->add_option("--pred", ev_pred, "predicted CoNLL")->required();
  evaluate_cmd->add_option("--metric", ev_metric, "span-f1 | accuracy | macro-f1")
      ->check(CLI::IsMember({"span-f1", "accuracy", "macro-f1"}));
  evaluate_cmd->add_flag("--strict", ev_strict, "reject malformed BIO");
  evaluate_cmd->add_flag("--exclude-o", ev_exclude_o, "drop O from the macro mean");
  evaluate_cmd->add_option("--out", ev_out, "also write the report here");
  add_common(evaluate_cmd, &ev_seed);

  // --- report ---------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "render a metric table");
  std::string rp_in, rp_out;
  uint64_t rp_seed = 0;
  report_cmd->add_option("--in", rp_in, "TSV rows: model task split metric value")->required();
  report_cmd->add_option("--out", rp_out, "also write the table here");
  add_common(report_cmd, &rp_seed);

  // --- synth ----------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "bundled synthetic corpus generator");
  std::string sy_out, sy_mode = "corpus";
  int sy_docs = 200, sy_count = 200;
  uint64_t sy_seed = 1;
  synth_cmd->add_option("--out", sy_out, "output file")->required();
  synth_cmd
      ->add_option("--mode", sy_mode,
                   "corpus | token-charclass | token-category-train | token-category-dev | "
                   "sentiment | random-labels")
      ->check(CLI::IsMember({"corpus", "token-charclass", "token-category-train",
                             "token-category-dev", "sentiment", "random-labels"}));
  synth_cmd->add_option("--docs", sy_docs, "documents (corpus mode)");
  synth_cmd->add_option("--count", sy_count, "sentences/examples (task modes)");
  add_common(synth_cmd, &sy_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) {
      bertkit::IngestOptions options;
      options.cleaning.min_sentences = ingest_min_sentences;
      options.cleaning.max_nonletter_ratio = ingest_max_nonletter;
      auto manifest = bertkit::ingest_plaintext(ingest_in, ingest_source, options);
      bertkit::save_manifest(manifest, ingest_out);
      write_config_echo(ingest_out, "ingest",
                        {{"in", ingest_in},
                         {"out", ingest_out},
                         {"source", ingest_source},
                         {"min_sentences", ingest_min_sentences},
                         {"max_nonletter", ingest_max_nonletter},
                         {"seed", ingest_seed}});
      std::cout << bertkit::corpus_stats(manifest).to_json() << "\n";
    } else if (exclude->parsed()) {
      auto manifest = bertkit::load_manifest(exclude_in);
      auto ids = bertkit::read_exclusion_ids(exclude_ids);
      auto filtered = bertkit::remove_overlap(manifest, ids);
      bertkit::save_manifest(filtered, exclude_out);
      write_config_echo(exclude_out, "exclude",
                        {{"in", exclude_in},
                         {"ids", exclude_ids},
                         {"out", exclude_out},
                         {"excluded", ids.size()},
                         {"seed", exclude_seed}});
      std::cout << "kept " << filtered.documents.size() << " of " << manifest.documents.size()
                << " documents\n";
    } else if (split->parsed()) {
      auto manifest = bertkit::load_manifest(split_in);
      auto result = bertkit::split_corpus(manifest, split_seed);
      bertkit::save_manifest(result.train, split_prefix + ".train.jsonl");
      bertkit::save_manifest(result.dev, split_prefix + ".dev.jsonl");
      bertkit::save_manifest(result.test, split_prefix + ".test.jsonl");
      write_config_echo(split_prefix + ".split", "split",
                        {{"in", split_in}, {"out_prefix", split_prefix}, {"seed", split_seed}});
      std::cout << "train " << result.train.documents.size() << " dev "
                << result.dev.documents.size() << " test " << result.test.documents.size() << "\n";
    } else if (vocab_cmd->parsed()) {
      auto manifest = bertkit::load_manifest(vocab_in);
      bertkit::InduceOptions options;
      options.lowercase = vocab_lowercase;
      auto vocabulary = bertkit::induce_vocabulary(manifest, vocab_size, options);
      vocabulary.save(vocab_out);
      write_config_echo(vocab_out, "vocab",
                        {{"in", vocab_in},
                         {"out", vocab_out},
                         {"size", vocab_size},
                         {"lowercase", vocab_lowercase},
                         {"actual_size", vocabulary.size()},
                         {"seed", vocab_seed}});
      std::cout << "vocabulary of " << vocabulary.size() << " pieces\n";
    } else if (shards->parsed()) {
      auto manifest = bertkit::load_manifest(shards_in);
      auto vocabulary = bertkit::Vocabulary::load(shards_vocab);
      auto pairs = bertkit::collect_sop_pairs(manifest, vocabulary, shards_seed);
      auto shard_manifest = bertkit::pack_and_shard(pairs, vocabulary, shards_seq_len, shards_size,
                                                    shards_seed, shards_out);
      write_config_echo(shards_out, "shards",
                        {{"in", shards_in},
                         {"vocab", shards_vocab},
                         {"out_dir", shards_out},
                         {"max_seq_len", shards_seq_len},
                         {"shard_size", shards_size},
                         {"mask_rate", shards_mask_rate},
                         {"seed", shards_seed}});
      std::cout << shard_manifest.num_examples << " examples in "
                << shard_manifest.shard_files.size() << " shards\n";
    } else if (pretrain_cmd->parsed()) {
      std::string manifest_path = pre_shards;
      if (fs::is_directory(manifest_path)) {
        manifest_path = (fs::path(manifest_path) / "manifest.json").string();
      }
      auto shard_manifest = bertkit::ShardManifest::load(manifest_path);
      auto examples = bertkit::load_shards(manifest_path);
      bertkit::ModelConfig model_config;
      model_config.num_layers = pre_layers;
      model_config.hidden_size = pre_hidden;
      model_config.num_heads = pre_heads;
      model_config.intermediate_size = pre_intermediate;
      model_config.max_seq_len = shard_manifest.max_seq_len;
      model_config.vocab_size = shard_manifest.vocab_size;
      model_config.dropout_rate = pre_dropout;
      model_config.seed = pre_train.seed;
      auto result = bertkit::pretrain(examples, pre_train, model_config, pre_out, pre_resume);
      write_config_echo(pre_out, "pretrain",
                        {{"shards", pre_shards},
                         {"out_dir", pre_out},
                         {"steps", pre_train.steps},
                         {"batch_size", pre_train.batch_size},
                         {"learning_rate", pre_train.learning_rate},
                         {"warmup_steps", pre_train.warmup_steps},
                         {"weight_decay", pre_train.weight_decay},
                         {"checkpoint_every", pre_train.checkpoint_every},
                         {"layers", pre_layers},
                         {"hidden", pre_hidden},
                         {"heads", pre_heads},
                         {"intermediate", pre_intermediate},
                         {"dropout", pre_dropout},
                         {"resume", pre_resume},
                         {"seed", pre_train.seed}});
      std::cout << "mlm loss " << result.initial_mlm_loss << " -> " << result.final_mlm_loss
                << " over " << pre_train.steps << " steps; " << result.checkpoint_files.size()
                << " checkpoints\n";
    } else if (finetune_cmd->parsed()) {
      auto checkpoint = bertkit::load_checkpoint(ft_checkpoint);
      auto vocabulary = bertkit::Vocabulary::load(ft_vocab);
      std::error_code ec;
      fs::create_directories(ft_out, ec);
      bertkit::FinetuneResult result;
      if (ft_task == "token") {
        auto train_set = bertkit::read_conll(ft_train_path);
        auto dev_set = bertkit::read_conll(ft_dev_path);
        result = bertkit::finetune_token_task(checkpoint, train_set, dev_set, vocabulary, ft_train);
        auto predictions =
            bertkit::predict_token_labels(result.model, dev_set, vocabulary);
        std::vector<bertkit::TokenLabelSequence> out_seqs;
        for (size_t i = 0; i < dev_set.size(); ++i) {
          out_seqs.push_back({dev_set[i].words, predictions[i], dev_set[i].scheme});
        }
        bertkit::write_conll(out_seqs, (fs::path(ft_out) / "dev_predictions.conll").string());
      } else {
        auto train_set = bertkit::read_labeled_jsonl(ft_train_path);
        auto dev_set = bertkit::read_labeled_jsonl(ft_dev_path);
        result =
            bertkit::finetune_sequence_task(checkpoint, train_set, dev_set, vocabulary, ft_train);
        auto predictions = bertkit::predict_sequence_labels(result.model, dev_set, vocabulary);
        std::vector<bertkit::LabeledText> out_texts;
        for (size_t i = 0; i < dev_set.size(); ++i) {
          out_texts.push_back({dev_set[i].text, predictions[i]});
        }
        bertkit::write_labeled_jsonl(out_texts,
                                     (fs::path(ft_out) / "dev_predictions.jsonl").string());
      }
      ordered_json metrics = ordered_json::array();
      for (const auto& m : result.epoch_metrics) {
        metrics.push_back({{"epoch", m.epoch},
                           {"train_loss", m.train_loss},
                           {"dev_accuracy", m.dev_metric}});
      }
      write_text_file((fs::path(ft_out) / "metrics.json").string(), metrics.dump(2) + "\n");
      write_config_echo(ft_out, "finetune",
                        {{"checkpoint", ft_checkpoint},
                         {"task", ft_task},
                         {"train", ft_train_path},
                         {"dev", ft_dev_path},
                         {"vocab", ft_vocab},
                         {"out_dir", ft_out},
                         {"epochs", ft_train.epochs},
                         {"batch_size", ft_train.batch_size},
                         {"learning_rate", ft_train.learning_rate},
                         {"freeze_encoder", ft_train.freeze_encoder},
                         {"seed", ft_train.seed}});
      for (const auto& m : result.epoch_metrics) {
        std::cout << "epoch " << m.epoch << " train_loss " << m.train_loss << " dev_accuracy "
                  << bertkit::format_metric(m.dev_metric) << "\n";
      }
    } else if (compare_cmd->parsed()) {
      auto vocabulary = bertkit::Vocabulary::load(cmp_vocab);
      std::vector<bertkit::TaskSpec> tasks;
      if (!cmp_token_train.empty()) {
        bertkit::TaskSpec task;
        task.name = "token";
        task.kind = bertkit::TaskSpec::Kind::Token;
        task.token_train = bertkit::read_conll(cmp_token_train);
        task.token_dev = bertkit::read_conll(cmp_token_dev);
        tasks.push_back(std::move(task));
      }
      if (!cmp_seq_train.empty()) {
        bertkit::TaskSpec task;
        task.name = "sequence";
        task.kind = bertkit::TaskSpec::Kind::Sequence;
        task.seq_train = bertkit::read_labeled_jsonl(cmp_seq_train);
        task.seq_dev = bertkit::read_labeled_jsonl(cmp_seq_dev);
        tasks.push_back(std::move(task));
      }
      if (tasks.empty()) {
        throw bertkit::ConfigError("compare needs at least one task (--token-train/--seq-train)");
      }
      auto report = bertkit::compare_checkpoints(cmp_checkpoints, tasks, vocabulary, cmp_train);
      write_text_file(cmp_out, report.to_tsv());
      write_config_echo(cmp_out, "compare",
                        {{"checkpoints", cmp_checkpoints},
                         {"vocab", cmp_vocab},
                         {"out", cmp_out},
                         {"token_train", cmp_token_train},
                         {"token_dev", cmp_token_dev},
                         {"seq_train", cmp_seq_train},
                         {"seq_dev", cmp_seq_dev},
                         {"epochs", cmp_train.epochs},
                         {"seed", cmp_train.seed}});
      std::cout << report.to_tsv();
    } else if (flatten_cmd->parsed()) {
      auto sentences = bertkit::read_span_jsonl(fl_in);
      std::vector<bertkit::TokenLabelSequence> out_seqs;
      int conflicts = 0;
      for (const auto& sent : sentences) {
        int length = static_cast<int>(sent.words.size());
        bertkit::TokenLabelSequence seq;
        if (fl_mode == "highest") {
          seq = bertkit::flatten_highest_level(sent.spans, length, keep_from_list(fl_keep));
        } else if (fl_mode == "modifiers") {
          std::string prefix = fl_prefix;
          auto result = bertkit::flatten_modifiers(
              sent.spans, length,
              [prefix](const std::string& label) { return label.rfind(prefix, 0) == 0; });
          conflicts += result.conflicts;
          seq = result.sequence;
        } else {
          std::set<std::string> subset(fl_subset.begin(), fl_subset.end());
          seq = bertkit::flatten_str(sent.spans, length, subset);
        }
        seq.words = sent.words;
        out_seqs.push_back(std::move(seq));
      }
      bertkit::write_conll(out_seqs, fl_out);
      write_config_echo(fl_out, "flatten",
                        {{"in", fl_in},
                         {"out", fl_out},
                         {"mode", fl_mode},
                         {"keep", fl_keep},
                         {"prefix", fl_prefix},
                         {"subset", fl_subset},
                         {"conflicts", conflicts},
                         {"seed", fl_seed}});
      std::cout << out_seqs.size() << " sentences";
      if (fl_mode == "modifiers") std::cout << ", " << conflicts << " overlap conflicts";
      std::cout << "\n";
    } else if (evaluate_cmd->parsed()) {
      auto gold = bertkit::read_conll(ev_gold);
      auto pred = bertkit::read_conll(ev_pred);
      std::string text;
      if (ev_metric == "span-f1") {
        auto report = bertkit::span_f1(gold, pred, ev_strict);
        text = "F1 " + bertkit::format_metric(report.f1()) + "\n" + report.to_text();
      } else if (ev_metric == "accuracy") {
        auto report = bertkit::token_accuracy(gold, pred);
        text = report.to_text();
      } else {
        auto report = bertkit::macro_f1(gold, pred, !ev_exclude_o);
        text = report.to_text();
      }
      std::cout << text;
      if (!ev_out.empty()) {
        write_text_file(ev_out, text);
        write_config_echo(ev_out, "evaluate",
                          {{"gold", ev_gold},
                           {"pred", ev_pred},
                           {"metric", ev_metric},
                           {"strict", ev_strict},
                           {"exclude_o", ev_exclude_o},
                           {"seed", ev_seed}});
      }
    } else if (report_cmd->parsed()) {
      auto rows = read_rows_tsv(rp_in);
      std::string table = bertkit::render_table(rows);
      std::cout << table;
      if (!rp_out.empty()) {
        write_text_file(rp_out, table);
        write_config_echo(rp_out, "report", {{"in", rp_in}, {"out", rp_out}, {"seed", rp_seed}});
      }
    } else if (synth_cmd->parsed()) {
      if (sy_mode == "corpus") {
        bertkit::SynthConfig config;
        config.num_docs = sy_docs;
        config.seed = sy_seed;
        write_text_file(sy_out, bertkit::synth_corpus_text(config));
      } else if (sy_mode == "token-charclass") {
        bertkit::write_conll(bertkit::synth_token_charclass(sy_count, sy_seed), sy_out);
      } else if (sy_mode == "token-category-train") {
        bertkit::write_conll(bertkit::synth_token_category(sy_count, 1, sy_seed).train, sy_out);
      } else if (sy_mode == "token-category-dev") {
        bertkit::write_conll(bertkit::synth_token_category(1, sy_count, sy_seed).dev, sy_out);
      } else if (sy_mode == "sentiment") {
        bertkit::write_labeled_jsonl(bertkit::synth_sentiment(sy_count, sy_seed), sy_out);
      } else {
        bertkit::write_labeled_jsonl(bertkit::synth_random_labels(sy_count, sy_seed), sy_out);
      }
      write_config_echo(sy_out, "synth",
                        {{"out", sy_out},
                         {"mode", sy_mode},
                         {"docs", sy_docs},
                         {"count", sy_count},
                         {"seed", sy_seed}});
      std::cout << "wrote " << sy_out << "\n";
    }
  } catch (const bertkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
