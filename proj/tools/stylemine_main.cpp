// stylemine: self-supervised text style transfer between two non-parallel
// monostylistic corpora, plus the evaluation stack for judging transfers.
//
// Subcommands cover the whole pipeline: synth, preprocess, train-bpe,
// pretrain-dae, train, mine-pairs, transfer, evaluate, stats. Every run
// writes a <output>.manifest.json capturing the resolved configuration.

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stylemine/bpe.hpp"
#include "stylemine/classifier.hpp"
#include "stylemine/corpus.hpp"
#include "stylemine/eval.hpp"
#include "stylemine/manifest.hpp"
#include "stylemine/mining.hpp"
#include "stylemine/ngram_lm.hpp"
#include "stylemine/noiser.hpp"
#include "stylemine/seqmodel.hpp"
#include "stylemine/stats.hpp"
#include "stylemine/synth.hpp"
#include "stylemine/trainer.hpp"

namespace {

using namespace stylemine;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  for (const auto& l : lines) f << l << "\n";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw std::runtime_error("unknown split: " + s);
}

StyleTag resolve_tag(const BpeModel& bpe, const std::string& wanted) {
  for (const StyleTag& t : bpe.styles) {
    if (t.id == wanted || t.surface == wanted) return t;
  }
  throw std::runtime_error("style '" + wanted + "' is not in the tokenizer model");
}

StyleTag other_tag(const BpeModel& bpe, const StyleTag& t) {
  for (const StyleTag& s : bpe.styles) {
    if (!(s == t)) return s;
  }
  throw std::runtime_error("tokenizer model does not define two styles");
}

void finish_manifest(RunManifest m, const Timer& timer, const std::string& path) {
  m.wall_clock_sec = timer.seconds();
  write_manifest(m, path);
}

// Shared model-size flags for commands that create a model.
struct ModelFlags {
  int embed_dim = 48;
  int hidden_dim = 48;
  int enc_layers = 1;
  int dec_layers = 1;
  int max_len = 100;
  double learning_rate = 0.01;

  void add_to(CLI::App* app) {
    app->add_option("--embed-dim", embed_dim, "embedding width");
    app->add_option("--hidden-dim", hidden_dim, "encoder hidden width per direction");
    app->add_option("--enc-layers", enc_layers, "encoder layers");
    app->add_option("--dec-layers", dec_layers, "decoder layers");
    app->add_option("--max-len", max_len, "max input length in subword units");
    app->add_option("--lr", learning_rate, "learning rate");
  }

  ModelConfig to_config(int vocab_size, std::uint64_t seed, int num_tags) const {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.embed_dim = embed_dim;
    cfg.hidden_dim = hidden_dim;
    cfg.enc_layers = enc_layers;
    cfg.dec_layers = dec_layers;
    cfg.max_len = max_len;
    cfg.learning_rate = learning_rate;
    cfg.seed = seed;
    cfg.specials.num_tags = num_tags;
    return cfg;
  }
};

struct NoiseFlags {
  double lambda = 3.5;
  double mask_ratio = 0.35;
  int insert_masks = 1;
  bool no_permute = false;

  void add_to(CLI::App* app) {
    app->add_option("--lambda", lambda, "mean masked span length");
    app->add_option("--mask-ratio", mask_ratio, "fraction of content tokens masked");
    app->add_option("--insert-masks", insert_masks, "random mask insertions per sequence");
    app->add_flag("--no-permute", no_permute, "disable segment permutation");
  }

  NoiseConfig to_config(const BpeModel& bpe) const {
    NoiseConfig cfg;
    cfg.lambda = lambda;
    cfg.mask_ratio = mask_ratio;
    cfg.insert_masks = insert_masks;
    cfg.permute = !no_permute;
    for (const char* p : {".", ",", "!", "?", ";", ":"}) {
      const int id = bpe.token_id(std::string(p) + bpe_eow());
      if (id >= 0) cfg.boundary_ids.insert(id);
    }
    return cfg;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"self-supervised style transfer pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags take precedence");
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "global random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (matrix backend hint)");

  // ---- synth
  auto* synth = app.add_subcommand("synth", "generate the two-style synthetic task");
  std::string synth_out_dir;
  int n_train = 800, n_dev = 150, n_test = 150;
  synth->add_option("--out-dir", synth_out_dir, "output directory")->required();
  synth->add_option("--n-train", n_train, "train sentences per style");
  synth->add_option("--n-dev", n_dev, "dev sentences per style");
  synth->add_option("--n-test", n_test, "test sentences per style");

  // ---- preprocess
  auto* prep = app.add_subcommand("preprocess", "normalize and filter one corpus file");
  std::string prep_in, prep_out, prep_style_id = "pos", prep_style_surface, prep_split = "train";
  std::string prep_lexicon, prep_lexicon_mode = "require";
  std::vector<std::string> prep_overlap;
  int min_words = 5, max_words = 25;
  bool no_normalize = false, no_dedup = false, no_length_filter = false;
  prep->add_option("--in", prep_in, "input corpus, one sentence per line")->required();
  prep->add_option("--out", prep_out, "output corpus path")->required();
  prep->add_option("--style", prep_style_id, "style id for the corpus");
  prep->add_option("--style-tag", prep_style_surface, "style tag surface, default <id>");
  prep->add_option("--split", prep_split, "train|dev|test");
  prep->add_option("--min-words", min_words, "minimum sentence length in words");
  prep->add_option("--max-words", max_words, "maximum sentence length in words");
  prep->add_flag("--no-normalize", no_normalize, "skip lowercase/punctuation normalization");
  prep->add_flag("--no-dedup", no_dedup, "skip exact-duplicate removal");
  prep->add_flag("--no-length-filter", no_length_filter, "skip the word-count filter");
  prep->add_option("--lexicon", prep_lexicon, "lexicon file for require/exclude filtering");
  prep->add_option("--lexicon-mode", prep_lexicon_mode, "require|exclude");
  prep->add_option("--remove-overlap", prep_overlap,
                   "held-out corpus files whose sentences are removed");

  // ---- train-bpe
  auto* tbpe = app.add_subcommand("train-bpe", "learn the joint byte-pair encoding");
  std::string bpe_a, bpe_b, bpe_out;
  std::string style_a_id = "pos", style_b_id = "neg", style_a_tag, style_b_tag;
  int merges = 500;
  tbpe->add_option("--train-a", bpe_a, "style-A training corpus")->required();
  tbpe->add_option("--train-b", bpe_b, "style-B training corpus")->required();
  tbpe->add_option("--merges", merges, "merge budget");
  tbpe->add_option("--style-a", style_a_id, "style A id");
  tbpe->add_option("--style-b", style_b_id, "style B id");
  tbpe->add_option("--tag-a", style_a_tag, "style A tag surface, default <id>");
  tbpe->add_option("--tag-b", style_b_tag, "style B tag surface, default <id>");
  tbpe->add_option("--out", bpe_out, "output model path")->required();

  // ---- pretrain-dae
  auto* dae = app.add_subcommand("pretrain-dae", "denoising-autoencoder initialization");
  std::string dae_bpe, dae_a, dae_b, dae_dev_a, dae_dev_b, dae_out, dae_log;
  int dae_steps = 600, dae_batch = 50;
  ModelFlags dae_model;
  NoiseFlags dae_noise;
  dae->add_option("--bpe", dae_bpe, "tokenizer model")->required();
  dae->add_option("--train-a", dae_a, "style-A training corpus")->required();
  dae->add_option("--train-b", dae_b, "style-B training corpus")->required();
  dae->add_option("--dev-a", dae_dev_a, "style-A dev corpus (loss trend)");
  dae->add_option("--dev-b", dae_dev_b, "style-B dev corpus (loss trend)");
  dae->add_option("--steps", dae_steps, "update count");
  dae->add_option("--batch-size", dae_batch, "sentences per update");
  dae_model.add_to(dae);
  dae_noise.add_to(dae);
  dae->add_option("--out", dae_out, "output checkpoint")->required();
  dae->add_option("--log", dae_log, "dev-loss JSONL path");

  // ---- train
  auto* train = app.add_subcommand("train", "3ST loop: SPE + BT over both corpora");
  std::string tr_bpe, tr_a, tr_b, tr_dev_a, tr_dev_b, tr_in, tr_out, tr_log;
  bool no_spe = false, no_bt = false, no_dae_flag = false, tr_approx = false;
  TrainConfig tr_cfg;
  ModelFlags tr_model;
  train->add_option("--bpe", tr_bpe, "tokenizer model")->required();
  train->add_option("--train-a", tr_a, "style-A training corpus")->required();
  train->add_option("--train-b", tr_b, "style-B training corpus")->required();
  train->add_option("--dev-a", tr_dev_a, "style-A dev corpus")->required();
  train->add_option("--dev-b", tr_dev_b, "style-B dev corpus")->required();
  train->add_option("--model-in", tr_in, "DAE-initialized checkpoint (omit with --no-dae)");
  train->add_flag("--no-spe", no_spe, "ablation: disable sentence pair extraction");
  train->add_flag("--no-bt", no_bt, "ablation: disable online back-translation");
  train->add_flag("--no-dae", no_dae_flag, "ablation: start from random initialization");
  train->add_flag("--approximate-index", tr_approx, "use the clustered ANN index for SPE");
  train->add_option("--batch-size", tr_cfg.batch_size, "sentences per update");
  train->add_option("--k", tr_cfg.spe_k, "margin neighborhood size");
  train->add_option("--patience", tr_cfg.patience, "checkpoints without dev-ATA gain");
  train->add_option("--checkpoint-every", tr_cfg.checkpoint_every, "updates per checkpoint");
  train->add_option("--max-passes", tr_cfg.max_passes, "maximum passes over the data");
  train->add_option("--bt-sample-rate", tr_cfg.bt_sample_rate, "fraction of rejections fed to BT");
  tr_model.add_to(train);
  train->add_option("--out", tr_out, "output checkpoint")->required();
  train->add_option("--log", tr_log, "training log JSONL path");

  // ---- mine-pairs
  auto* mine = app.add_subcommand("mine-pairs", "dump SPE-accepted pairs for two corpora");
  std::string mine_bpe, mine_model, mine_a, mine_b, mine_out;
  int mine_k = 4;
  bool mine_approx = false;
  mine->add_option("--bpe", mine_bpe, "tokenizer model")->required();
  mine->add_option("--model", mine_model, "model checkpoint")->required();
  mine->add_option("--corpus-a", mine_a, "style-A corpus")->required();
  mine->add_option("--corpus-b", mine_b, "style-B corpus")->required();
  mine->add_option("--k", mine_k, "margin neighborhood size");
  mine->add_flag("--approximate-index", mine_approx, "use the clustered ANN index");
  mine->add_option("--out", mine_out, "output TSV")->required();

  // ---- transfer
  auto* tra = app.add_subcommand("transfer", "rewrite sentences into the target style");
  std::string tra_bpe, tra_model, tra_target, tra_in, tra_out;
  tra->add_option("--bpe", tra_bpe, "tokenizer model")->required();
  tra->add_option("--model", tra_model, "model checkpoint")->required();
  tra->add_option("--target", tra_target, "target style id or tag surface")->required();
  tra->add_option("--in", tra_in, "input sentences, one per line")->required();
  tra->add_option("--out", tra_out, "output path")->required();

  // ---- evaluate
  auto* ev = app.add_subcommand("evaluate", "CP/FLU/ATA/AGG report for predictions");
  std::string ev_bpe, ev_embed, ev_a, ev_b, ev_dev_a, ev_dev_b, ev_src, ev_pred, ev_target,
      ev_task = "task", ev_report;
  ev->add_option("--bpe", ev_bpe, "tokenizer model")->required();
  ev->add_option("--embed-model", ev_embed, "checkpoint providing the CP embedder")->required();
  ev->add_option("--train-a", ev_a, "style-A train corpus (fits the proxies)")->required();
  ev->add_option("--train-b", ev_b, "style-B train corpus (fits the proxies)")->required();
  ev->add_option("--dev-a", ev_dev_a, "style-A dev corpus (calibration)")->required();
  ev->add_option("--dev-b", ev_dev_b, "style-B dev corpus (calibration)")->required();
  ev->add_option("--src", ev_src, "source sentences")->required();
  ev->add_option("--pred", ev_pred, "predicted transfers")->required();
  ev->add_option("--target", ev_target, "target style id or tag surface")->required();
  ev->add_option("--task", ev_task, "task name recorded in the report");
  ev->add_option("--report", ev_report, "output JSON report")->required();

  // ---- stats
  auto* stats = app.add_subcommand("stats", "human-evaluation statistics");
  std::string stats_ratings, stats_compare, stats_metric = "ordinal", stats_out;
  stats->add_option("--ratings", stats_ratings, "CSV: item_id,rater_id,cp,flu,ata")->required();
  stats->add_option("--compare", stats_compare, "second system's ratings CSV for the T test");
  stats->add_option("--metric", stats_metric, "alpha difference metric: ordinal|interval");
  stats->add_option("--out", stats_out, "output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
  }
  Timer timer;
  Eigen::setNbThreads(threads);

  if (*synth) {
    const SynthSplits splits = synth_splits(n_train, n_dev, n_test, seed);
    auto path = [&](const std::string& name) { return synth_out_dir + "/" + name; };
    std::vector<std::string> outputs;
    auto emit = [&](const SynthOutput& out, const std::string& split) {
      save_corpus(out.a, path("a." + split + ".txt"));
      save_corpus(out.b, path("b." + split + ".txt"));
      write_gold_tsv(out, path("gold." + split + ".tsv"));
      outputs.push_back(path("a." + split + ".txt"));
      outputs.push_back(path("b." + split + ".txt"));
      outputs.push_back(path("gold." + split + ".tsv"));
    };
    emit(splits.train, "train");
    emit(splits.dev, "dev");
    emit(splits.test, "test");
    RunManifest m;
    m.command = "synth";
    m.seed = seed;
    m.config = {{"n_train", std::to_string(n_train)},
                {"n_dev", std::to_string(n_dev)},
                {"n_test", std::to_string(n_test)}};
    m.outputs = outputs;
    finish_manifest(std::move(m), timer, path("manifest.json"));
    std::cout << "synth: wrote " << outputs.size() << " files under " << synth_out_dir << "\n";
    return 0;
  }

  if (*prep) {
    if (prep_style_surface.empty()) prep_style_surface = "<" + prep_style_id + ">";
    const StyleTag style{prep_style_id, prep_style_surface};
    StyleCorpus corpus = load_corpus(prep_in, style, parse_split(prep_split));
    const std::size_t loaded = corpus.size();
    if (!no_normalize) corpus = normalize_corpus(corpus);
    if (!no_length_filter) corpus = filter_by_length(corpus, min_words, max_words);
    if (!no_dedup) corpus = dedup(corpus);
    if (!prep_lexicon.empty()) {
      const Lexicon lex = load_lexicon(prep_lexicon);
      const LexiconMode mode =
          prep_lexicon_mode == "exclude" ? LexiconMode::exclude : LexiconMode::require;
      corpus = lexicon_filter(corpus, lex, mode);
    }
    if (!prep_overlap.empty()) {
      std::vector<StyleCorpus> held;
      for (const auto& f : prep_overlap) {
        StyleCorpus h = load_corpus(f, style, Split::test);
        held.push_back(no_normalize ? h : normalize_corpus(h));
      }
      corpus = remove_overlap(corpus, held);
    }
    save_corpus(corpus, prep_out);
    RunManifest m;
    m.command = "preprocess";
    m.seed = seed;
    m.config = {{"style", prep_style_id},
                {"split", prep_split},
                {"min_words", std::to_string(min_words)},
                {"max_words", std::to_string(max_words)},
                {"normalize", no_normalize ? "false" : "true"},
                {"dedup", no_dedup ? "false" : "true"},
                {"lexicon", prep_lexicon},
                {"lexicon_mode", prep_lexicon_mode}};
    m.inputs = {prep_in};
    m.outputs = {prep_out};
    finish_manifest(std::move(m), timer, prep_out + ".manifest.json");
    std::cout << "preprocess: " << loaded << " -> " << corpus.size() << " sentences\n";
    return 0;
  }

  if (*tbpe) {
    if (style_a_tag.empty()) style_a_tag = "<" + style_a_id + ">";
    if (style_b_tag.empty()) style_b_tag = "<" + style_b_id + ">";
    const StyleCorpus a = load_corpus(bpe_a, {style_a_id, style_a_tag}, Split::train);
    const StyleCorpus b = load_corpus(bpe_b, {style_b_id, style_b_tag}, Split::train);
    const BpeModel model = train_bpe({a, b}, merges);
    model.save(bpe_out);
    RunManifest m;
    m.command = "train-bpe";
    m.seed = seed;
    m.config = {{"merges", std::to_string(merges)},
                {"style_a", style_a_id},
                {"style_b", style_b_id}};
    m.inputs = {bpe_a, bpe_b};
    m.outputs = {bpe_out};
    finish_manifest(std::move(m), timer, bpe_out + ".manifest.json");
    std::cout << "train-bpe: " << model.merges.size() << " merges, vocab " << model.vocab_size()
              << "\n";
    return 0;
  }

  auto load_pair = [&](const BpeModel& bpe, const std::string& pa, const std::string& pb,
                       Split split, int max_content) {
    const StyleCorpus a = load_corpus(pa, bpe.styles[0], split);
    const StyleCorpus b = load_corpus(pb, bpe.styles[1], split);
    long dropped_a = 0, dropped_b = 0;
    auto ta = tokenize_corpus(bpe, a, max_content, &dropped_a);
    auto tb = tokenize_corpus(bpe, b, max_content, &dropped_b);
    if (dropped_a + dropped_b > 0) {
      std::cerr << "note: dropped " << dropped_a + dropped_b << " over-length sentences\n";
    }
    return std::make_pair(std::move(ta), std::move(tb));
  };

  if (*dae) {
    const BpeModel bpe = BpeModel::load(dae_bpe);
    const NoiseConfig noise_cfg = dae_noise.to_config(bpe);
    const int max_content = dae_model.max_len - 2 - noise_cfg.insert_masks;
    auto [ta, tb] = load_pair(bpe, dae_a, dae_b, Split::train, max_content);
    TokenizedCorpus tdev_a, tdev_b;
    const bool have_dev = !dae_dev_a.empty() && !dae_dev_b.empty();
    if (have_dev) {
      auto [da, db] = load_pair(bpe, dae_dev_a, dae_dev_b, Split::dev, max_content);
      tdev_a = std::move(da);
      tdev_b = std::move(db);
    }
    auto model = Seq2SeqModel::init(
        dae_model.to_config(bpe.vocab_size(), seed, static_cast<int>(bpe.styles.size())));
    DaeResult res = pretrain_dae(std::move(model), ta, tb, noise_cfg, dae_steps, dae_batch, seed,
                                 have_dev ? &tdev_a : nullptr, have_dev ? &tdev_b : nullptr);
    res.model.save(dae_out);
    if (!dae_log.empty()) {
      std::ofstream f(dae_log, std::ios::binary);
      for (const auto& r : res.log) {
        f << nlohmann::json({{"step", r.step}, {"dev_loss", r.dev_loss}}).dump() << "\n";
      }
    }
    RunManifest m;
    m.command = "pretrain-dae";
    m.seed = seed;
    m.config = {{"steps", std::to_string(dae_steps)},
                {"batch_size", std::to_string(dae_batch)},
                {"lambda", std::to_string(dae_noise.lambda)},
                {"mask_ratio", std::to_string(dae_noise.mask_ratio)},
                {"insert_masks", std::to_string(dae_noise.insert_masks)},
                {"permute", dae_noise.no_permute ? "false" : "true"},
                {"embed_dim", std::to_string(dae_model.embed_dim)},
                {"hidden_dim", std::to_string(dae_model.hidden_dim)},
                {"max_len", std::to_string(dae_model.max_len)}};
    m.inputs = {dae_bpe, dae_a, dae_b};
    m.outputs = {dae_out};
    finish_manifest(std::move(m), timer, dae_out + ".manifest.json");
    const double dev_loss = res.log.empty() ? -1.0 : res.log.back().dev_loss;
    std::cout << "pretrain-dae: " << dae_steps << " steps, final dev loss " << dev_loss << "\n";
    return 0;
  }

  if (*train) {
    const BpeModel bpe = BpeModel::load(tr_bpe);
    tr_cfg.use_spe = !no_spe;
    tr_cfg.use_bt = !no_bt;
    tr_cfg.use_dae = !no_dae_flag;
    tr_cfg.seed = seed;
    tr_cfg.index_mode = tr_approx ? IndexMode::approximate : IndexMode::exact;
    if (tr_cfg.use_dae && tr_in.empty()) {
      throw std::runtime_error("train: --model-in is required unless --no-dae is given");
    }
    Seq2SeqModel model =
        tr_cfg.use_dae
            ? Seq2SeqModel::load(tr_in)
            : Seq2SeqModel::init(tr_model.to_config(bpe.vocab_size(), seed,
                                                    static_cast<int>(bpe.styles.size())));
    tr_cfg.max_len = model.config().max_len;
    const int max_content = tr_cfg.max_content_len();
    auto [ta, tb] = load_pair(bpe, tr_a, tr_b, Split::train, max_content);
    auto [tdev_a, tdev_b] = load_pair(bpe, tr_dev_a, tr_dev_b, Split::dev, max_content);
    const StyleCorpus raw_a = load_corpus(tr_a, bpe.styles[0], Split::train);
    const StyleCorpus raw_b = load_corpus(tr_b, bpe.styles[1], Split::train);
    const StyleCorpus raw_dev_a = load_corpus(tr_dev_a, bpe.styles[0], Split::dev);
    const StyleCorpus raw_dev_b = load_corpus(tr_dev_b, bpe.styles[1], Split::dev);
    const EvalSuite suite = build_eval_suite(model, bpe, raw_a, raw_b, raw_dev_a, raw_dev_b, seed);
    TrainResult res = train_3st(std::move(model), bpe, ta, tb, tdev_a, tdev_b, tr_cfg, suite);
    res.model.save(tr_out);
    if (!tr_log.empty()) res.log.save_jsonl(tr_log);
    RunManifest m;
    m.command = "train";
    m.seed = seed;
    m.config = {{"use_spe", tr_cfg.use_spe ? "true" : "false"},
                {"use_bt", tr_cfg.use_bt ? "true" : "false"},
                {"use_dae", tr_cfg.use_dae ? "true" : "false"},
                {"batch_size", std::to_string(tr_cfg.batch_size)},
                {"k", std::to_string(tr_cfg.spe_k)},
                {"patience", std::to_string(tr_cfg.patience)},
                {"checkpoint_every", std::to_string(tr_cfg.checkpoint_every)},
                {"max_passes", std::to_string(tr_cfg.max_passes)},
                {"bt_sample_rate", std::to_string(tr_cfg.bt_sample_rate)},
                {"index_mode", tr_approx ? "approximate" : "exact"}};
    m.inputs = {tr_bpe, tr_a, tr_b, tr_dev_a, tr_dev_b};
    if (!tr_in.empty()) m.inputs.push_back(tr_in);
    m.outputs = {tr_out};
    finish_manifest(std::move(m), timer, tr_out + ".manifest.json");
    std::cout << "train: best dev ATA " << res.best_dev_ata << " over "
              << res.log.records.size() << " checkpoints\n";
    return 0;
  }

  if (*mine) {
    const BpeModel bpe = BpeModel::load(mine_bpe);
    const Seq2SeqModel model = Seq2SeqModel::load(mine_model);
    const int max_content = model.config().max_len - 2;
    auto [ta, tb] = load_pair(bpe, mine_a, mine_b, Split::train, max_content);
    MiningConfig mcfg;
    mcfg.k = mine_k;
    mcfg.mode = mine_approx ? IndexMode::approximate : IndexMode::exact;
    const ExtractionRound round(build_dual_index(model, ta, mcfg.mode, seed),
                                build_dual_index(model, tb, mcfg.mode, seed), mcfg);
    const SpeResult res = round.extract_all();
    std::ofstream f(mine_out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + mine_out);
    for (const CandidatePair& p : res.accepted) {
      f << p.score_w << "\t" << p.score_e << "\t"
        << ta.sents[static_cast<std::size_t>(p.a_id)].text << "\t"
        << tb.sents[static_cast<std::size_t>(p.b_id)].text << "\n";
    }
    RunManifest m;
    m.command = "mine-pairs";
    m.seed = seed;
    m.config = {{"k", std::to_string(mine_k)},
                {"index_mode", mine_approx ? "approximate" : "exact"}};
    m.inputs = {mine_bpe, mine_model, mine_a, mine_b};
    m.outputs = {mine_out};
    finish_manifest(std::move(m), timer, mine_out + ".manifest.json");
    std::cout << "mine-pairs: accepted " << res.accepted.size() << " of "
              << ta.size() << "+" << tb.size() << " sentences\n";
    return 0;
  }

  if (*tra) {
    const BpeModel bpe = BpeModel::load(tra_bpe);
    const Seq2SeqModel model = Seq2SeqModel::load(tra_model);
    const StyleTag target = resolve_tag(bpe, tra_target);
    const std::vector<std::string> lines = read_lines(tra_in);
    std::vector<std::string> out(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (split_words(lines[i]).empty()) continue;  // blank in, blank out
      out[i] = transfer(model, bpe, {lines[i]}, target)[0];
    }
    write_lines(out, tra_out);
    RunManifest m;
    m.command = "transfer";
    m.seed = seed;
    m.config = {{"target", target.id}};
    m.inputs = {tra_bpe, tra_model, tra_in};
    m.outputs = {tra_out};
    finish_manifest(std::move(m), timer, tra_out + ".manifest.json");
    std::cout << "transfer: " << lines.size() << " sentences -> " << tra_out << "\n";
    return 0;
  }

  if (*ev) {
    const BpeModel bpe = BpeModel::load(ev_bpe);
    const Seq2SeqModel model = Seq2SeqModel::load(ev_embed);
    const StyleTag target = resolve_tag(bpe, ev_target);
    const StyleCorpus train_a = load_corpus(ev_a, bpe.styles[0], Split::train);
    const StyleCorpus train_b = load_corpus(ev_b, bpe.styles[1], Split::train);
    const StyleCorpus dev_a = load_corpus(ev_dev_a, bpe.styles[0], Split::dev);
    const StyleCorpus dev_b = load_corpus(ev_dev_b, bpe.styles[1], Split::dev);
    const EvalSuite suite = build_eval_suite(model, bpe, train_a, train_b, dev_a, dev_b, seed);
    std::vector<std::string> srcs, preds;
    for (const auto& l : read_lines(ev_src)) {
      if (!split_words(l).empty()) srcs.push_back(l);
    }
    for (const auto& l : read_lines(ev_pred)) {
      if (!split_words(l).empty()) preds.push_back(l);
    }
    const EvalReport report = evaluate_predictions(ev_task, srcs, preds, target, suite.classifier,
                                                   suite.fluency, suite.embedder);
    report.save(ev_report);
    RunManifest m;
    m.command = "evaluate";
    m.seed = seed;
    m.config = {{"task", ev_task}, {"target", target.id}};
    m.inputs = {ev_bpe, ev_embed, ev_src, ev_pred};
    m.outputs = {ev_report};
    finish_manifest(std::move(m), timer, ev_report + ".manifest.json");
    std::cout << "evaluate: n=" << report.n << " cp=" << report.cp_mean
              << " flu=" << report.flu_rate << " ata=" << report.ata << " agg=" << report.agg
              << "\n";
    return 0;
  }

  if (*stats) {
    // CSV: item_id, rater_id, cp, flu, ata
    struct Row {
      std::string item, rater;
      int cp, flu, ata;
    };
    auto load_rows = [](const std::string& path) {
      std::vector<Row> rows;
      for (const auto& line : read_lines(path)) {
        if (line.empty() || line.rfind("item_id", 0) == 0) continue;
        std::istringstream iss(line);
        Row r;
        std::string field;
        auto next = [&]() {
          if (!std::getline(iss, field, ',')) throw std::runtime_error("bad ratings row: " + line);
          return field;
        };
        r.item = next();
        r.rater = next();
        r.cp = std::stoi(next());
        r.flu = std::stoi(next());
        r.ata = std::stoi(next());
        rows.push_back(r);
      }
      return rows;
    };
    auto rows = load_rows(stats_ratings);
    const AlphaMetric metric =
        stats_metric == "interval" ? AlphaMetric::interval : AlphaMetric::ordinal;

    std::vector<std::string> items;
    std::vector<std::string> raters;
    for (const Row& r : rows) {
      if (std::find(items.begin(), items.end(), r.item) == items.end()) items.push_back(r.item);
      if (std::find(raters.begin(), raters.end(), r.rater) == raters.end()) {
        raters.push_back(r.rater);
      }
    }
    auto build_matrix = [&](auto get) {
      RatingsMatrix m;
      m.values.assign(items.size(),
                      std::vector<int>(raters.size(), RatingsMatrix::kMissingRating));
      for (const Row& r : rows) {
        const auto ii = std::find(items.begin(), items.end(), r.item) - items.begin();
        const auto ri = std::find(raters.begin(), raters.end(), r.rater) - raters.begin();
        m.values[static_cast<std::size_t>(ii)][static_cast<std::size_t>(ri)] = get(r);
      }
      return m;
    };
    nlohmann::json out;
    out["n_items"] = items.size();
    out["n_raters"] = raters.size();
    out["alpha_cp"] = krippendorff_alpha(build_matrix([](const Row& r) { return r.cp; }), metric);
    out["alpha_flu"] = krippendorff_alpha(build_matrix([](const Row& r) { return r.flu; }), metric);
    out["alpha_ata"] = krippendorff_alpha(build_matrix([](const Row& r) { return r.ata; }), metric);

    // success rate over per-item mean ratings rounded? -- no: SR is defined on
    // individual rated items; use each (item, rater) triple as one rating set.
    std::vector<LikertItem> likert;
    for (const Row& r : rows) likert.push_back({r.cp, r.flu, r.ata});
    out["success_rate"] = success_rate(likert);

    if (!stats_compare.empty()) {
      auto rows_b = load_rows(stats_compare);
      // per-item mean rating per metric, paired across systems
      auto item_means = [&](const std::vector<Row>& rs, auto get) {
        std::map<std::string, std::pair<double, long>> acc;
        for (const Row& r : rs) {
          acc[r.item].first += get(r);
          acc[r.item].second += 1;
        }
        std::map<std::string, double> out_means;
        for (const auto& [item, sums] : acc) {
          out_means[item] = sums.first / static_cast<double>(sums.second);
        }
        return out_means;
      };
      auto paired = [&](auto get) {
        const auto ma = item_means(rows, get);
        const auto mb = item_means(rows_b, get);
        std::vector<double> va, vb;
        for (const auto& [item, mean_a] : ma) {
          const auto it = mb.find(item);
          if (it != mb.end()) {
            va.push_back(mean_a);
            vb.push_back(it->second);
          }
        }
        return wilcoxon_signed_rank(va, vb);
      };
      out["wilcoxon_p_cp"] = paired([](const Row& r) { return double(r.cp); });
      out["wilcoxon_p_flu"] = paired([](const Row& r) { return double(r.flu); });
      out["wilcoxon_p_ata"] = paired([](const Row& r) { return double(r.ata); });
      std::vector<LikertItem> likert_b;
      for (const Row& r : rows_b) likert_b.push_back({r.cp, r.flu, r.ata});
      out["success_rate_compare"] = success_rate(likert_b);
    }
    {
      std::ofstream f(stats_out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open " + stats_out);
      f << out.dump(2) << "\n";
    }
    RunManifest m;
    m.command = "stats";
    m.seed = seed;
    m.config = {{"metric", stats_metric}};
    m.inputs = {stats_ratings};
    if (!stats_compare.empty()) m.inputs.push_back(stats_compare);
    m.outputs = {stats_out};
    finish_manifest(std::move(m), timer, stats_out + ".manifest.json");
    std::cout << "stats: wrote " << stats_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
