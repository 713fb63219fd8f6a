#include <gtest/gtest.h>

#include <cmath>

#include "stylemine/synth.hpp"
#include "stylemine/trainer.hpp"

using namespace stylemine;

namespace {

struct Task {
  SynthSplits splits;
  BpeModel bpe;
  TokenizedCorpus train_a, train_b, dev_a, dev_b;
  NoiseConfig noise;

  explicit Task(int n_train = 200, int n_dev = 60, std::uint64_t seed = 41)
      : splits(synth_splits(n_train, n_dev, 0, seed)),
        bpe(train_bpe({splits.train.a, splits.train.b}, 400)) {
    train_a = tokenize_corpus(bpe, splits.train.a, 40);
    train_b = tokenize_corpus(bpe, splits.train.b, 40);
    dev_a = tokenize_corpus(bpe, splits.dev.a, 40);
    dev_b = tokenize_corpus(bpe, splits.dev.b, 40);
    for (const char* p : {".", ",", "!", "?"}) {
      const int id = bpe.token_id(std::string(p) + bpe_eow());
      if (id >= 0) noise.boundary_ids.insert(id);
    }
  }

  ModelConfig model_config(std::uint64_t seed, int embed = 32, int hidden = 32) const {
    ModelConfig cfg;
    cfg.vocab_size = bpe.vocab_size();
    cfg.embed_dim = embed;
    cfg.hidden_dim = hidden;
    cfg.max_len = 44;
    cfg.learning_rate = 0.01;
    cfg.seed = seed;
    cfg.specials.num_tags = static_cast<int>(bpe.styles.size());
    return cfg;
  }

  EvalSuite suite(const Seq2SeqModel& model) const {
    return build_eval_suite(model, bpe, splits.train.a, splits.train.b, splits.dev.a,
                            splits.dev.b, 5);
  }
};

Task& task() {
  static Task t;
  return t;
}

bool params_equal(const Parameters& a, const Parameters& b) {
  bool equal = true;
  std::vector<const double*> bp;
  b.for_each_tensor([&](const std::string&, const auto& t) { bp.push_back(t.data()); });
  std::size_t k = 0;
  a.for_each_tensor([&](const std::string&, const auto& t) {
    for (long i = 0; i < t.size() && equal; ++i) equal = t.data()[i] == bp[k][i];
    ++k;
  });
  return equal;
}

TEST(TokenizeCorpus, DropsOverLengthSentences) {
  const auto& t = task();
  long dropped = 0;
  const TokenizedCorpus tc = tokenize_corpus(t.bpe, t.splits.train.a, 3, &dropped);
  EXPECT_GT(dropped, 0);
  EXPECT_EQ(tc.size() + static_cast<std::size_t>(dropped), t.splits.train.a.size());
  for (const auto& s : tc.sents) EXPECT_LE(s.ids.size(), 3u);
}

TEST(PretrainDae, ZeroStepsLeavesParametersUntouched) {
  const auto& t = task();
  Seq2SeqModel model = Seq2SeqModel::init(t.model_config(1));
  const Seq2SeqModel copy = model;
  const DaeResult res =
      pretrain_dae(std::move(model), t.train_a, t.train_b, t.noise, 0, 10, 3);
  EXPECT_TRUE(params_equal(res.model.params(), copy.params()));
  EXPECT_TRUE(res.log.empty());
}

TEST(PretrainDae, EmptyCorpusFails) {
  const auto& t = task();
  Seq2SeqModel model = Seq2SeqModel::init(t.model_config(1));
  TokenizedCorpus empty;
  empty.style = t.train_a.style;
  empty.tag_id = t.train_a.tag_id;
  EXPECT_THROW(pretrain_dae(std::move(model), empty, t.train_b, t.noise, 5, 10, 3),
               std::invalid_argument);
}

TEST(PretrainDae, ReconstructsCleanDevSentences) {
  // dedicated larger task: reconstruction quality needs corpus variety
  const Task t(500, 60, 41);
  Seq2SeqModel model = Seq2SeqModel::init(t.model_config(9, 48, 48));
  const DaeResult res = pretrain_dae(std::move(model), t.train_a, t.train_b, t.noise, 700, 50,
                                     7, &t.dev_a, &t.dev_b, 70);
  // token accuracy of clean reconstruction from noised dev inputs
  std::vector<TrainingPair> dev_pairs;
  Rng rng(123);
  for (const TokenizedCorpus* corpus : {&t.dev_a, &t.dev_b}) {
    for (std::size_t i = 0; i < 50; ++i) {
      dev_pairs.push_back(trainer_detail::make_dae_pair(corpus->sents[i], Direction::s1_to_s2,
                                                        t.noise, rng));
    }
  }
  EXPECT_GE(res.model.token_accuracy(dev_pairs), 0.90);

  // dev loss trend: smoothed curve ends below its start and never jumps up
  // by more than 10% of the total drop
  ASSERT_GE(res.log.size(), 3u);
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 2 < res.log.size(); ++i) {
    smooth.push_back(
        (res.log[i].dev_loss + res.log[i + 1].dev_loss + res.log[i + 2].dev_loss) / 3.0);
  }
  EXPECT_LT(smooth.back(), smooth.front());
  const double drop = smooth.front() - smooth.back();
  for (std::size_t i = 0; i + 1 < smooth.size(); ++i) {
    EXPECT_LE(smooth[i + 1], smooth[i] + 0.1 * drop);
  }
}

TEST(BtGenerate, EmptyInputGivesEmptyOutput) {
  const auto& t = task();
  const Seq2SeqModel model = Seq2SeqModel::init(t.model_config(2));
  const auto pairs = bt_generate(model, t.bpe, {}, t.train_a.tag_id, t.train_b.tag_id,
                                 Direction::s2_to_s1, 20);
  EXPECT_TRUE(pairs.empty());
}

TEST(BtGenerate, TargetsAreTheRejectedSentencesBijectively) {
  const auto& t = task();
  const Seq2SeqModel model = Seq2SeqModel::init(t.model_config(2));
  std::vector<TokenizedSentence> rejected(t.train_a.sents.begin(), t.train_a.sents.begin() + 12);
  const auto pairs = bt_generate(model, t.bpe, rejected, t.train_a.tag_id, t.train_b.tag_id,
                                 Direction::s2_to_s1, 20);
  ASSERT_EQ(pairs.size(), rejected.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].tgt.ids, rejected[i].ids);
    EXPECT_EQ(pairs[i].origin, PairOrigin::backtranslated);
    ASSERT_FALSE(pairs[i].src.ids.empty());
    EXPECT_EQ(pairs[i].src.ids[0], t.train_a.tag_id);
  }
}

TEST(BtGenerate, CopyModelProducesIdentitySources) {
  // train a tag-agnostic copier (identity pairs under both tags), then BT
  // sources should reproduce their targets up to the style prefix
  const auto& t = task();
  Seq2SeqModel model = Seq2SeqModel::init(t.model_config(33));
  std::vector<TrainingPair> copy_batch;
  for (int i = 0; i < 25; ++i) {
    for (const TokenizedCorpus* c : {&t.train_a, &t.train_b}) {
      const auto& ids = c->sents[static_cast<std::size_t>(i)].ids;
      for (int tag : {t.train_a.tag_id, t.train_b.tag_id}) {
        TrainingPair p;
        p.src.has_style_prefix = true;
        p.src.ids.push_back(tag);
        p.src.ids.insert(p.src.ids.end(), ids.begin(), ids.end());
        p.tgt.ids = ids;
        copy_batch.push_back(std::move(p));
      }
    }
  }
  for (int step = 0; step < 300; ++step) model.train_step(copy_batch);
  ASSERT_GT(model.token_accuracy(copy_batch), 0.98);

  std::vector<TokenizedSentence> rejected(t.train_a.sents.begin(), t.train_a.sents.begin() + 20);
  const auto pairs = bt_generate(model, t.bpe, rejected, t.train_a.tag_id, t.train_b.tag_id,
                                 Direction::s2_to_s1, 30);
  int copies = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    copies += pairs[i].src.content() == pairs[i].tgt.ids;
  }
  EXPECT_GE(copies, 16);  // greedy decoding may wobble on a few
}

TEST(Train3st, RequiresASupervisionSource) {
  const auto& t = task();
  Seq2SeqModel model = Seq2SeqModel::init(t.model_config(3));
  const EvalSuite suite = t.suite(model);
  TrainConfig cfg;
  cfg.use_spe = false;
  cfg.use_bt = false;
  EXPECT_THROW(
      train_3st(std::move(model), t.bpe, t.train_a, t.train_b, t.dev_a, t.dev_b, cfg, suite),
      std::invalid_argument);
}

TEST(Train3st, DeterministicTrainLogUnderFixedSeed) {
  const auto& t = task();
  TrainConfig cfg;
  cfg.seed = 77;
  cfg.batch_size = 25;
  cfg.max_len = 44;
  cfg.checkpoint_every = 8;
  cfg.max_passes = 2;
  cfg.patience = 50;
  auto run = [&]() {
    Seq2SeqModel model = Seq2SeqModel::init(t.model_config(4));
    const EvalSuite suite = t.suite(model);
    return train_3st(std::move(model), t.bpe, t.train_a, t.train_b, t.dev_a, t.dev_b, cfg,
                     suite);
  };
  const TrainResult r1 = run();
  const TrainResult r2 = run();
  ASSERT_EQ(r1.log.records.size(), r2.log.records.size());
  ASSERT_FALSE(r1.log.records.empty());
  for (std::size_t i = 0; i < r1.log.records.size(); ++i) {
    const auto& a = r1.log.records[i];
    const auto& b = r2.log.records[i];
    EXPECT_EQ(a.step, b.step);
    EXPECT_EQ(a.dev_ata, b.dev_ata);
    EXPECT_EQ(a.accepted_count, b.accepted_count);
    EXPECT_EQ(a.rejected_count, b.rejected_count);
    EXPECT_EQ(a.bt_ata.has_value(), b.bt_ata.has_value());
    if (a.bt_ata) EXPECT_EQ(*a.bt_ata, *b.bt_ata);
  }
  EXPECT_TRUE(params_equal(r1.model.params(), r2.model.params()));
}

TEST(Train3st, LogsWindowCountsAndStaysFinite) {
  const auto& t = task();
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.batch_size = 25;
  cfg.max_len = 44;
  cfg.checkpoint_every = 10;
  cfg.max_passes = 1;
  cfg.patience = 50;
  Seq2SeqModel model = Seq2SeqModel::init(t.model_config(6));
  const EvalSuite suite = t.suite(model);
  const TrainResult res =
      train_3st(std::move(model), t.bpe, t.train_a, t.train_b, t.dev_a, t.dev_b, cfg, suite);
  ASSERT_FALSE(res.log.records.empty());
  for (const auto& rec : res.log.records) {
    EXPECT_GE(rec.dev_ata, 0.0);
    EXPECT_LE(rec.dev_ata, 100.0);
    EXPECT_GE(rec.accepted_count + rec.rejected_count, 0);
    if (rec.bt_ata) {
      EXPECT_GE(*rec.bt_ata, 0.0);
      EXPECT_LE(*rec.bt_ata, 100.0);
    }
  }
  EXPECT_TRUE(res.model.all_finite());
  EXPECT_GE(res.best_dev_ata, 0.0);
}

TEST(Transfer, PreservesOrderAndCount) {
  const auto& t = task();
  const Seq2SeqModel model = Seq2SeqModel::init(t.model_config(8));
  std::vector<std::string> inputs;
  for (int i = 0; i < 7; ++i) {
    inputs.push_back(t.splits.dev.a.sentences[static_cast<std::size_t>(i)].text);
  }
  const auto out = transfer(model, t.bpe, inputs, t.splits.train.b.style);
  EXPECT_EQ(out.size(), inputs.size());
  EXPECT_TRUE(transfer(model, t.bpe, {}, t.splits.train.b.style).empty());
}

TEST(TrainLogFile, WritesOneJsonRecordPerLine) {
  TrainLog log;
  log.records.push_back({10, 50.0, 80.0, 0.9, 12.0, 3, 40});
  TrainLogRecord no_bt;
  no_bt.step = 20;
  no_bt.dev_ata = 60.0;
  log.records.push_back(no_bt);
  const std::string path = testing::TempDir() + "log.jsonl";
  log.save_jsonl(path);
  std::ifstream f(path);
  std::string line;
  ASSERT_TRUE(std::getline(f, line));
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["step"], 10);
  EXPECT_EQ(j["accepted_count"], 3);
  ASSERT_TRUE(std::getline(f, line));
  j = nlohmann::json::parse(line);
  EXPECT_TRUE(j["bt_ata"].is_null());
  EXPECT_EQ(j["dev_ata"], 60.0);
}

}  // namespace
