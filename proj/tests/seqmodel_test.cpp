#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "stylemine/seqmodel.hpp"

using namespace stylemine;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 11) {
  ModelConfig cfg;
  cfg.vocab_size = 13;
  cfg.embed_dim = 5;
  cfg.hidden_dim = 4;
  cfg.max_len = 16;
  cfg.seed = seed;
  cfg.init_scale = 0.3;  // exercise the nonlinearities
  return cfg;
}

std::vector<TrainingPair> tiny_batch() {
  std::vector<TrainingPair> batch(2);
  batch[0].src.ids = {5, 8, 9, 10};
  batch[0].src.has_style_prefix = true;
  batch[0].tgt.ids = {11, 9, 12};
  batch[1].src.ids = {6, 12, 7};
  batch[1].src.has_style_prefix = true;
  batch[1].tgt.ids = {8, 10};
  return batch;
}

bool params_equal(const Parameters& a, const Parameters& b) {
  bool equal = true;
  std::vector<const double*> bp;
  std::vector<long> sizes;
  b.for_each_tensor([&](const std::string&, const auto& t) {
    bp.push_back(t.data());
    sizes.push_back(t.size());
  });
  std::size_t k = 0;
  a.for_each_tensor([&](const std::string&, const auto& t) {
    for (long i = 0; i < t.size() && equal; ++i) equal = t.data()[i] == bp[k][i];
    ++k;
  });
  return equal;
}

// max relative FD error with a small-magnitude floor; eps = 1e-5, double
// precision, central differences
double gradient_check(int enc_layers, int dec_layers) {
  ModelConfig cfg = tiny_config();
  cfg.enc_layers = enc_layers;
  cfg.dec_layers = dec_layers;
  Seq2SeqModel model = Seq2SeqModel::init(cfg);
  const auto batch = tiny_batch();
  Parameters grad = model.params();
  grad.setZero();
  model.loss_and_grad(batch, grad);
  std::vector<double*> pflat, gflat;
  std::vector<long> sizes;
  model.params().for_each_tensor([&](const std::string&, auto& t) {
    pflat.push_back(t.data());
    sizes.push_back(t.size());
  });
  grad.for_each_tensor([&](const std::string&, auto& t) { gflat.push_back(t.data()); });
  const double eps = 1e-5;
  double max_rel = 0.0;
  for (std::size_t k = 0; k < pflat.size(); ++k) {
    for (long i = 0; i < sizes[k]; ++i) {
      double* p = &pflat[k][i];
      const double orig = *p;
      *p = orig + eps;
      const double lp = model.loss(batch);
      *p = orig - eps;
      const double lm = model.loss(batch);
      *p = orig;
      const double fd = (lp - lm) / (2 * eps);
      const double an = gflat[k][i];
      max_rel = std::max(max_rel, std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an)));
    }
  }
  return max_rel;
}

TEST(Init, DeterministicUnderSeed) {
  const Seq2SeqModel a = Seq2SeqModel::init(tiny_config(7));
  const Seq2SeqModel b = Seq2SeqModel::init(tiny_config(7));
  EXPECT_TRUE(params_equal(a.params(), b.params()));
}

TEST(Init, SeedsChangeParameters) {
  const Seq2SeqModel a = Seq2SeqModel::init(tiny_config(7));
  const Seq2SeqModel b = Seq2SeqModel::init(tiny_config(8));
  EXPECT_FALSE(params_equal(a.params(), b.params()));
}

TEST(Init, RejectsBadConfig) {
  ModelConfig cfg = tiny_config();
  cfg.embed_dim = 0;
  EXPECT_THROW(Seq2SeqModel::init(cfg), std::invalid_argument);
  cfg = tiny_config();
  cfg.vocab_size = 5;  // cannot cover the reserved ids
  EXPECT_THROW(Seq2SeqModel::init(cfg), std::invalid_argument);
  cfg = tiny_config();
  cfg.max_len = 1;
  EXPECT_THROW(Seq2SeqModel::init(cfg), std::invalid_argument);
}

TEST(Represent, SingleTokenEqualsEmbeddingRow) {
  const Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  TokenSequence seq;
  seq.ids = {9};
  const DualEmbedding d = model.represent(seq);
  const Vec expected = model.params().embedding.col(9);
  EXPECT_NEAR((d.w - expected).norm(), 0.0, 1e-15);
}

TEST(Represent, BagPropertyUnderPermutation) {
  const Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  TokenSequence seq, perm;
  seq.ids = {7, 8, 9, 10, 11};
  perm.ids = {10, 8, 11, 9, 7};
  const Vec w1 = model.represent(seq).w;
  const Vec w2 = model.represent(perm).w;
  EXPECT_NEAR((w1 - w2).norm(), 0.0, 1e-12);
}

TEST(Represent, AdditivityOracle) {
  // w of a 3-token sequence equals the element-wise sum of the one-token w's
  const Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  TokenSequence abc;
  abc.ids = {7, 9, 12};
  Vec sum = Vec::Zero(model.config().embed_dim);
  for (int id : abc.ids) {
    TokenSequence one;
    one.ids = {id};
    sum += model.represent(one).w;
  }
  EXPECT_NEAR((model.represent(abc).w - sum).norm(), 0.0, 1e-12);
}

TEST(Represent, ExcludesTagFromSums) {
  const Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  TokenSequence bare, tagged;
  bare.ids = {8, 9};
  tagged.ids = {5, 8, 9};
  tagged.has_style_prefix = true;
  EXPECT_NEAR((model.represent(bare).w - model.represent(tagged).w).norm(), 0.0, 1e-12);
}

TEST(Represent, PureAndRejectsOverLength) {
  const Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  TokenSequence seq;
  seq.ids = {7, 8, 9};
  const DualEmbedding d1 = model.represent(seq);
  const DualEmbedding d2 = model.represent(seq);
  EXPECT_EQ((d1.w - d2.w).norm(), 0.0);
  EXPECT_EQ((d1.e - d2.e).norm(), 0.0);
  TokenSequence long_seq;
  for (int i = 0; i < 16; ++i) long_seq.ids.push_back(7);
  EXPECT_THROW(model.represent(long_seq), std::invalid_argument);
}

TEST(TrainStep, FirstLossNearLogVocab) {
  ModelConfig cfg = tiny_config();
  cfg.init_scale = 0.05;
  cfg.vocab_size = 40;
  Seq2SeqModel model = Seq2SeqModel::init(cfg);
  std::vector<TrainingPair> batch(1);
  batch[0].src.ids = {5, 8, 9};
  batch[0].src.has_style_prefix = true;
  batch[0].tgt.ids = {10, 11};
  const double expected = std::log(static_cast<double>(cfg.vocab_size));
  const double loss = model.loss(batch);
  EXPECT_GT(loss, 0.8 * expected);
  EXPECT_LT(loss, 1.2 * expected);
}

TEST(TrainStep, MemorizesARepeatedPair) {
  ModelConfig cfg = tiny_config(3);
  cfg.learning_rate = 0.01;
  Seq2SeqModel model = Seq2SeqModel::init(cfg);
  std::vector<TrainingPair> batch(1);
  batch[0].src.ids = {5, 8, 9, 10};
  batch[0].src.has_style_prefix = true;
  batch[0].tgt.ids = {11, 9, 12};
  double loss = 0.0;
  for (int step = 0; step < 200; ++step) loss = model.train_step(batch);
  EXPECT_LT(loss, 0.1);
  EXPECT_TRUE(model.all_finite());
}

TEST(TrainStep, GradientsMatchFiniteDifferences) {
  EXPECT_LT(gradient_check(1, 1), 1e-4);
  EXPECT_LT(gradient_check(2, 2), 1e-4);
}

TEST(TrainStep, RejectsEmptyBatchAndOverLength) {
  Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  EXPECT_THROW(model.train_step({}), std::invalid_argument);
  std::vector<TrainingPair> batch(1);
  batch[0].src.has_style_prefix = true;
  batch[0].src.ids = {5};
  for (int i = 0; i < 20; ++i) batch[0].src.ids.push_back(8);
  batch[0].tgt.ids = {9};
  EXPECT_THROW(model.train_step(batch), std::invalid_argument);
}

TEST(TrainStep, RejectsTaggedTargets) {
  Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  std::vector<TrainingPair> batch(1);
  batch[0].src.ids = {5, 8};
  batch[0].src.has_style_prefix = true;
  batch[0].tgt.ids = {6, 9};
  batch[0].tgt.has_style_prefix = true;
  EXPECT_THROW(model.train_step(batch), std::invalid_argument);
}

TEST(Decode, GreedyIsDeterministicAndBounded) {
  const Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  TokenSequence src;
  src.ids = {8, 9, 10};
  const TokenSequence a = model.decode(src, SpecialTokens::first_tag, 6);
  const TokenSequence b = model.decode(src, SpecialTokens::first_tag, 6);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_LE(a.size(), 6u);
  for (int id : a.ids) EXPECT_GE(id, model.config().specials.num_reserved());
}

TEST(Decode, RejectsNonTagTarget) {
  const Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  TokenSequence src;
  src.ids = {8};
  EXPECT_THROW(model.decode(src, 9, 5), std::invalid_argument);
}

TEST(Decode, CopyTaskOracle) {
  // fine-tune as a copier on identity pairs, then expect verbatim outputs
  ModelConfig cfg = tiny_config(21);
  cfg.learning_rate = 0.01;
  Seq2SeqModel model = Seq2SeqModel::init(cfg);
  std::vector<TrainingPair> batch;
  const std::vector<std::vector<int>> contents = {
      {7, 8}, {9, 10, 11}, {12, 7, 9}, {8, 11}, {10, 12}, {11, 7, 8, 9}};
  for (const auto& ids : contents) {
    TrainingPair p;
    p.src.has_style_prefix = true;
    p.src.ids.push_back(SpecialTokens::first_tag);
    p.src.ids.insert(p.src.ids.end(), ids.begin(), ids.end());
    p.tgt.ids = ids;
    batch.push_back(p);
  }
  for (int step = 0; step < 400; ++step) model.train_step(batch);
  ASSERT_GT(model.token_accuracy(batch), 0.99);
  for (const auto& ids : contents) {
    TokenSequence src;
    src.ids = ids;
    EXPECT_EQ(model.decode(src, SpecialTokens::first_tag, 10).ids, ids);
  }
}

TEST(Checkpoint, RoundTripsBitExactly) {
  ModelConfig cfg = tiny_config(19);
  Seq2SeqModel model = Seq2SeqModel::init(cfg);
  model.train_step(tiny_batch());
  const std::string path = testing::TempDir() + "model.ckpt";
  model.save(path);
  const Seq2SeqModel back = Seq2SeqModel::load(path);
  EXPECT_TRUE(params_equal(model.params(), back.params()));
  EXPECT_EQ(back.config().vocab_size, cfg.vocab_size);
  EXPECT_EQ(back.config().hidden_dim, cfg.hidden_dim);
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  const std::string bogus = testing::TempDir() + "bogus.ckpt";
  {
    std::ofstream f(bogus, std::ios::binary);
    f << "NOTACKPTxxxxxxxxxxxxxxxx";
  }
  EXPECT_THROW(Seq2SeqModel::load(bogus), std::runtime_error);

  Seq2SeqModel model = Seq2SeqModel::init(tiny_config());
  const std::string path = testing::TempDir() + "trunc.ckpt";
  model.save(path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  bytes.resize(bytes.size() / 2);
  const std::string trunc = testing::TempDir() + "trunc2.ckpt";
  {
    std::ofstream f(trunc, std::ios::binary);
    f << bytes;
  }
  EXPECT_THROW(Seq2SeqModel::load(trunc), std::runtime_error);
}

TEST(Checkpoint, RejectsShapeMismatch) {
  // write one config, splice in a tensor header from a different shape
  ModelConfig small = tiny_config();
  Seq2SeqModel model = Seq2SeqModel::init(small);
  const std::string path = testing::TempDir() + "shape.ckpt";
  model.save(path);
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  // corrupt the embed_dim field (second config slot after the magic)
  f.seekp(8 + 8);
  const std::int64_t wrong = 7;
  f.write(reinterpret_cast<const char*>(&wrong), 8);
  f.close();
  EXPECT_THROW(Seq2SeqModel::load(path), std::runtime_error);
}

}  // namespace
