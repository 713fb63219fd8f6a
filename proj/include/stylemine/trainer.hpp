#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "stylemine/bpe.hpp"
#include "stylemine/eval.hpp"
#include "stylemine/mining.hpp"
#include "stylemine/noiser.hpp"
#include "stylemine/seqmodel.hpp"

namespace stylemine {

struct TokenizedSentence {
  std::int64_t id = 0;
  std::string text;
  std::vector<int> ids;  // content token ids, no prefix
};

struct TokenizedCorpus {
  StyleTag style;
  int tag_id = -1;
  std::vector<TokenizedSentence> sents;

  std::size_t size() const { return sents.size(); }
};

// Sentences whose content exceeds max_content_len are dropped, not truncated.
inline TokenizedCorpus tokenize_corpus(const BpeModel& bpe, const StyleCorpus& corpus,
                                       int max_content_len, long* dropped = nullptr) {
  TokenizedCorpus out;
  out.style = corpus.style;
  out.tag_id = bpe.tag_id(corpus.style);
  long skipped = 0;
  for (const Sentence& s : corpus.sentences) {
    TokenizedSentence t;
    t.id = s.id;
    t.text = s.text;
    t.ids = bpe.encode(s.text).ids;
    if (static_cast<int>(t.ids.size()) > max_content_len) {
      ++skipped;
      continue;
    }
    out.sents.push_back(std::move(t));
  }
  if (dropped) *dropped = skipped;
  return out;
}

// Desk-scale evaluation proxies shared by training-time logging and the
// evaluate command: style classifier, trigram fluency scorer, CP embedder.
struct EvalSuite {
  StyleClassifier classifier;
  FluencyScorer fluency;
  Embedder embedder;
};

inline EvalSuite build_eval_suite(const Seq2SeqModel& embed_model, const BpeModel& bpe,
                                  const StyleCorpus& train_a, const StyleCorpus& train_b,
                                  const StyleCorpus& dev_a, const StyleCorpus& dev_b,
                                  std::uint64_t seed) {
  EvalSuite suite;
  ClassifierConfig ccfg;
  ccfg.seed = seed;
  suite.classifier = StyleClassifier::train(train_a, train_b, &dev_a, &dev_b, ccfg);
  suite.fluency = FluencyScorer(TrigramLm::train({&train_a, &train_b}));
  std::vector<std::string> calib;
  for (const Sentence& s : dev_a.sentences) calib.push_back(s.text);
  for (const Sentence& s : dev_b.sentences) calib.push_back(s.text);
  suite.fluency.calibrate(calib, seed);
  suite.embedder = make_embedding_bag(embed_model, bpe, {&train_a, &train_b});
  return suite;
}

struct TrainConfig {
  int batch_size = 50;
  int max_len = 100;  // model input cap in subword units
  int dae_steps = 600;
  int spe_k = 4;
  bool use_spe = true;
  bool use_bt = true;
  bool use_dae = true;
  int patience = 5;
  int min_steps = 150;        // updates before early stopping may trigger
  int first_checkpoint = 3;   // early checkpoint capturing the initial loop state
  int checkpoint_every = 20;  // updates between dev evaluations afterwards
  int dev_eval_cap = 120;     // dev sentences decoded per side per checkpoint (0 = all)
  int max_passes = 40;
  double bt_sample_rate = 1.0;
  IndexMode index_mode = IndexMode::exact;
  std::uint64_t seed = 0;

  int max_content_len(int insert_masks = 1) const {
    // room for the style prefix, EOS and any inserted masks
    return max_len - 2 - insert_masks;
  }
};

struct TrainLogRecord {
  long step = 0;
  double dev_ata = 0.0;
  std::optional<double> bt_flu, bt_cp, bt_ata;
  long accepted_count = 0;
  long rejected_count = 0;
};

struct TrainLog {
  std::vector<TrainLogRecord> records;

  nlohmann::json record_json(const TrainLogRecord& r) const {
    nlohmann::json j;
    j["step"] = r.step;
    j["dev_ata"] = r.dev_ata;
    j["bt_flu"] = r.bt_flu ? nlohmann::json(*r.bt_flu) : nlohmann::json();
    j["bt_cp"] = r.bt_cp ? nlohmann::json(*r.bt_cp) : nlohmann::json();
    j["bt_ata"] = r.bt_ata ? nlohmann::json(*r.bt_ata) : nlohmann::json();
    j["accepted_count"] = r.accepted_count;
    j["rejected_count"] = r.rejected_count;
    return j;
  }

  void save_jsonl(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("TrainLog::save_jsonl: cannot open " + path);
    for (const auto& r : records) f << record_json(r).dump() << "\n";
  }
};

struct DaeRecord {
  long step = 0;
  double dev_loss = 0.0;
};

struct DaeResult {
  Seq2SeqModel model;
  std::vector<DaeRecord> log;
};

namespace trainer_detail {

// Per-corpus epoch cursor with seeded reshuffling.
class Cursor {
 public:
  Cursor(std::size_t n, Rng rng) : order_(n), rng_(std::move(rng)) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = static_cast<int>(i);
    rng_.shuffle(order_);
  }
  int next() {
    if (pos_ == order_.size()) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::vector<int> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

// Denoising pairs are style-neutral: the corrupted source carries no style
// tag, mirroring pre-training on generic data. Style conditioning is learned
// later from the extracted and back-translated pairs.
inline TrainingPair make_dae_pair(const TokenizedSentence& sent, Direction dir,
                                  const NoiseConfig& cfg, Rng& rng) {
  TokenSequence clean;
  clean.ids = sent.ids;
  NoisedPair noised = noise(clean, cfg, rng);
  TrainingPair pair;
  pair.src = std::move(noised.noisy);
  pair.tgt.ids = sent.ids;
  pair.direction = dir;
  pair.origin = PairOrigin::denoising;
  return pair;
}

inline std::string ids_key(const std::vector<int>& ids) {
  std::string key;
  key.reserve(ids.size() * 3);
  for (int id : ids) {
    key += std::to_string(id);
    key.push_back(',');
  }
  return key;
}

}  // namespace trainer_detail

// Denoising-autoencoder pre-training over both monostylistic corpora. The
// target carries its own style tag as the source prefix. steps == 0 returns
// the model untouched.
inline DaeResult pretrain_dae(Seq2SeqModel model, const TokenizedCorpus& corpus_a,
                              const TokenizedCorpus& corpus_b, const NoiseConfig& noise_cfg,
                              int steps, int batch_size, std::uint64_t seed,
                              const TokenizedCorpus* dev_a = nullptr,
                              const TokenizedCorpus* dev_b = nullptr, int eval_every = 100) {
  if (steps < 0) throw std::invalid_argument("pretrain_dae: negative step count");
  DaeResult result{std::move(model), {}};
  if (steps == 0) return result;
  if (corpus_a.sents.empty() || corpus_b.sents.empty()) {
    throw std::invalid_argument("pretrain_dae: empty corpus");
  }
  Rng base(seed);
  trainer_detail::Cursor cur_a(corpus_a.size(), base.fork(1));
  trainer_detail::Cursor cur_b(corpus_b.size(), base.fork(2));
  Rng noise_rng = base.fork(3);

  // fixed noised dev batch for the loss trend
  std::vector<TrainingPair> dev_batch;
  if (dev_a && dev_b) {
    Rng dev_rng = base.fork(4);
    const std::size_t cap = 50;
    for (std::size_t i = 0; i < std::min(cap, dev_a->size()); ++i) {
      dev_batch.push_back(trainer_detail::make_dae_pair(dev_a->sents[i], Direction::s1_to_s2,
                                                        noise_cfg, dev_rng));
    }
    for (std::size_t i = 0; i < std::min(cap, dev_b->size()); ++i) {
      dev_batch.push_back(trainer_detail::make_dae_pair(dev_b->sents[i], Direction::s2_to_s1,
                                                        noise_cfg, dev_rng));
    }
  }

  for (int step = 1; step <= steps; ++step) {
    std::vector<TrainingPair> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
      const bool side_a = i % 2 == 0;
      const TokenizedCorpus& c = side_a ? corpus_a : corpus_b;
      const int idx = side_a ? cur_a.next() : cur_b.next();
      batch.push_back(trainer_detail::make_dae_pair(
          c.sents[static_cast<std::size_t>(idx)],
          side_a ? Direction::s1_to_s2 : Direction::s2_to_s1, noise_cfg, noise_rng));
    }
    result.model.train_step(batch);
    if (!dev_batch.empty() && (step % eval_every == 0 || step == steps)) {
      result.log.push_back({step, result.model.loss(dev_batch)});
    }
  }
  return result;
}

// Back-translations from SPE-rejected sentences: the frozen model transfers
// each sentence into the opposite style, and the synthetic output becomes the
// source of a pair whose target is the genuine sentence.
inline std::vector<TrainingPair> bt_generate(const Seq2SeqModel& model, const BpeModel& bpe,
                                             std::span<const TokenizedSentence> rejected,
                                             int own_tag_id, int opposite_tag_id,
                                             Direction direction, int max_out_len) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(rejected.size());
  for (const TokenizedSentence& s : rejected) {
    TokenSequence src_seq;
    src_seq.ids = s.ids;
    const TokenSequence bt = model.decode(src_seq, opposite_tag_id, max_out_len);
    TrainingPair pair;
    pair.src.has_style_prefix = true;
    pair.src.ids.push_back(own_tag_id);
    if (!bt.ids.empty()) {
      const std::string text = bpe.decode(bt);
      TokenSequence re = bpe.encode(text);
      // a degenerate generation can re-encode longer than it decoded
      if (static_cast<int>(re.ids.size()) > max_out_len) re.ids.resize(max_out_len);
      pair.src.ids.insert(pair.src.ids.end(), re.ids.begin(), re.ids.end());
    }
    pair.tgt.ids = s.ids;
    pair.direction = direction;
    pair.origin = PairOrigin::backtranslated;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

inline DualIndex build_dual_index(const Seq2SeqModel& model, const TokenizedCorpus& corpus,
                                  IndexMode mode, std::uint64_t seed) {
  std::vector<std::pair<int, Vec>> ws, es;
  ws.reserve(corpus.size());
  es.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.sents.size(); ++i) {
    TokenSequence seq;
    seq.ids = corpus.sents[i].ids;
    DualEmbedding d = model.represent(seq);
    ws.emplace_back(static_cast<int>(i), std::move(d.w));
    es.emplace_back(static_cast<int>(i), std::move(d.e));
  }
  return {VectorIndex::build(ws, mode, 8, seed), VectorIndex::build(es, mode, 8, seed)};
}

inline std::vector<std::string> transfer(const Seq2SeqModel& model, const BpeModel& bpe,
                                         const std::vector<std::string>& sentences,
                                         const StyleTag& target, int max_out_len = 0) {
  const int tag = bpe.tag_id(target);
  const int max_content = model.config().max_len - 2;
  const int cap = max_out_len > 0 ? max_out_len : max_content;
  std::vector<std::string> out;
  out.reserve(sentences.size());
  for (const std::string& text : sentences) {
    TokenSequence seq = bpe.encode(text);
    if (static_cast<int>(seq.ids.size()) > max_content) seq.ids.resize(max_content);
    out.push_back(bpe.decode(model.decode(seq, tag, cap)));
  }
  return out;
}

struct TrainResult {
  Seq2SeqModel model;
  TrainLog log;
  double best_dev_ata = 0.0;
};

// The 3ST loop: per pass, both corpora are re-indexed from the current model
// snapshot, batches stream through SPE, accepted pairs train both directions,
// and rejected sentences feed online back-translation. Checkpoints track dev
// attribute accuracy; the best snapshot is returned.
inline TrainResult train_3st(Seq2SeqModel model, const BpeModel& bpe, const TokenizedCorpus& s1,
                             const TokenizedCorpus& s2, const TokenizedCorpus& dev1,
                             const TokenizedCorpus& dev2, const TrainConfig& cfg,
                             const EvalSuite& eval) {
  if (!cfg.use_spe && !cfg.use_bt) {
    throw std::invalid_argument("train_3st: need at least one of SPE or BT as supervision");
  }
  if (s1.sents.empty() || s2.sents.empty()) {
    throw std::invalid_argument("train_3st: empty training corpus");
  }
  if (!eval.fluency.calibrated()) {
    throw std::invalid_argument("train_3st: fluency scorer is not calibrated");
  }
  Rng base(cfg.seed);
  Rng shuffle_a = base.fork(11), shuffle_b = base.fork(12), bt_rng = base.fork(13);
  const int max_out_len = cfg.max_content_len();

  const SpecialTokens specials = model.config().specials;

  // verbatim-target audit sets
  std::unordered_set<std::string> corpus_keys_1, corpus_keys_2;
  for (const auto& s : s1.sents) corpus_keys_1.insert(trainer_detail::ids_key(s.ids));
  for (const auto& s : s2.sents) corpus_keys_2.insert(trainer_detail::ids_key(s.ids));
  auto audit = [&](const TrainingPair& p) {
    if (p.src.ids.empty() || !p.src.has_style_prefix || !specials.is_tag(p.src.ids[0])) {
      throw std::logic_error("train_3st: training pair without a target-style prefix");
    }
    for (std::size_t i = 1; i < p.src.ids.size(); ++i) {
      if (specials.is_tag(p.src.ids[i])) {
        throw std::logic_error("train_3st: stray style tag inside source");
      }
    }
    if (p.origin != PairOrigin::denoising) {
      const auto& keys = p.direction == Direction::s1_to_s2 ? corpus_keys_2 : corpus_keys_1;
      if (!keys.count(trainer_detail::ids_key(p.tgt.ids))) {
        throw std::logic_error("train_3st: training target is not a verbatim corpus sentence");
      }
    }
  };

  TrainResult result{std::move(model), {}, -1.0};
  Seq2SeqModel best = result.model;
  long step = 0;
  int checkpoints_without_gain = 0;
  bool stop = false;

  long window_accepted = 0, window_rejected = 0;
  struct BtSample {
    std::string src_text;
    std::string bt_text;
    bool to_style_b;  // style the model was asked to produce
  };
  std::vector<BtSample> window_bt;

  auto dev_texts = [&](const TokenizedCorpus& c) {
    std::vector<std::string> out;
    const std::size_t cap = cfg.dev_eval_cap > 0
                                ? std::min<std::size_t>(c.size(),
                                                        static_cast<std::size_t>(cfg.dev_eval_cap))
                                : c.size();
    out.reserve(cap);
    for (std::size_t i = 0; i < cap; ++i) out.push_back(c.sents[i].text);
    return out;
  };
  const std::vector<std::string> dev1_texts = dev_texts(dev1);
  const std::vector<std::string> dev2_texts = dev_texts(dev2);

  auto checkpoint = [&]() {
    TrainLogRecord rec;
    rec.step = step;
    long hits = 0, total = 0;
    const auto pred1 = transfer(result.model, bpe, dev1_texts, s2.style, max_out_len);
    for (const auto& p : pred1) {
      if (!split_words(p).empty() && eval.classifier.classify(p) == s2.style) ++hits;
      ++total;
    }
    const auto pred2 = transfer(result.model, bpe, dev2_texts, s1.style, max_out_len);
    for (const auto& p : pred2) {
      if (!split_words(p).empty() && eval.classifier.classify(p) == s1.style) ++hits;
      ++total;
    }
    rec.dev_ata = total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
    if (!window_bt.empty()) {
      double cp_sum = 0.0;
      long flu_sum = 0, ata_hits = 0, counted = 0;
      for (const BtSample& s : window_bt) {
        if (split_words(s.bt_text).empty()) continue;
        ++counted;
        cp_sum += content_preservation(s.src_text, s.bt_text, eval.embedder);
        flu_sum += eval.fluency.label(s.bt_text);
        const StyleTag& want = s.to_style_b ? s2.style : s1.style;
        if (eval.classifier.classify(s.bt_text) == want) ++ata_hits;
      }
      if (counted > 0) {
        rec.bt_cp = cp_sum / static_cast<double>(counted);
        rec.bt_flu = 100.0 * static_cast<double>(flu_sum) / static_cast<double>(counted);
        rec.bt_ata = 100.0 * static_cast<double>(ata_hits) / static_cast<double>(counted);
      }
    }
    rec.accepted_count = window_accepted;
    rec.rejected_count = window_rejected;
    result.log.records.push_back(rec);
    window_bt.clear();
    window_accepted = 0;
    window_rejected = 0;
    if (rec.dev_ata >= result.best_dev_ata) {
      // later snapshots win ties: same dev ATA, more training
      if (rec.dev_ata > result.best_dev_ata) {
        checkpoints_without_gain = 0;
      } else {
        ++checkpoints_without_gain;
      }
      result.best_dev_ata = rec.dev_ata;
      best = result.model;
    } else {
      ++checkpoints_without_gain;
    }
    if (step >= cfg.min_steps && checkpoints_without_gain >= cfg.patience) stop = true;
  };

  long next_checkpoint = std::max(1, cfg.first_checkpoint);
  auto train_chunks = [&](std::vector<TrainingPair>& pairs) {
    for (std::size_t off = 0; off < pairs.size() && !stop; off += cfg.batch_size) {
      const std::size_t end = std::min(pairs.size(), off + cfg.batch_size);
      std::vector<TrainingPair> chunk(pairs.begin() + static_cast<long>(off),
                                      pairs.begin() + static_cast<long>(end));
      for (const auto& p : chunk) audit(p);
      result.model.train_step(chunk);
      ++step;
      if (step >= next_checkpoint) {
        checkpoint();
        next_checkpoint = step + cfg.checkpoint_every;
      }
    }
  };

  for (int pass = 0; pass < cfg.max_passes && !stop; ++pass) {
    std::optional<ExtractionRound> round;
    if (cfg.use_spe) {
      MiningConfig mcfg;
      mcfg.k = cfg.spe_k;
      mcfg.mode = cfg.index_mode;
      round.emplace(build_dual_index(result.model, s1, cfg.index_mode, cfg.seed),
                    build_dual_index(result.model, s2, cfg.index_mode, cfg.seed),
                    mcfg);
    }
    std::vector<int> order_a(s1.size()), order_b(s2.size());
    for (std::size_t i = 0; i < order_a.size(); ++i) order_a[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < order_b.size(); ++i) order_b[i] = static_cast<int>(i);
    shuffle_a.shuffle(order_a);
    shuffle_b.shuffle(order_b);
    const std::size_t pass_len = std::min(order_a.size(), order_b.size());

    for (std::size_t off = 0; off < pass_len && !stop; off += cfg.batch_size) {
      const std::size_t end = std::min(pass_len, off + cfg.batch_size);
      const std::span<const int> batch_a(order_a.data() + off, end - off);
      const std::span<const int> batch_b(order_b.data() + off, end - off);

      std::vector<int> rejected_a, rejected_b;
      std::vector<TrainingPair> extracted;
      if (cfg.use_spe) {
        const SpeResult res = round->extract(batch_a, batch_b);
        extracted.reserve(res.accepted.size() * 2);
        for (const CandidatePair& cp : res.accepted) {
          const TokenizedSentence& sa = s1.sents[static_cast<std::size_t>(cp.a_id)];
          const TokenizedSentence& sb = s2.sents[static_cast<std::size_t>(cp.b_id)];
          TrainingPair ab;
          ab.src.has_style_prefix = true;
          ab.src.ids.push_back(s2.tag_id);
          ab.src.ids.insert(ab.src.ids.end(), sa.ids.begin(), sa.ids.end());
          ab.tgt.ids = sb.ids;
          ab.direction = Direction::s1_to_s2;
          ab.origin = PairOrigin::extracted;
          extracted.push_back(std::move(ab));
          TrainingPair ba;
          ba.src.has_style_prefix = true;
          ba.src.ids.push_back(s1.tag_id);
          ba.src.ids.insert(ba.src.ids.end(), sb.ids.begin(), sb.ids.end());
          ba.tgt.ids = sa.ids;
          ba.direction = Direction::s2_to_s1;
          ba.origin = PairOrigin::extracted;
          extracted.push_back(std::move(ba));
        }
        window_accepted += static_cast<long>(res.accepted.size());
        window_rejected += static_cast<long>(res.rejected_a.size() + res.rejected_b.size());
        rejected_a = res.rejected_a;
        rejected_b = res.rejected_b;
      } else {
        rejected_a.assign(batch_a.begin(), batch_a.end());
        rejected_b.assign(batch_b.begin(), batch_b.end());
        window_rejected += static_cast<long>(rejected_a.size() + rejected_b.size());
      }

      // back-translations come from the model as it stands when the batch
      // begins, before this batch's updates
      std::vector<TrainingPair> bt_pairs;
      if (cfg.use_bt) {
        auto sample = [&](std::vector<int>& positions) {
          if (cfg.bt_sample_rate >= 1.0) return;
          std::vector<int> kept;
          for (int p : positions) {
            if (bt_rng.uniform() < cfg.bt_sample_rate) kept.push_back(p);
          }
          positions.swap(kept);
        };
        sample(rejected_a);
        sample(rejected_b);
        std::vector<TokenizedSentence> rej_1, rej_2;
        for (int p : rejected_a) rej_1.push_back(s1.sents[static_cast<std::size_t>(p)]);
        for (int p : rejected_b) rej_2.push_back(s2.sents[static_cast<std::size_t>(p)]);
        // side-1 rejections: the model produces style-2 text, trained 2->1
        auto bt_1 = bt_generate(result.model, bpe, rej_1, s1.tag_id, s2.tag_id,
                                Direction::s2_to_s1, max_out_len);
        auto bt_2 = bt_generate(result.model, bpe, rej_2, s2.tag_id, s1.tag_id,
                                Direction::s1_to_s2, max_out_len);
        for (std::size_t i = 0; i < bt_1.size(); ++i) {
          window_bt.push_back({rej_1[i].text, bpe.decode_ids(bt_1[i].src.content()), true});
        }
        for (std::size_t i = 0; i < bt_2.size(); ++i) {
          window_bt.push_back({rej_2[i].text, bpe.decode_ids(bt_2[i].src.content()), false});
        }
        bt_pairs.reserve(bt_1.size() + bt_2.size());
        for (auto& p : bt_1) bt_pairs.push_back(std::move(p));
        for (auto& p : bt_2) bt_pairs.push_back(std::move(p));
      }

      train_chunks(extracted);
      if (!stop) train_chunks(bt_pairs);
    }
  }
  if (result.log.records.empty()) checkpoint();
  result.model = std::move(best);
  return result;
}

}  // namespace stylemine
