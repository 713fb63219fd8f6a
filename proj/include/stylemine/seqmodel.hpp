#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemine/rng.hpp"
#include "stylemine/types.hpp"

namespace stylemine {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 48;
  int hidden_dim = 48;   // per encoder direction; decoder width is 2*hidden_dim
  int enc_layers = 1;
  int dec_layers = 1;
  int max_len = 100;     // max input length in subword units, prefix and EOS included
  double learning_rate = 0.01;
  double grad_clip = 5.0;
  double init_scale = 0.2;
  std::uint64_t seed = 0;
  SpecialTokens specials;

  int enc_out_dim() const { return 2 * hidden_dim; }

  void validate() const {
    if (embed_dim < 1 || hidden_dim < 1) {
      throw std::invalid_argument("ModelConfig: dims must be >= 1");
    }
    if (enc_layers < 1 || dec_layers < 1) {
      throw std::invalid_argument("ModelConfig: layer counts must be >= 1");
    }
    if (max_len < 2) throw std::invalid_argument("ModelConfig: max_len must be >= 2");
    if (vocab_size <= specials.num_reserved()) {
      throw std::invalid_argument("ModelConfig: vocab_size must cover all special ids");
    }
    if (learning_rate <= 0) throw std::invalid_argument("ModelConfig: learning_rate must be > 0");
  }
};

// The two sentence representations used for pair extraction: the sum of the
// input word embeddings and the sum of the encoder output states, both taken
// over content positions only.
struct DualEmbedding {
  Vec w;
  Vec e;
};

struct GruCell {
  Mat wz, wr, wh;  // h x in
  Mat uz, ur, uh;  // h x h
  Vec bz, br, bh;
};

struct Parameters {
  Mat embedding;  // embed_dim x vocab (column per token, shared enc/dec input)
  std::vector<GruCell> enc_fwd, enc_bwd;
  std::vector<Mat> dec_init_w;  // 2h x 2h per decoder layer
  std::vector<Vec> dec_init_b;
  std::vector<GruCell> dec;
  Mat attn_combine_w;  // embed_dim x 4h, applied to [state; context]
  Vec attn_combine_b;
  Mat out_w;  // vocab x embed_dim
  Vec out_b;

  template <typename F>
  void for_each_tensor(F&& f) {
    f("embedding", embedding);
    auto visit_cell = [&](const std::string& prefix, GruCell& c) {
      f(prefix + ".wz", c.wz);
      f(prefix + ".wr", c.wr);
      f(prefix + ".wh", c.wh);
      f(prefix + ".uz", c.uz);
      f(prefix + ".ur", c.ur);
      f(prefix + ".uh", c.uh);
      f(prefix + ".bz", c.bz);
      f(prefix + ".br", c.br);
      f(prefix + ".bh", c.bh);
    };
    for (std::size_t l = 0; l < enc_fwd.size(); ++l) {
      visit_cell("enc" + std::to_string(l) + ".fwd", enc_fwd[l]);
      visit_cell("enc" + std::to_string(l) + ".bwd", enc_bwd[l]);
    }
    for (std::size_t l = 0; l < dec.size(); ++l) {
      f("dec_init" + std::to_string(l) + ".w", dec_init_w[l]);
      f("dec_init" + std::to_string(l) + ".b", dec_init_b[l]);
      visit_cell("dec" + std::to_string(l), dec[l]);
    }
    f("attn.w", attn_combine_w);
    f("attn.b", attn_combine_b);
    f("out.w", out_w);
    f("out.b", out_b);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<Parameters*>(this)->for_each_tensor(
        [&](const std::string& name, auto& t) { f(name, std::as_const(t)); });
  }

  void setZero() {
    for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
  }

  long total_size() const {
    long n = 0;
    for_each_tensor([&](const std::string&, const auto& t) { n += t.size(); });
    return n;
  }
};

namespace seqmodel_detail {

inline Vec sigmoid(const Vec& x) {
  return 1.0 / (1.0 + (-x.array()).exp());
}

struct GruStep {
  Vec z, r, hb, h;
};

inline GruStep gru_forward(const GruCell& c, const Vec& x, const Vec& h_prev) {
  GruStep s;
  s.z = sigmoid(c.wz * x + c.uz * h_prev + c.bz);
  s.r = sigmoid(c.wr * x + c.ur * h_prev + c.br);
  s.hb = (c.wh * x + c.uh * (s.r.array() * h_prev.array()).matrix() + c.bh).array().tanh();
  s.h = ((1.0 - s.z.array()) * h_prev.array() + s.z.array() * s.hb.array()).matrix();
  return s;
}

// Returns gradients w.r.t. the step input and previous state while
// accumulating parameter gradients into `g`.
inline void gru_backward(const GruCell& c, GruCell& g, const Vec& x, const Vec& h_prev,
                         const GruStep& s, const Vec& dh, Vec& dx_out, Vec& dh_prev_out) {
  const Vec dz = (dh.array() * (s.hb - h_prev).array()).matrix();
  const Vec dhb = (dh.array() * s.z.array()).matrix();
  Vec dh_prev = (dh.array() * (1.0 - s.z.array())).matrix();

  const Vec dhb_pre = (dhb.array() * (1.0 - s.hb.array().square())).matrix();
  g.wh.noalias() += dhb_pre * x.transpose();
  g.uh.noalias() += dhb_pre * (s.r.array() * h_prev.array()).matrix().transpose();
  g.bh += dhb_pre;
  Vec dx = c.wh.transpose() * dhb_pre;
  const Vec drh = c.uh.transpose() * dhb_pre;
  const Vec dr = (drh.array() * h_prev.array()).matrix();
  dh_prev += (drh.array() * s.r.array()).matrix();

  const Vec dz_pre = (dz.array() * s.z.array() * (1.0 - s.z.array())).matrix();
  const Vec dr_pre = (dr.array() * s.r.array() * (1.0 - s.r.array())).matrix();
  g.wz.noalias() += dz_pre * x.transpose();
  g.uz.noalias() += dz_pre * h_prev.transpose();
  g.bz += dz_pre;
  dx.noalias() += c.wz.transpose() * dz_pre;
  dh_prev.noalias() += c.uz.transpose() * dz_pre;
  g.wr.noalias() += dr_pre * x.transpose();
  g.ur.noalias() += dr_pre * h_prev.transpose();
  g.br += dr_pre;
  dx.noalias() += c.wr.transpose() * dr_pre;
  dh_prev.noalias() += c.ur.transpose() * dr_pre;

  dx_out = std::move(dx);
  dh_prev_out = std::move(dh_prev);
}

struct DirTrace {
  Mat h;            // h x (T+1); forward: col 0 initial, backward: col T initial
  std::vector<GruStep> steps;  // per time index
};

struct EncTrace {
  std::vector<int> ids;        // prefix + content + EOS
  std::vector<Mat> layer_in;   // per layer: in_dim x T
  std::vector<DirTrace> fwd, bwd;
  Mat outputs;                 // 2h x T
  Vec summary;                 // [fwd final; bwd final] of top layer
};

struct DecStepTrace {
  std::vector<GruStep> layers;
  Vec alpha;     // attention weights over source positions
  Vec context;   // 2h
  Vec combined;  // tanh output, embed_dim
};

}  // namespace seqmodel_detail

class Seq2SeqModel {
 public:
  static Seq2SeqModel init(const ModelConfig& cfg) {
    cfg.validate();
    Seq2SeqModel m;
    m.cfg_ = cfg;
    m.params_ = make_parameters(cfg);
    Rng rng = Rng(cfg.seed).fork(0x6d6f64656cULL);
    m.params_.for_each_tensor([&](const std::string& name, auto& t) {
      const bool is_bias = name.ends_with(".b") || name.ends_with(".bz") ||
                           name.ends_with(".br") || name.ends_with(".bh");
      for (long i = 0; i < t.size(); ++i) {
        t.data()[i] = is_bias ? 0.0 : rng.normal(0.0, cfg.init_scale);
      }
    });
    m.adam_m_ = make_parameters(cfg);
    m.adam_v_ = make_parameters(cfg);
    m.adam_m_.setZero();
    m.adam_v_.setZero();
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }

  void set_learning_rate(double lr) {
    if (lr <= 0) throw std::invalid_argument("set_learning_rate: must be > 0");
    cfg_.learning_rate = lr;
  }

  // Mean per-token cross-entropy with teacher forcing, one optimizer update.
  double train_step(const std::vector<TrainingPair>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    Parameters grad = make_parameters(cfg_);
    grad.setZero();
    const double loss = loss_and_grad(batch, grad);
    if (!std::isfinite(loss)) throw std::runtime_error("train_step: non-finite loss");
    apply_adam(grad);
    return loss;
  }

  // Forward-only loss; used by evaluation and the finite-difference oracle.
  double loss(const std::vector<TrainingPair>& batch) const {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    double total_ce = 0.0;
    long total_tokens = 0;
    for (const TrainingPair& pair : batch) {
      total_ce += pair_forward(pair, nullptr, nullptr);
      total_tokens += static_cast<long>(pair.tgt.ids.size()) + 1;
    }
    return total_ce / static_cast<double>(total_tokens);
  }

  // Fraction of teacher-forced argmax predictions matching the target.
  double token_accuracy(const std::vector<TrainingPair>& batch) const {
    if (batch.empty()) throw std::invalid_argument("token_accuracy: empty batch");
    long hits = 0, total = 0;
    for (const TrainingPair& pair : batch) {
      long h = 0;
      pair_forward(pair, nullptr, &h);
      hits += h;
      total += static_cast<long>(pair.tgt.ids.size()) + 1;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
  }

  double loss_and_grad(const std::vector<TrainingPair>& batch, Parameters& grad) const {
    double total_ce = 0.0;
    long total_tokens = 0;
    for (const TrainingPair& pair : batch) {
      total_tokens += static_cast<long>(pair.tgt.ids.size()) + 1;
    }
    const double inv_total = 1.0 / static_cast<double>(total_tokens);
    for (const TrainingPair& pair : batch) {
      total_ce += pair_backward(pair, inv_total, grad);
    }
    return total_ce * inv_total;
  }

  DualEmbedding represent(const TokenSequence& seq) const {
    const auto enc = encode_input(seq.ids);
    DualEmbedding d;
    d.w = Vec::Zero(cfg_.embed_dim);
    d.e = Vec::Zero(cfg_.enc_out_dim());
    for (std::size_t pos = 0; pos < seq.ids.size(); ++pos) {
      if (!cfg_.specials.in_repr_sum(seq.ids[pos])) continue;
      d.w += params_.embedding.col(seq.ids[pos]);
      d.e += enc.outputs.col(static_cast<long>(pos));
    }
    return d;
  }

  // Greedy decoding conditioned on the target style: the tag is prepended to
  // the source before encoding. Output ids contain no special tokens.
  TokenSequence decode(const TokenSequence& src, int target_tag_id, int max_out_len) const {
    if (!cfg_.specials.is_tag(target_tag_id)) {
      throw std::invalid_argument("decode: target id is not a style tag");
    }
    std::vector<int> ids;
    ids.reserve(src.ids.size() + 1);
    ids.push_back(target_tag_id);
    const auto content = src.content();
    ids.insert(ids.end(), content.begin(), content.end());
    const auto enc = encode_input(ids);

    const int H = cfg_.enc_out_dim();
    std::vector<Vec> state(static_cast<std::size_t>(cfg_.dec_layers));
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      state[static_cast<std::size_t>(l)] =
          (params_.dec_init_w[static_cast<std::size_t>(l)] * enc.summary +
           params_.dec_init_b[static_cast<std::size_t>(l)])
              .array()
              .tanh();
    }
    TokenSequence out;
    int prev = SpecialTokens::bos;
    for (int step = 0; step < max_out_len; ++step) {
      Vec x = params_.embedding.col(prev);
      for (int l = 0; l < cfg_.dec_layers; ++l) {
        const auto s = seqmodel_detail::gru_forward(params_.dec[static_cast<std::size_t>(l)], x,
                                                    state[static_cast<std::size_t>(l)]);
        state[static_cast<std::size_t>(l)] = s.h;
        x = s.h;
      }
      const Vec& s_top = state[static_cast<std::size_t>(cfg_.dec_layers - 1)];
      Vec scores = enc.outputs.transpose() * s_top;
      const double mx = scores.maxCoeff();
      Vec alpha = (scores.array() - mx).exp();
      alpha /= alpha.sum();
      const Vec context = enc.outputs * alpha;
      Vec sc(2 * H);
      sc << s_top, context;
      const Vec combined = (params_.attn_combine_w * sc + params_.attn_combine_b).array().tanh();
      Vec logits = params_.out_w * combined + params_.out_b;
      // never emit PAD/BOS/UNK/MASK or a style tag
      for (int id = 0; id < cfg_.specials.num_reserved(); ++id) {
        if (id != SpecialTokens::eos) logits(id) = -std::numeric_limits<double>::infinity();
      }
      int best = 0;
      logits.maxCoeff(&best);
      if (best == SpecialTokens::eos) break;
      out.ids.push_back(best);
      prev = best;
    }
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint save: cannot open " + path);
    f.write(kMagic, 8);
    auto write_i64 = [&](std::int64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    auto write_f64 = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    write_i64(cfg_.vocab_size);
    write_i64(cfg_.embed_dim);
    write_i64(cfg_.hidden_dim);
    write_i64(cfg_.enc_layers);
    write_i64(cfg_.dec_layers);
    write_i64(cfg_.max_len);
    write_f64(cfg_.learning_rate);
    write_f64(cfg_.grad_clip);
    write_f64(cfg_.init_scale);
    write_i64(static_cast<std::int64_t>(cfg_.seed));
    write_i64(cfg_.specials.num_tags);
    std::int64_t count = 0;
    params_.for_each_tensor([&](const std::string&, const auto&) { ++count; });
    write_i64(count);
    params_.for_each_tensor([&](const std::string& name, const auto& t) {
      write_i64(static_cast<std::int64_t>(name.size()));
      f.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_i64(t.rows());
      write_i64(t.cols());
      f.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * 8));
    });
    if (!f) throw std::runtime_error("checkpoint save: write failed for " + path);
  }

  static Seq2SeqModel load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint load: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) {
      throw std::runtime_error("checkpoint load: bad magic or version in " + path);
    }
    auto read_i64 = [&]() {
      std::int64_t v = 0;
      f.read(reinterpret_cast<char*>(&v), 8);
      if (!f) throw std::runtime_error("checkpoint load: truncated file");
      return v;
    };
    auto read_f64 = [&]() {
      double v = 0;
      f.read(reinterpret_cast<char*>(&v), 8);
      if (!f) throw std::runtime_error("checkpoint load: truncated file");
      return v;
    };
    ModelConfig cfg;
    cfg.vocab_size = static_cast<int>(read_i64());
    cfg.embed_dim = static_cast<int>(read_i64());
    cfg.hidden_dim = static_cast<int>(read_i64());
    cfg.enc_layers = static_cast<int>(read_i64());
    cfg.dec_layers = static_cast<int>(read_i64());
    cfg.max_len = static_cast<int>(read_i64());
    cfg.learning_rate = read_f64();
    cfg.grad_clip = read_f64();
    cfg.init_scale = read_f64();
    cfg.seed = static_cast<std::uint64_t>(read_i64());
    cfg.specials.num_tags = static_cast<int>(read_i64());
    cfg.validate();
    Seq2SeqModel m;
    m.cfg_ = cfg;
    m.params_ = make_parameters(cfg);
    const std::int64_t count = read_i64();
    std::int64_t expected = 0;
    m.params_.for_each_tensor([&](const std::string&, auto&) { ++expected; });
    if (count != expected) throw std::runtime_error("checkpoint load: tensor count mismatch");
    m.params_.for_each_tensor([&](const std::string& name, auto& t) {
      const std::int64_t name_len = read_i64();
      std::string got(static_cast<std::size_t>(name_len), '\0');
      f.read(got.data(), name_len);
      const std::int64_t rows = read_i64();
      const std::int64_t cols = read_i64();
      if (got != name || rows != t.rows() || cols != t.cols()) {
        throw std::runtime_error("checkpoint load: tensor " + got +
                                 " does not match the configured shapes");
      }
      f.read(reinterpret_cast<char*>(t.data()), t.size() * 8);
      if (!f) throw std::runtime_error("checkpoint load: truncated tensor data");
    });
    m.adam_m_ = make_parameters(cfg);
    m.adam_v_ = make_parameters(cfg);
    m.adam_m_.setZero();
    m.adam_v_.setZero();
    return m;
  }

  bool all_finite() const {
    bool ok = true;
    params_.for_each_tensor(
        [&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }

 private:
  static constexpr const char kMagic[9] = "SMCKPT01";

  ModelConfig cfg_;
  Parameters params_;
  Parameters adam_m_, adam_v_;
  long adam_t_ = 0;

  static Parameters make_parameters(const ModelConfig& cfg) {
    Parameters p;
    const int d = cfg.embed_dim;
    const int h = cfg.hidden_dim;
    const int H = cfg.enc_out_dim();
    p.embedding = Mat(d, cfg.vocab_size);
    auto make_cell = [](int out, int in) {
      GruCell c;
      c.wz = Mat(out, in);
      c.wr = Mat(out, in);
      c.wh = Mat(out, in);
      c.uz = Mat(out, out);
      c.ur = Mat(out, out);
      c.uh = Mat(out, out);
      c.bz = Vec(out);
      c.br = Vec(out);
      c.bh = Vec(out);
      return c;
    };
    for (int l = 0; l < cfg.enc_layers; ++l) {
      const int in = l == 0 ? d : H;
      p.enc_fwd.push_back(make_cell(h, in));
      p.enc_bwd.push_back(make_cell(h, in));
    }
    for (int l = 0; l < cfg.dec_layers; ++l) {
      p.dec_init_w.emplace_back(H, H);
      p.dec_init_b.emplace_back(H);
      p.dec.push_back(make_cell(H, l == 0 ? d : H));
    }
    p.attn_combine_w = Mat(d, 2 * H);
    p.attn_combine_b = Vec(d);
    p.out_w = Mat(cfg.vocab_size, d);
    p.out_b = Vec(cfg.vocab_size);
    return p;
  }

  void check_ids(const std::vector<int>& ids) const {
    for (int id : ids) {
      if (id < 0 || id >= cfg_.vocab_size) {
        throw std::out_of_range("seqmodel: token id " + std::to_string(id) +
                                " outside vocab of size " + std::to_string(cfg_.vocab_size));
      }
    }
  }

  // Runs the encoder over `ids_in` plus a final EOS.
  seqmodel_detail::EncTrace encode_input(const std::vector<int>& ids_in) const {
    check_ids(ids_in);
    if (static_cast<int>(ids_in.size()) + 1 > cfg_.max_len) {
      throw std::invalid_argument("seqmodel: sequence of " + std::to_string(ids_in.size() + 1) +
                                  " units exceeds max_len " + std::to_string(cfg_.max_len));
    }
    seqmodel_detail::EncTrace enc;
    enc.ids = ids_in;
    enc.ids.push_back(SpecialTokens::eos);
    const long T = static_cast<long>(enc.ids.size());
    const int h = cfg_.hidden_dim;

    Mat input(cfg_.embed_dim, T);
    for (long t = 0; t < T; ++t) {
      input.col(t) = params_.embedding.col(enc.ids[static_cast<std::size_t>(t)]);
    }
    enc.layer_in.push_back(std::move(input));

    for (int l = 0; l < cfg_.enc_layers; ++l) {
      const Mat& in = enc.layer_in.back();
      seqmodel_detail::DirTrace fw, bw;
      fw.h = Mat::Zero(h, T + 1);
      bw.h = Mat::Zero(h, T + 1);
      fw.steps.resize(static_cast<std::size_t>(T));
      bw.steps.resize(static_cast<std::size_t>(T));
      for (long t = 0; t < T; ++t) {
        auto s = seqmodel_detail::gru_forward(params_.enc_fwd[static_cast<std::size_t>(l)],
                                              in.col(t), fw.h.col(t));
        fw.h.col(t + 1) = s.h;
        fw.steps[static_cast<std::size_t>(t)] = std::move(s);
      }
      for (long t = T - 1; t >= 0; --t) {
        auto s = seqmodel_detail::gru_forward(params_.enc_bwd[static_cast<std::size_t>(l)],
                                              in.col(t), bw.h.col(t + 1));
        bw.h.col(t) = s.h;
        bw.steps[static_cast<std::size_t>(t)] = std::move(s);
      }
      Mat out(cfg_.enc_out_dim(), T);
      out.topRows(h) = fw.h.rightCols(T);
      out.bottomRows(h) = bw.h.leftCols(T);
      enc.fwd.push_back(std::move(fw));
      enc.bwd.push_back(std::move(bw));
      if (l + 1 < cfg_.enc_layers) enc.layer_in.push_back(out);
      enc.outputs = std::move(out);
    }
    enc.summary = Vec(cfg_.enc_out_dim());
    enc.summary << enc.fwd.back().h.col(T), enc.bwd.back().h.col(0);
    return enc;
  }

  // Forward pass for one pair. If `hits` is given, counts argmax matches.
  // Returns the summed cross-entropy over target tokens.
  double pair_forward(const TrainingPair& pair, std::vector<seqmodel_detail::DecStepTrace>* traces,
                      long* hits, seqmodel_detail::EncTrace* enc_out = nullptr,
                      std::vector<int>* dec_in_out = nullptr, Mat* probs_out = nullptr) const {
    if (pair.tgt.has_style_prefix) {
      throw std::invalid_argument("seqmodel: target sequences must not carry a style prefix");
    }
    auto enc = encode_input(pair.src.ids);
    std::vector<int> tgt = pair.tgt.ids;
    tgt.push_back(SpecialTokens::eos);
    check_ids(tgt);
    if (static_cast<int>(tgt.size()) > cfg_.max_len) {
      throw std::invalid_argument("seqmodel: target exceeds max_len");
    }
    std::vector<int> dec_in(tgt.size());
    dec_in[0] = SpecialTokens::bos;
    for (std::size_t t = 1; t < tgt.size(); ++t) dec_in[t] = tgt[t - 1];

    const int H = cfg_.enc_out_dim();
    const long n = static_cast<long>(tgt.size());
    std::vector<Vec> state(static_cast<std::size_t>(cfg_.dec_layers));
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      state[static_cast<std::size_t>(l)] =
          (params_.dec_init_w[static_cast<std::size_t>(l)] * enc.summary +
           params_.dec_init_b[static_cast<std::size_t>(l)])
              .array()
              .tanh();
    }
    std::vector<Vec> init_state = state;

    Mat probs(cfg_.vocab_size, n);
    double ce = 0.0;
    for (long t = 0; t < n; ++t) {
      seqmodel_detail::DecStepTrace tr;
      tr.layers.resize(static_cast<std::size_t>(cfg_.dec_layers));
      Vec x = params_.embedding.col(dec_in[static_cast<std::size_t>(t)]);
      for (int l = 0; l < cfg_.dec_layers; ++l) {
        auto s = seqmodel_detail::gru_forward(params_.dec[static_cast<std::size_t>(l)], x,
                                              state[static_cast<std::size_t>(l)]);
        state[static_cast<std::size_t>(l)] = s.h;
        x = s.h;
        tr.layers[static_cast<std::size_t>(l)] = std::move(s);
      }
      const Vec& s_top = state[static_cast<std::size_t>(cfg_.dec_layers - 1)];
      Vec scores = enc.outputs.transpose() * s_top;
      const double mx = scores.maxCoeff();
      Vec alpha = (scores.array() - mx).exp();
      alpha /= alpha.sum();
      tr.context = enc.outputs * alpha;
      tr.alpha = std::move(alpha);
      Vec sc(2 * H);
      sc << s_top, tr.context;
      tr.combined = (params_.attn_combine_w * sc + params_.attn_combine_b).array().tanh();
      Vec logits = params_.out_w * tr.combined + params_.out_b;
      const double lmax = logits.maxCoeff();
      const Vec exps = (logits.array() - lmax).exp();
      const double zsum = exps.sum();
      const int y = tgt[static_cast<std::size_t>(t)];
      ce += std::log(zsum) + lmax - logits(y);
      probs.col(t) = exps / zsum;
      if (hits) {
        int best = 0;
        logits.maxCoeff(&best);
        if (best == y) ++*hits;
      }
      if (traces) traces->push_back(std::move(tr));
    }
    if (enc_out) *enc_out = std::move(enc);
    if (dec_in_out) *dec_in_out = std::move(dec_in);
    if (probs_out) *probs_out = std::move(probs);
    return ce;
  }

  double pair_backward(const TrainingPair& pair, double inv_total, Parameters& g) const {
    std::vector<seqmodel_detail::DecStepTrace> traces;
    seqmodel_detail::EncTrace enc;
    std::vector<int> dec_in;
    Mat probs;
    const double ce = pair_forward(pair, &traces, nullptr, &enc, &dec_in, &probs);

    std::vector<int> tgt = pair.tgt.ids;
    tgt.push_back(SpecialTokens::eos);
    const long n = static_cast<long>(tgt.size());
    const long T = static_cast<long>(enc.ids.size());
    const int h = cfg_.hidden_dim;
    const int H = cfg_.enc_out_dim();

    // reconstruct decoder-layer state histories (cols: init + per step)
    std::vector<Mat> dec_states(static_cast<std::size_t>(cfg_.dec_layers));
    {
      std::vector<Vec> state(static_cast<std::size_t>(cfg_.dec_layers));
      for (int l = 0; l < cfg_.dec_layers; ++l) {
        state[static_cast<std::size_t>(l)] =
            (params_.dec_init_w[static_cast<std::size_t>(l)] * enc.summary +
             params_.dec_init_b[static_cast<std::size_t>(l)])
                .array()
                .tanh();
        dec_states[static_cast<std::size_t>(l)] = Mat(H, n + 1);
        dec_states[static_cast<std::size_t>(l)].col(0) = state[static_cast<std::size_t>(l)];
      }
      for (long t = 0; t < n; ++t) {
        for (int l = 0; l < cfg_.dec_layers; ++l) {
          dec_states[static_cast<std::size_t>(l)].col(t + 1) =
              traces[static_cast<std::size_t>(t)].layers[static_cast<std::size_t>(l)].h;
        }
      }
    }

    Mat d_enc_out = Mat::Zero(H, T);
    std::vector<Vec> carry(static_cast<std::size_t>(cfg_.dec_layers), Vec::Zero(H));
    for (long t = n - 1; t >= 0; --t) {
      const auto& tr = traces[static_cast<std::size_t>(t)];
      Vec dlogits = probs.col(t);
      dlogits(tgt[static_cast<std::size_t>(t)]) -= 1.0;
      dlogits *= inv_total;
      g.out_w.noalias() += dlogits * tr.combined.transpose();
      g.out_b += dlogits;
      const Vec dcombined = params_.out_w.transpose() * dlogits;
      const Vec dc_pre = (dcombined.array() * (1.0 - tr.combined.array().square())).matrix();
      const Vec& s_top = dec_states[static_cast<std::size_t>(cfg_.dec_layers - 1)].col(t + 1);
      Vec sc(2 * H);
      sc << s_top, tr.context;
      g.attn_combine_w.noalias() += dc_pre * sc.transpose();
      g.attn_combine_b += dc_pre;
      const Vec dsc = params_.attn_combine_w.transpose() * dc_pre;
      Vec ds = dsc.head(H);
      const Vec dctx = dsc.tail(H);

      // attention: context = outputs * alpha, scores = outputs^T s_top
      const Vec dalpha = enc.outputs.transpose() * dctx;
      d_enc_out.noalias() += dctx * tr.alpha.transpose();
      const double dot = tr.alpha.dot(dalpha);
      const Vec dscore = (tr.alpha.array() * (dalpha.array() - dot)).matrix();
      ds.noalias() += enc.outputs * dscore;
      d_enc_out.noalias() += s_top * dscore.transpose();

      // decoder GRU stack, top to bottom
      Vec dupper = ds + carry[static_cast<std::size_t>(cfg_.dec_layers - 1)];
      for (int l = cfg_.dec_layers - 1; l >= 0; --l) {
        const Vec x = l == 0 ? Vec(params_.embedding.col(dec_in[static_cast<std::size_t>(t)]))
                             : Vec(dec_states[static_cast<std::size_t>(l - 1)].col(t + 1));
        Vec dx, dh_prev;
        seqmodel_detail::gru_backward(params_.dec[static_cast<std::size_t>(l)],
                                      g.dec[static_cast<std::size_t>(l)], x,
                                      dec_states[static_cast<std::size_t>(l)].col(t),
                                      tr.layers[static_cast<std::size_t>(l)], dupper, dx, dh_prev);
        carry[static_cast<std::size_t>(l)] = std::move(dh_prev);
        if (l > 0) {
          dupper = dx + carry[static_cast<std::size_t>(l - 1)];
        } else {
          g.embedding.col(dec_in[static_cast<std::size_t>(t)]) += dx;
        }
      }
    }

    // decoder init states
    Vec dsummary = Vec::Zero(H);
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const Vec& d0 = dec_states[static_cast<std::size_t>(l)].col(0);
      const Vec dpre =
          (carry[static_cast<std::size_t>(l)].array() * (1.0 - d0.array().square())).matrix();
      g.dec_init_w[static_cast<std::size_t>(l)].noalias() += dpre * enc.summary.transpose();
      g.dec_init_b[static_cast<std::size_t>(l)] += dpre;
      dsummary.noalias() += params_.dec_init_w[static_cast<std::size_t>(l)].transpose() * dpre;
    }

    // encoder backward, top layer to embeddings
    Mat d_out = std::move(d_enc_out);  // grads w.r.t. top-layer outputs
    for (int l = cfg_.enc_layers - 1; l >= 0; --l) {
      const auto& fw = enc.fwd[static_cast<std::size_t>(l)];
      const auto& bw = enc.bwd[static_cast<std::size_t>(l)];
      const Mat& in = enc.layer_in[static_cast<std::size_t>(l)];
      Mat d_in = Mat::Zero(in.rows(), T);
      Mat dfw = Mat::Zero(h, T + 1);
      Mat dbw = Mat::Zero(h, T + 1);
      dfw.rightCols(T) += d_out.topRows(h);
      dbw.leftCols(T) += d_out.bottomRows(h);
      if (l == cfg_.enc_layers - 1) {
        dfw.col(T) += dsummary.head(h);
        dbw.col(0) += dsummary.tail(h);
      }
      Vec fcarry = Vec::Zero(h);
      for (long t = T - 1; t >= 0; --t) {
        const Vec dh = dfw.col(t + 1) + fcarry;
        Vec dx, dh_prev;
        seqmodel_detail::gru_backward(params_.enc_fwd[static_cast<std::size_t>(l)],
                                      g.enc_fwd[static_cast<std::size_t>(l)], in.col(t),
                                      fw.h.col(t), fw.steps[static_cast<std::size_t>(t)], dh, dx,
                                      dh_prev);
        d_in.col(t) += dx;
        fcarry = std::move(dh_prev);
      }
      Vec bcarry = Vec::Zero(h);
      for (long t = 0; t < T; ++t) {
        const Vec dh = dbw.col(t) + bcarry;
        Vec dx, dh_prev;
        seqmodel_detail::gru_backward(params_.enc_bwd[static_cast<std::size_t>(l)],
                                      g.enc_bwd[static_cast<std::size_t>(l)], in.col(t),
                                      bw.h.col(t + 1), bw.steps[static_cast<std::size_t>(t)], dh,
                                      dx, dh_prev);
        d_in.col(t) += dx;
        bcarry = std::move(dh_prev);
      }
      d_out = std::move(d_in);
    }
    for (long t = 0; t < T; ++t) {
      g.embedding.col(enc.ids[static_cast<std::size_t>(t)]) += d_out.col(t);
    }
    return ce;
  }

  void apply_adam(Parameters& grad) {
    double norm_sq = 0.0;
    grad.for_each_tensor([&](const std::string&, auto& t) { norm_sq += t.squaredNorm(); });
    const double norm = std::sqrt(norm_sq);
    if (!std::isfinite(norm)) throw std::runtime_error("train_step: non-finite gradient");
    const double scale = norm > cfg_.grad_clip ? cfg_.grad_clip / norm : 1.0;
    ++adam_t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    const double lr = cfg_.learning_rate;

    // walk all four structures in lockstep via flat data pointers
    std::vector<double*> mp, vp, pp;
    std::vector<long> sizes;
    adam_m_.for_each_tensor([&](const std::string&, auto& t) {
      mp.push_back(t.data());
      sizes.push_back(t.size());
    });
    adam_v_.for_each_tensor([&](const std::string&, auto& t) { vp.push_back(t.data()); });
    params_.for_each_tensor([&](const std::string&, auto& t) { pp.push_back(t.data()); });
    std::size_t k = 0;
    grad.for_each_tensor([&](const std::string&, auto& t) {
      double* gp = t.data();
      double* m = mp[k];
      double* v = vp[k];
      double* p = pp[k];
      const long nelem = sizes[k];
      for (long i = 0; i < nelem; ++i) {
        const double gi = gp[i] * scale;
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      ++k;
    });
  }
};

}  // namespace stylemine
