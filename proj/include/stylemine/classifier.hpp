#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemine/rng.hpp"
#include "stylemine/text.hpp"
#include "stylemine/types.hpp"

namespace stylemine {

struct ClassifierConfig {
  int hash_dim = 1 << 18;
  int epochs = 6;
  double learning_rate = 0.2;
  double l2 = 1e-7;
  std::uint64_t seed = 1;
};

// Logistic classifier over hashed 1-2 gram token counts. Binary by design:
// a task has exactly two styles. Decision > 0 picks style B.
class StyleClassifier {
 public:
  static StyleClassifier train(const StyleCorpus& train_a, const StyleCorpus& train_b,
                               const StyleCorpus* dev_a = nullptr,
                               const StyleCorpus* dev_b = nullptr, ClassifierConfig cfg = {}) {
    if (train_a.sentences.empty() || train_b.sentences.empty()) {
      throw std::invalid_argument("StyleClassifier: empty training corpus");
    }
    StyleClassifier clf;
    clf.cfg_ = cfg;
    clf.style_a_ = train_a.style;
    clf.style_b_ = train_b.style;
    clf.weights_.assign(static_cast<std::size_t>(cfg.hash_dim), 0.0);
    clf.bias_ = 0.0;

    struct Example {
      std::vector<std::pair<int, double>> feats;
      int label;  // 0 = style A, 1 = style B
    };
    std::vector<Example> examples;
    examples.reserve(train_a.size() + train_b.size());
    for (const Sentence& s : train_a.sentences) {
      examples.push_back({clf.features(s.text), 0});
    }
    for (const Sentence& s : train_b.sentences) {
      examples.push_back({clf.features(s.text), 1});
    }
    Rng rng = Rng(cfg.seed).fork(0x636c66ULL);
    std::vector<int> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(order);
      const double lr = cfg.learning_rate / (1.0 + epoch);
      for (int idx : order) {
        const Example& ex = examples[static_cast<std::size_t>(idx)];
        double z = clf.bias_;
        for (const auto& [f, v] : ex.feats) z += clf.weights_[static_cast<std::size_t>(f)] * v;
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double g = p - ex.label;
        for (const auto& [f, v] : ex.feats) {
          double& w = clf.weights_[static_cast<std::size_t>(f)];
          w -= lr * (g * v + cfg.l2 * w);
        }
        clf.bias_ -= lr * g;
      }
    }
    if (dev_a && dev_b) clf.dev_macro_f1_ = clf.macro_f1(*dev_a, *dev_b);
    return clf;
  }

  double decision(const std::string& text) const {
    double z = bias_;
    for (const auto& [f, v] : features(text)) z += weights_[static_cast<std::size_t>(f)] * v;
    return z;
  }

  const StyleTag& classify(const std::string& text) const {
    return decision(text) > 0.0 ? style_b_ : style_a_;
  }

  double macro_f1(const StyleCorpus& eval_a, const StyleCorpus& eval_b) const {
    long tp_a = 0, fn_a = 0, tp_b = 0, fn_b = 0;
    for (const Sentence& s : eval_a.sentences) {
      (classify(s.text) == style_a_ ? tp_a : fn_a) += 1;
    }
    for (const Sentence& s : eval_b.sentences) {
      (classify(s.text) == style_b_ ? tp_b : fn_b) += 1;
    }
    // false positives for one class are the other's false negatives
    auto f1 = [](long tp, long fp, long fn) {
      const double denom = 2.0 * tp + fp + fn;
      return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
    };
    return 0.5 * (f1(tp_a, fn_b, fn_a) + f1(tp_b, fn_a, fn_b));
  }

  double dev_macro_f1() const { return dev_macro_f1_; }
  const StyleTag& style_a() const { return style_a_; }
  const StyleTag& style_b() const { return style_b_; }

 private:
  ClassifierConfig cfg_;
  StyleTag style_a_, style_b_;
  std::vector<double> weights_;
  double bias_ = 0.0;
  double dev_macro_f1_ = -1.0;

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    return h;
  }

  std::vector<std::pair<int, double>> features(const std::string& text) const {
    const auto words = split_words(text);
    std::vector<std::pair<int, double>> feats;
    feats.reserve(2 * words.size());
    const std::uint64_t dim = static_cast<std::uint64_t>(cfg_.hash_dim);
    for (std::size_t i = 0; i < words.size(); ++i) {
      feats.emplace_back(static_cast<int>(fnv1a(words[i]) % dim), 1.0);
      if (i + 1 < words.size()) {
        feats.emplace_back(static_cast<int>(fnv1a(words[i] + "\x1f" + words[i + 1]) % dim), 1.0);
      }
    }
    return feats;
  }
};

}  // namespace stylemine
