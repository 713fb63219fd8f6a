#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stylemine/rng.hpp"
#include "stylemine/text.hpp"
#include "stylemine/types.hpp"

namespace stylemine {

// Word-trigram language model with stupid backoff (factor 0.4). Scores are
// mean log-probability per token including the end marker.
class TrigramLm {
 public:
  static TrigramLm train(const std::vector<const StyleCorpus*>& corpora) {
    TrigramLm lm;
    for (const StyleCorpus* c : corpora) {
      for (const Sentence& s : c->sentences) lm.add_sentence(s.text);
    }
    if (lm.total_ == 0) throw std::invalid_argument("TrigramLm: no training tokens");
    return lm;
  }

  double mean_logprob(const std::string& sentence) const {
    const auto words = split_words(sentence);
    if (words.empty()) throw std::invalid_argument("TrigramLm: empty sentence");
    std::vector<std::string> toks;
    toks.reserve(words.size() + 3);
    toks.push_back(kBos);
    toks.push_back(kBos);
    toks.insert(toks.end(), words.begin(), words.end());
    toks.push_back(kEos);
    double lp = 0.0;
    long n = 0;
    for (std::size_t i = 2; i < toks.size(); ++i) {
      lp += std::log(word_prob(toks[i - 2], toks[i - 1], toks[i]));
      ++n;
    }
    return lp / static_cast<double>(n);
  }

  long vocabulary_size() const { return static_cast<long>(uni_.size()); }

 private:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";
  static constexpr double kBackoff = 0.4;

  std::unordered_map<std::string, long> uni_, bi_, tri_;
  long total_ = 0;

  static std::string key(const std::string& a, const std::string& b) { return a + "\x1f" + b; }
  static std::string key(const std::string& a, const std::string& b, const std::string& c) {
    return a + "\x1f" + b + "\x1f" + c;
  }

  void add_sentence(const std::string& text) {
    const auto words = split_words(text);
    if (words.empty()) return;
    std::vector<std::string> toks;
    toks.push_back(kBos);
    toks.push_back(kBos);
    toks.insert(toks.end(), words.begin(), words.end());
    toks.push_back(kEos);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      ++uni_[toks[i]];
      ++total_;
      if (i + 1 < toks.size()) ++bi_[key(toks[i], toks[i + 1])];
      if (i + 2 < toks.size()) ++tri_[key(toks[i], toks[i + 1], toks[i + 2])];
    }
  }

  double word_prob(const std::string& w2, const std::string& w1, const std::string& w) const {
    const auto t = tri_.find(key(w2, w1, w));
    if (t != tri_.end()) {
      const auto ctx = bi_.find(key(w2, w1));
      if (ctx != bi_.end()) {
        return static_cast<double>(t->second) / static_cast<double>(ctx->second);
      }
    }
    const auto b = bi_.find(key(w1, w));
    if (b != bi_.end()) {
      const auto ctx = uni_.find(w1);
      if (ctx != uni_.end()) {
        return kBackoff * static_cast<double>(b->second) / static_cast<double>(ctx->second);
      }
    }
    const auto u = uni_.find(w);
    if (u != uni_.end()) {
      return kBackoff * kBackoff * static_cast<double>(u->second) / static_cast<double>(total_);
    }
    return kBackoff * kBackoff * kBackoff /
           static_cast<double>(total_ + static_cast<long>(uni_.size()) + 1);
  }
};

// Binary grammaticality proxy: thresholded LM score, calibrated where
// clean-vs-shuffled accuracy on held-out sentences is maximal.
class FluencyScorer {
 public:
  FluencyScorer() = default;
  explicit FluencyScorer(TrigramLm lm) : lm_(std::move(lm)) {}

  void calibrate(const std::vector<std::string>& clean_heldout, std::uint64_t seed) {
    if (clean_heldout.empty()) throw std::invalid_argument("FluencyScorer: empty calibration set");
    Rng rng = Rng(seed).fork(0x666c75ULL);
    std::vector<std::pair<double, int>> scored;  // (score, is_clean)
    for (const std::string& s : clean_heldout) {
      scored.emplace_back(lm_.mean_logprob(s), 1);
      auto words = split_words(s);
      rng.shuffle(words);
      scored.emplace_back(lm_.mean_logprob(join_words(words)), 0);
    }
    std::sort(scored.begin(), scored.end());
    // Sweep thresholds between consecutive scores; label 1 means score >= t.
    const long total = static_cast<long>(scored.size());
    long clean_total = 0;
    for (const auto& [score, is_clean] : scored) clean_total += is_clean;
    long clean_below = 0, shuffled_below = 0;
    long best_correct = clean_total;  // threshold below everything: all labeled 1
    double best_thr = scored.front().first - 1.0;
    for (long i = 0; i < total; ++i) {
      if (scored[static_cast<std::size_t>(i)].second == 1) {
        ++clean_below;
      } else {
        ++shuffled_below;
      }
      if (i + 1 < total &&
          scored[static_cast<std::size_t>(i)].first ==
              scored[static_cast<std::size_t>(i + 1)].first) {
        continue;
      }
      // correct = shuffled below threshold + clean at/above it
      const long correct = shuffled_below + (clean_total - clean_below);
      if (correct > best_correct) {
        best_correct = correct;
        best_thr = i + 1 < total ? 0.5 * (scored[static_cast<std::size_t>(i)].first +
                                          scored[static_cast<std::size_t>(i + 1)].first)
                                 : scored[static_cast<std::size_t>(i)].first + 1.0;
      }
    }
    threshold_ = best_thr;
    calibrated_ = true;
  }

  int label(const std::string& pred) const {
    if (!calibrated_) throw std::logic_error("FluencyScorer: not calibrated");
    if (split_words(pred).empty()) throw std::invalid_argument("FluencyScorer: empty prediction");
    return lm_.mean_logprob(pred) >= threshold_ ? 1 : 0;
  }

  double score(const std::string& pred) const { return lm_.mean_logprob(pred); }
  double threshold() const { return threshold_; }
  bool calibrated() const { return calibrated_; }

 private:
  TrigramLm lm_;
  double threshold_ = 0.0;
  bool calibrated_ = false;
};

}  // namespace stylemine
