#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "stylemine/bpe.hpp"
#include "stylemine/classifier.hpp"
#include "stylemine/ngram_lm.hpp"
#include "stylemine/seqmodel.hpp"

namespace stylemine {

using Embedder = std::function<Vec(const std::string&)>;

// Sentence embedder backed by the model's input embeddings: idf-weighted sum
// over content tokens. Document frequencies come from the train corpora.
inline Embedder make_embedding_bag(const Seq2SeqModel& model, const BpeModel& bpe,
                                   const std::vector<const StyleCorpus*>& train_corpora) {
  std::unordered_map<int, long> df;
  long docs = 0;
  for (const StyleCorpus* c : train_corpora) {
    for (const Sentence& s : c->sentences) {
      ++docs;
      std::vector<int> ids = bpe.encode(s.text).ids;
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      for (int id : ids) ++df[id];
    }
  }
  // copies keep the embedder valid after the model moves on
  const Mat table = model.params().embedding;
  const SpecialTokens specials = model.config().specials;
  const BpeModel bpe_copy = bpe;
  const long n_docs = std::max<long>(docs, 1);
  std::unordered_map<int, double> idf;
  for (const auto& [id, n] : df) {
    idf[id] = std::log(static_cast<double>(n_docs + 1) / static_cast<double>(n + 1)) + 1.0;
  }
  const double default_idf = std::log(static_cast<double>(n_docs + 1)) + 1.0;
  return [table, specials, bpe_copy, idf = std::move(idf), default_idf](const std::string& text) {
    Vec v = Vec::Zero(table.rows());
    for (int id : bpe_copy.encode(text).ids) {
      if (!specials.in_repr_sum(id)) continue;
      const auto it = idf.find(id);
      v += (it == idf.end() ? default_idf : it->second) * table.col(id);
    }
    return v;
  };
}

// Cosine similarity of the two sentence embeddings, clamped to [0,1].
inline double content_preservation(const std::string& src, const std::string& pred,
                                   const Embedder& embedder) {
  if (split_words(src).empty() || split_words(pred).empty()) {
    throw std::invalid_argument("content_preservation: empty input");
  }
  const Vec a = embedder(src);
  const Vec b = embedder(pred);
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), 0.0, 1.0);
}

inline int fluency(const std::string& pred, const FluencyScorer& scorer) {
  return scorer.label(pred);
}

// Percentage of predictions the classifier assigns to the target style.
inline double attribute_accuracy(const std::vector<std::string>& preds, const StyleTag& target,
                                 const StyleClassifier& clf) {
  if (preds.empty()) throw std::invalid_argument("attribute_accuracy: empty prediction list");
  long hits = 0;
  for (const std::string& p : preds) {
    if (clf.classify(p) == target) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

struct SentenceScores {
  double cp = 0.0;  // [0,1]
  int flu = 0;      // {0,1}
  int ata = 0;      // {0,1}
};

// Sentence-level aggregation: the mean over sentences of cp*flu*ata, as a
// percentage. A sentence that fails any dimension contributes nothing.
inline double aggregate(std::span<const SentenceScores> scores) {
  if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
  double total = 0.0;
  for (const SentenceScores& s : scores) total += s.cp * s.flu * s.ata;
  return 100.0 * total / static_cast<double>(scores.size());
}

// Mean score difference over the tasks both systems were evaluated on.
inline double delta(const std::map<std::string, double>& model_scores,
                    const std::map<std::string, double>& reference_scores) {
  if (model_scores.empty() || model_scores.size() != reference_scores.size()) {
    throw std::invalid_argument("delta: task sets differ");
  }
  double m = 0.0, r = 0.0;
  for (const auto& [task, score] : model_scores) {
    const auto it = reference_scores.find(task);
    if (it == reference_scores.end()) throw std::invalid_argument("delta: task sets differ");
    m += score;
    r += it->second;
  }
  return (m - r) / static_cast<double>(model_scores.size());
}

struct LikertItem {
  int cp = 0;
  int flu = 0;
  int ata = 0;
};

// A transfer counts as successful when all three ratings are 4 or 5.
inline double success_rate(std::span<const LikertItem> items) {
  if (items.empty()) throw std::invalid_argument("success_rate: no items");
  long ok = 0;
  for (const LikertItem& it : items) {
    if (it.cp < 1 || it.cp > 5 || it.flu < 1 || it.flu > 5 || it.ata < 1 || it.ata > 5) {
      throw std::invalid_argument("success_rate: missing or out-of-range rating");
    }
    if (it.cp >= 4 && it.flu >= 4 && it.ata >= 4) ++ok;
  }
  return 100.0 * static_cast<double>(ok) / static_cast<double>(items.size());
}

struct EvalReport {
  std::string task;
  long n = 0;
  double cp_mean = 0.0;
  double flu_rate = 0.0;  // percent
  double ata = 0.0;       // percent
  double agg = 0.0;       // percent
  std::vector<std::string> srcs, preds;
  std::vector<SentenceScores> per_sentence;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["task"] = task;
    j["n"] = n;
    j["cp_mean"] = cp_mean;
    j["flu_rate"] = flu_rate;
    j["ata"] = ata;
    j["agg"] = agg;
    j["per_sentence"] = nlohmann::json::array();
    for (std::size_t i = 0; i < per_sentence.size(); ++i) {
      j["per_sentence"].push_back({{"src", srcs[i]},
                                   {"pred", preds[i]},
                                   {"cp", per_sentence[i].cp},
                                   {"flu", per_sentence[i].flu},
                                   {"ata", per_sentence[i].ata}});
    }
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("EvalReport::save: cannot open " + path);
    f << to_json().dump(2) << "\n";
  }
};

inline EvalReport evaluate_predictions(const std::string& task,
                                       const std::vector<std::string>& srcs,
                                       const std::vector<std::string>& preds,
                                       const StyleTag& target, const StyleClassifier& clf,
                                       const FluencyScorer& flu_scorer, const Embedder& embedder) {
  if (srcs.size() != preds.size()) {
    throw std::invalid_argument("evaluate_predictions: src/pred count mismatch");
  }
  if (srcs.empty()) throw std::invalid_argument("evaluate_predictions: nothing to evaluate");
  EvalReport r;
  r.task = task;
  r.n = static_cast<long>(srcs.size());
  r.srcs = srcs;
  r.preds = preds;
  double cp_sum = 0.0;
  long flu_sum = 0, ata_sum = 0;
  for (std::size_t i = 0; i < srcs.size(); ++i) {
    SentenceScores s;
    s.cp = content_preservation(srcs[i], preds[i], embedder);
    s.flu = fluency(preds[i], flu_scorer);
    s.ata = clf.classify(preds[i]) == target ? 1 : 0;
    cp_sum += s.cp;
    flu_sum += s.flu;
    ata_sum += s.ata;
    r.per_sentence.push_back(s);
  }
  r.cp_mean = cp_sum / static_cast<double>(r.n);
  r.flu_rate = 100.0 * static_cast<double>(flu_sum) / static_cast<double>(r.n);
  r.ata = 100.0 * static_cast<double>(ata_sum) / static_cast<double>(r.n);
  r.agg = aggregate(r.per_sentence);
  return r;
}

}  // namespace stylemine
