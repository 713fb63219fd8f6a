#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stylemine/rng.hpp"
#include "stylemine/seqmodel.hpp"

namespace stylemine {

enum class IndexMode { exact, approximate };

// Cosine-similarity index over unit-normalized vectors. Exact mode scans;
// approximate mode is an inverted-list (k-means) index whose probes trade
// recall for speed and must be validated against exact search before use.
class VectorIndex {
 public:
  // nprobe <= 0 picks a default of one third of the cluster count.
  static VectorIndex build(const std::vector<std::pair<int, Vec>>& items, IndexMode mode,
                           int nprobe = 0, std::uint64_t seed = 0) {
    if (items.empty()) throw std::invalid_argument("VectorIndex: empty input");
    VectorIndex idx;
    idx.mode_ = mode;
    idx.nprobe_ = nprobe;
    const long dim = items.front().second.size();
    idx.vecs_ = Mat(dim, static_cast<long>(items.size()));
    idx.ids_.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const Vec& v = items[i].second;
      if (v.size() != dim) throw std::invalid_argument("VectorIndex: dimension mismatch");
      const double norm = v.norm();
      if (norm == 0.0 || !std::isfinite(norm)) {
        throw std::invalid_argument("VectorIndex: zero or non-finite vector for id " +
                                    std::to_string(items[i].first));
      }
      idx.vecs_.col(static_cast<long>(i)) = v / norm;
      idx.ids_.push_back(items[i].first);
    }
    if (mode == IndexMode::approximate) idx.build_clusters(seed);
    return idx;
  }

  int size() const { return static_cast<int>(ids_.size()); }
  long dim() const { return vecs_.rows(); }
  IndexMode mode() const { return mode_; }
  const Mat& vectors() const { return vecs_; }
  const std::vector<int>& ids() const { return ids_; }

  // Top-k by cosine, sorted descending; ties go to the lower id.
  std::vector<std::pair<int, double>> top_k(const Vec& query, int k) const {
    if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
    const double qn = query.norm();
    if (qn == 0.0) throw std::invalid_argument("top_k: zero query vector");
    const Vec q = query / qn;
    std::vector<int> cand = candidate_positions(q);
    std::vector<std::pair<int, double>> scored;  // (position, cos)
    scored.reserve(cand.size());
    for (int pos : cand) scored.emplace_back(pos, vecs_.col(pos).dot(q));
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(keep), scored.end(),
                      [&](const auto& a, const auto& b) {
                        if (a.second != b.second) return a.second > b.second;
                        return ids_[static_cast<std::size_t>(a.first)] <
                               ids_[static_cast<std::size_t>(b.first)];
                      });
    std::vector<std::pair<int, double>> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      out.emplace_back(ids_[static_cast<std::size_t>(scored[i].first)], scored[i].second);
    }
    return out;
  }

  // Candidate column positions for a unit query: everything in exact mode,
  // the nearest nprobe clusters otherwise.
  std::vector<int> candidate_positions(const Vec& unit_query) const {
    std::vector<int> cand;
    if (mode_ == IndexMode::exact || centroids_.cols() == 0) {
      cand.resize(ids_.size());
      for (std::size_t i = 0; i < ids_.size(); ++i) cand[i] = static_cast<int>(i);
      return cand;
    }
    const Vec scores = centroids_.transpose() * unit_query;
    std::vector<int> order(static_cast<std::size_t>(centroids_.cols()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const std::size_t probes = std::min<std::size_t>(static_cast<std::size_t>(nprobe_), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(probes), order.end(),
                      [&](int a, int b) {
                        if (scores(a) != scores(b)) return scores(a) > scores(b);
                        return a < b;
                      });
    for (std::size_t p = 0; p < probes; ++p) {
      const auto& list = lists_[static_cast<std::size_t>(order[p])];
      cand.insert(cand.end(), list.begin(), list.end());
    }
    std::sort(cand.begin(), cand.end());
    return cand;
  }

 private:
  Mat vecs_;  // dim x n, unit columns
  std::vector<int> ids_;
  IndexMode mode_ = IndexMode::exact;
  Mat centroids_;
  std::vector<std::vector<int>> lists_;
  int nprobe_ = 0;

  void build_clusters(std::uint64_t seed) {
    const int n = size();
    const int k = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
    if (nprobe_ <= 0) nprobe_ = std::max(8, (k + 2) / 3);
    Rng rng = Rng(seed).fork(0x697666ULL);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    centroids_ = Mat(vecs_.rows(), k);
    for (int c = 0; c < k; ++c) centroids_.col(c) = vecs_.col(perm[static_cast<std::size_t>(c)]);
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < 10; ++iter) {
      const Mat sims = centroids_.transpose() * vecs_;  // k x n
      for (int i = 0; i < n; ++i) {
        int best = 0;
        sims.col(i).maxCoeff(&best);
        assign[static_cast<std::size_t>(i)] = best;
      }
      Mat sums = Mat::Zero(vecs_.rows(), k);
      for (int i = 0; i < n; ++i) sums.col(assign[static_cast<std::size_t>(i)]) += vecs_.col(i);
      for (int c = 0; c < k; ++c) {
        const double norm = sums.col(c).norm();
        if (norm > 0) centroids_.col(c) = sums.col(c) / norm;
      }
    }
    lists_.assign(static_cast<std::size_t>(k), {});
    for (int i = 0; i < n; ++i) lists_[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])].push_back(i);
  }
};

// One index per sentence representation.
struct DualIndex {
  VectorIndex w;
  VectorIndex e;
};

struct MiningConfig {
  int k = 4;                 // margin neighborhood size
  IndexMode mode = IndexMode::exact;
  int nprobe = 0;            // 0 = auto
  double denom_eps = 1e-9;
  // Optional extra gate on top of mutual argmax; off by default.
  bool use_margin_threshold = false;
  double margin_threshold = 1.0;
};

struct CandidatePair {
  int a_id = -1;
  int b_id = -1;
  double score_w = 0.0;
  double score_e = 0.0;
};

struct SpeResult {
  std::vector<CandidatePair> accepted;
  std::vector<int> rejected_a;
  std::vector<int> rejected_b;
};

inline double cosine(const Vec& x, const Vec& y) {
  const double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw std::invalid_argument("cosine: zero vector");
  return x.dot(y) / (nx * ny);
}

// Ratio-margin score: cos(x,y) normalized by the mean cosine of the two
// k-neighborhoods (each taken in the opposite-style index).
inline double margin_score(const Vec& x, const Vec& y, std::span<const double> nn_x,
                           std::span<const double> nn_y, int k, double denom_eps = 1e-9) {
  if (k < 1) throw std::invalid_argument("margin_score: k must be >= 1");
  if (static_cast<int>(nn_x.size()) != k || static_cast<int>(nn_y.size()) != k) {
    throw std::invalid_argument("margin_score: neighborhood size does not match k");
  }
  double total = 0.0;
  for (double c : nn_x) total += c;
  for (double c : nn_y) total += c;
  double denom = total / (2.0 * k);
  if (denom < denom_eps) denom = denom_eps;
  return cosine(x, y) / denom;
}

// Full-space mutual-argmax state for one pass: margins and best matches are
// computed once against a frozen model snapshot, then batches are filtered
// against it. Accepted pairs must be the margin argmax in both directions
// under both representations.
class ExtractionRound {
 public:
  ExtractionRound(const DualIndex& index_a, const DualIndex& index_b, MiningConfig cfg)
      : cfg_(cfg) {
    if (index_a.w.size() == 0 || index_b.w.size() == 0) {
      throw std::invalid_argument("ExtractionRound: empty index");
    }
    if (index_a.w.size() != index_a.e.size() || index_b.w.size() != index_b.e.size()) {
      throw std::invalid_argument("ExtractionRound: w/e index size mismatch");
    }
    ids_a_ = index_a.w.ids();
    ids_b_ = index_b.w.ids();
    w_ = match_representation(index_a.w, index_b.w);
    e_ = match_representation(index_a.e, index_b.e);
    for (std::size_t i = 0; i < ids_a_.size(); ++i) pos_a_[ids_a_[i]] = static_cast<int>(i);
    for (std::size_t j = 0; j < ids_b_.size(); ++j) pos_b_[ids_b_[j]] = static_cast<int>(j);
  }

  // True iff (a,b) is the mutual margin argmax under both representations.
  bool accepted(int a_id, int b_id) const {
    const int i = pos_a_.at(a_id);
    const int j = pos_b_.at(b_id);
    const bool mutual = w_.best_b[static_cast<std::size_t>(i)] == j &&
                        e_.best_b[static_cast<std::size_t>(i)] == j &&
                        w_.best_a[static_cast<std::size_t>(j)] == i &&
                        e_.best_a[static_cast<std::size_t>(j)] == i;
    if (!mutual) return false;
    if (cfg_.use_margin_threshold) {
      return w_.margin_a[static_cast<std::size_t>(i)] >= cfg_.margin_threshold &&
             e_.margin_a[static_cast<std::size_t>(i)] >= cfg_.margin_threshold;
    }
    return true;
  }

  // -1 when a has no accepted partner.
  int partner_of_a(int a_id) const {
    const int i = pos_a_.at(a_id);
    const int j = w_.best_b[static_cast<std::size_t>(i)];
    if (j < 0) return -1;
    return accepted(a_id, ids_b_[static_cast<std::size_t>(j)]) ? ids_b_[static_cast<std::size_t>(j)]
                                                               : -1;
  }

  int partner_of_b(int b_id) const {
    const int j = pos_b_.at(b_id);
    const int i = w_.best_a[static_cast<std::size_t>(j)];
    if (i < 0) return -1;
    return accepted(ids_a_[static_cast<std::size_t>(i)], b_id) ? ids_a_[static_cast<std::size_t>(i)]
                                                               : -1;
  }

  SpeResult extract(std::span<const int> batch_a, std::span<const int> batch_b) const {
    SpeResult res;
    std::vector<std::pair<int, int>> seen;
    auto add_pair = [&](int a_id, int b_id) {
      const std::pair<int, int> key{a_id, b_id};
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) return;
      seen.push_back(key);
      const int i = pos_a_.at(a_id);
      CandidatePair p;
      p.a_id = a_id;
      p.b_id = b_id;
      p.score_w = w_.margin_a[static_cast<std::size_t>(i)];
      p.score_e = e_.margin_a[static_cast<std::size_t>(i)];
      res.accepted.push_back(p);
    };
    for (int a_id : batch_a) {
      const int b_id = partner_of_a(a_id);
      if (b_id >= 0) {
        add_pair(a_id, b_id);
      } else {
        res.rejected_a.push_back(a_id);
      }
    }
    for (int b_id : batch_b) {
      const int a_id = partner_of_b(b_id);
      if (a_id >= 0) {
        add_pair(a_id, b_id);
      } else {
        res.rejected_b.push_back(b_id);
      }
    }
    std::sort(res.accepted.begin(), res.accepted.end(), [](const auto& x, const auto& y) {
      return x.a_id != y.a_id ? x.a_id < y.a_id : x.b_id < y.b_id;
    });
    return res;
  }

  // Everything the round accepts, regardless of batching.
  SpeResult extract_all() const { return extract(ids_a_, ids_b_); }

 private:
  struct RepMatch {
    std::vector<int> best_b;       // per a-position: argmax margin b-position
    std::vector<double> margin_a;  // margin of that best pair
    std::vector<int> best_a;       // per b-position
    std::vector<double> margin_b;
  };

  MiningConfig cfg_;
  std::vector<int> ids_a_, ids_b_;
  std::unordered_map<int, int> pos_a_, pos_b_;
  RepMatch w_, e_;

  static double topk_sum(std::vector<double>& scores, int k) {
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), scores.size());
    std::partial_sort(scores.begin(), scores.begin() + static_cast<long>(keep), scores.end(),
                      std::greater<double>());
    double s = 0.0;
    for (std::size_t i = 0; i < keep; ++i) s += scores[i];
    // short neighborhoods pad with zeros, matching a k-sized average
    return s;
  }

  RepMatch match_representation(const VectorIndex& ia, const VectorIndex& ib) const {
    const int na = ia.size(), nb = ib.size();
    const Mat cosm = ia.vectors().transpose() * ib.vectors();  // na x nb
    std::vector<double> nnsum_a(static_cast<std::size_t>(na));
    std::vector<double> nnsum_b(static_cast<std::size_t>(nb));
    std::vector<double> buf;
    for (int i = 0; i < na; ++i) {
      buf.assign(cosm.row(i).begin(), cosm.row(i).end());
      nnsum_a[static_cast<std::size_t>(i)] = topk_sum(buf, cfg_.k);
    }
    for (int j = 0; j < nb; ++j) {
      buf.assign(cosm.col(j).begin(), cosm.col(j).end());
      nnsum_b[static_cast<std::size_t>(j)] = topk_sum(buf, cfg_.k);
    }
    const double two_k = 2.0 * cfg_.k;
    auto margin = [&](int i, int j) {
      double denom = (nnsum_a[static_cast<std::size_t>(i)] + nnsum_b[static_cast<std::size_t>(j)]) /
                     two_k;
      if (denom < cfg_.denom_eps) denom = cfg_.denom_eps;
      return cosm(i, j) / denom;
    };
    RepMatch m;
    m.best_b.assign(static_cast<std::size_t>(na), -1);
    m.margin_a.assign(static_cast<std::size_t>(na), 0.0);
    m.best_a.assign(static_cast<std::size_t>(nb), -1);
    m.margin_b.assign(static_cast<std::size_t>(nb), 0.0);
    for (int i = 0; i < na; ++i) {
      int best = -1;
      double best_margin = 0.0;
      for (int j = 0; j < nb; ++j) {
        const double s = margin(i, j);
        if (best < 0 || s > best_margin ||
            (s == best_margin &&
             ids_b_[static_cast<std::size_t>(j)] < ids_b_[static_cast<std::size_t>(best)])) {
          best = j;
          best_margin = s;
        }
      }
      m.best_b[static_cast<std::size_t>(i)] = best;
      m.margin_a[static_cast<std::size_t>(i)] = best_margin;
    }
    for (int j = 0; j < nb; ++j) {
      int best = -1;
      double best_margin = 0.0;
      for (int i = 0; i < na; ++i) {
        const double s = margin(i, j);
        if (best < 0 || s > best_margin ||
            (s == best_margin &&
             ids_a_[static_cast<std::size_t>(i)] < ids_a_[static_cast<std::size_t>(best)])) {
          best = i;
          best_margin = s;
        }
      }
      m.best_a[static_cast<std::size_t>(j)] = best;
      m.margin_b[static_cast<std::size_t>(j)] = best_margin;
    }
    return m;
  }
};

// Convenience wrapper: one round built from frozen-model indexes, one batched
// extraction against it.
inline SpeResult extract_pairs(const DualIndex& index_a, const DualIndex& index_b,
                               std::span<const int> batch_a, std::span<const int> batch_b,
                               const MiningConfig& cfg) {
  return ExtractionRound(index_a, index_b, cfg).extract(batch_a, batch_b);
}

// Mean top-k recall of the clustered index against exact search over the
// same vectors. Approximate mode should clear 0.95 before being trusted.
inline double approximate_index_recall(const std::vector<std::pair<int, Vec>>& items, int k,
                                       int nprobe, std::uint64_t seed, int query_count = 200) {
  const VectorIndex exact = VectorIndex::build(items, IndexMode::exact);
  const VectorIndex approx = VectorIndex::build(items, IndexMode::approximate, nprobe, seed);
  Rng rng = Rng(seed).fork(0x726563ULL);
  double recall_sum = 0.0;
  const int queries = std::min<int>(query_count, static_cast<int>(items.size()));
  for (int q = 0; q < queries; ++q) {
    const Vec& query = items[static_cast<std::size_t>(
                                rng.uniform_int(static_cast<int>(items.size())))]
                           .second;
    const auto want = exact.top_k(query, k);
    const auto got = approx.top_k(query, k);
    std::unordered_map<int, bool> got_ids;
    for (const auto& [id, cos] : got) got_ids[id] = true;
    int hit = 0;
    for (const auto& [id, cos] : want) hit += got_ids.count(id) ? 1 : 0;
    recall_sum += static_cast<double>(hit) / static_cast<double>(want.size());
  }
  return recall_sum / queries;
}

}  // namespace stylemine
