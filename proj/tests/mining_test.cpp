#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "stylemine/mining.hpp"
#include "stylemine/rng.hpp"

using namespace stylemine;

namespace {

std::vector<std::pair<int, Vec>> random_items(int n, int dim, Rng& rng) {
  std::vector<std::pair<int, Vec>> items;
  for (int i = 0; i < n; ++i) {
    Vec v(dim);
    for (int d = 0; d < dim; ++d) v(d) = rng.normal(0, 1);
    items.emplace_back(i, v);
  }
  return items;
}

// ---- independent brute-force oracle (plain loops, no index machinery) ----

double naive_cos(const std::vector<double>& x, const std::vector<double>& y) {
  double dot = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  return dot / (std::sqrt(nx) * std::sqrt(ny));
}

struct NaiveRule {
  // cosine matrices per representation
  std::vector<std::vector<double>> cw, ce;
  int na, nb, k;

  static std::vector<std::vector<double>> cosines(const std::vector<std::vector<double>>& a,
                                                  const std::vector<std::vector<double>>& b) {
    std::vector<std::vector<double>> c(a.size(), std::vector<double>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) c[i][j] = naive_cos(a[i], b[j]);
    }
    return c;
  }

  static double topk_sum(std::vector<double> v, int k) {
    std::sort(v.begin(), v.end(), std::greater<double>());
    double s = 0;
    for (int i = 0; i < k && i < static_cast<int>(v.size()); ++i) s += v[i];
    return s;
  }

  // mutual-argmax acceptance under both representations
  std::set<std::pair<int, int>> accepted() const {
    std::set<std::pair<int, int>> out;
    auto best_pairs = [&](const std::vector<std::vector<double>>& c) {
      std::vector<double> na_sum(static_cast<std::size_t>(na)), nb_sum(static_cast<std::size_t>(nb));
      for (int i = 0; i < na; ++i) na_sum[static_cast<std::size_t>(i)] = topk_sum(c[static_cast<std::size_t>(i)], k);
      for (int j = 0; j < nb; ++j) {
        std::vector<double> col;
        for (int i = 0; i < na; ++i) col.push_back(c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        nb_sum[static_cast<std::size_t>(j)] = topk_sum(col, k);
      }
      auto margin = [&](int i, int j) {
        return c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /
               ((na_sum[static_cast<std::size_t>(i)] + nb_sum[static_cast<std::size_t>(j)]) /
                (2.0 * k));
      };
      std::vector<int> best_b(static_cast<std::size_t>(na)), best_a(static_cast<std::size_t>(nb));
      for (int i = 0; i < na; ++i) {
        int arg = 0;
        for (int j = 1; j < nb; ++j) {
          if (margin(i, j) > margin(i, arg)) arg = j;
        }
        best_b[static_cast<std::size_t>(i)] = arg;
      }
      for (int j = 0; j < nb; ++j) {
        int arg = 0;
        for (int i = 1; i < na; ++i) {
          if (margin(i, j) > margin(arg, j)) arg = i;
        }
        best_a[static_cast<std::size_t>(j)] = arg;
      }
      return std::make_pair(best_b, best_a);
    };
    const auto [wb, wa] = best_pairs(cw);
    const auto [eb, ea] = best_pairs(ce);
    for (int i = 0; i < na; ++i) {
      const int j = wb[static_cast<std::size_t>(i)];
      if (eb[static_cast<std::size_t>(i)] == j && wa[static_cast<std::size_t>(j)] == i &&
          ea[static_cast<std::size_t>(j)] == i) {
        out.insert({i, j});
      }
    }
    return out;
  }
};

std::vector<std::vector<double>> to_naive(const std::vector<std::pair<int, Vec>>& items) {
  std::vector<std::vector<double>> out;
  for (const auto& [id, v] : items) {
    out.emplace_back(v.data(), v.data() + v.size());
  }
  return out;
}

std::set<std::pair<int, int>> accepted_set(const SpeResult& res) {
  std::set<std::pair<int, int>> out;
  for (const auto& p : res.accepted) out.insert({p.a_id, p.b_id});
  return out;
}

// ---- index tests ----

TEST(VectorIndex, SelfRetrievalOnOrthonormalBasis) {
  std::vector<std::pair<int, Vec>> items;
  for (int i = 0; i < 3; ++i) {
    Vec v = Vec::Zero(3);
    v(i) = 1.0;
    items.emplace_back(i, v);
  }
  const VectorIndex idx = VectorIndex::build(items, IndexMode::exact);
  const auto top = idx.top_k(items[2].second, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].first, 2);
  EXPECT_DOUBLE_EQ(top[0].second, 1.0);
}

TEST(VectorIndex, ExactTopKMatchesLinearScan) {
  Rng rng(17);
  const auto items = random_items(500, 12, rng);
  const VectorIndex idx = VectorIndex::build(items, IndexMode::exact);
  const auto naive = to_naive(items);
  for (int k : {1, 4, 16}) {
    for (int q = 0; q < 50; ++q) {
      const int qi = rng.uniform_int(500);
      const auto got = idx.top_k(items[static_cast<std::size_t>(qi)].second, k);
      // oracle: full scan + sort
      std::vector<std::pair<double, int>> scored;
      for (int i = 0; i < 500; ++i) {
        scored.emplace_back(naive_cos(naive[static_cast<std::size_t>(qi)],
                                      naive[static_cast<std::size_t>(i)]),
                            i);
      }
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      ASSERT_EQ(got.size(), static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) {
        EXPECT_EQ(got[static_cast<std::size_t>(i)].first, scored[static_cast<std::size_t>(i)].second);
        EXPECT_NEAR(got[static_cast<std::size_t>(i)].second, scored[static_cast<std::size_t>(i)].first, 1e-12);
      }
    }
  }
}

TEST(VectorIndex, RejectsZeroVectorsAndDimensionMismatch) {
  std::vector<std::pair<int, Vec>> items;
  items.emplace_back(0, Vec::Zero(4));
  EXPECT_THROW(VectorIndex::build(items, IndexMode::exact), std::invalid_argument);
  items.clear();
  items.emplace_back(0, Vec::Ones(4));
  items.emplace_back(1, Vec::Ones(5));
  EXPECT_THROW(VectorIndex::build(items, IndexMode::exact), std::invalid_argument);
  EXPECT_THROW(VectorIndex::build({}, IndexMode::exact), std::invalid_argument);
}

TEST(VectorIndex, ApproximateModeHitsRecallTarget) {
  Rng rng(5);
  const auto items = random_items(2000, 16, rng);
  EXPECT_GE(approximate_index_recall(items, 8, 0, 3, 100), 0.95);
}

// ---- margin tests ----

TEST(MarginScore, UniformNeighborhoodGivesOne) {
  Vec x(2), y(2);
  x << 1, 0;
  y << 1, 0;
  const std::vector<double> nn = {1.0};
  EXPECT_DOUBLE_EQ(margin_score(x, y, nn, nn, 1), 1.0);
}

TEST(MarginScore, HandEvaluatedCase) {
  // cos = 0.8, k = 2, sums 1.5 + 1.7 -> 0.8 / (3.2 / 4) = 1.0 exactly
  Vec x(2), y(2);
  x << 1, 0;
  y << 0.8, 0.6;  // unit vector with cos(x,y) = 0.8
  const std::vector<double> nn_x = {0.9, 0.6};
  const std::vector<double> nn_y = {1.0, 0.7};
  EXPECT_DOUBLE_EQ(margin_score(x, y, nn_x, nn_y, 2), 1.0);
}

TEST(MarginScore, OrthogonalVectorsScoreZero) {
  Vec x(2), y(2);
  x << 1, 0;
  y << 0, 1;
  const std::vector<double> nn = {0.4, 0.9, 0.2, 0.5};
  EXPECT_DOUBLE_EQ(margin_score(x, y, nn, nn, 4), 0.0);
}

TEST(MarginScore, RejectsNeighborhoodSizeMismatch) {
  Vec x = Vec::Ones(2), y = Vec::Ones(2);
  const std::vector<double> three = {1, 1, 1};
  const std::vector<double> two = {1, 1};
  EXPECT_THROW(margin_score(x, y, three, two, 3), std::invalid_argument);
  EXPECT_THROW(margin_score(x, y, two, two, 0), std::invalid_argument);
}

// ---- extraction tests ----

DualIndex index_from(const std::vector<std::pair<int, Vec>>& w,
                     const std::vector<std::pair<int, Vec>>& e) {
  return {VectorIndex::build(w, IndexMode::exact), VectorIndex::build(e, IndexMode::exact)};
}

TEST(ExtractPairs, IdenticalCorporaAreFullyMatched) {
  Rng rng(23);
  const auto items = random_items(40, 8, rng);
  const DualIndex ia = index_from(items, items);
  const DualIndex ib = index_from(items, items);
  std::vector<int> batch;
  for (int i = 0; i < 40; ++i) batch.push_back(i);
  MiningConfig cfg;
  const SpeResult res = extract_pairs(ia, ib, batch, batch, cfg);
  EXPECT_EQ(res.accepted.size(), 40u);
  EXPECT_TRUE(res.rejected_a.empty());
  EXPECT_TRUE(res.rejected_b.empty());
  for (const auto& p : res.accepted) EXPECT_EQ(p.a_id, p.b_id);
}

TEST(ExtractPairs, RequiresAgreementOfBothRepresentations) {
  // under w, (a0,b1) is the mutual argmax; under e the b-side vectors for
  // ids 0 and 1 are swapped, so the pair must be rejected. (a2,b2) agrees
  // under both and must be accepted.
  auto unit = [](double x, double y, double z) {
    Vec v(3);
    v << x, y, z;
    return Vec(v / v.norm());
  };
  std::vector<std::pair<int, Vec>> wa = {{0, unit(1, 0, 0)}, {1, unit(0, 1, 0)}, {2, unit(0, 0, 1)}};
  std::vector<std::pair<int, Vec>> wb = {{0, unit(0.2, 1, 0)}, {1, unit(1, 0, 0.1)}, {2, unit(0, 0.3, 1)}};
  std::vector<std::pair<int, Vec>> eb = {{0, unit(1, 0, 0.1)}, {1, unit(0.2, 1, 0)}, {2, unit(0, 0.3, 1)}};
  const DualIndex ia = index_from(wa, wa);
  const DualIndex ib = {VectorIndex::build(wb, IndexMode::exact),
                        VectorIndex::build(eb, IndexMode::exact)};
  const std::vector<int> batch = {0, 1, 2};
  MiningConfig cfg;
  cfg.k = 1;
  const SpeResult res = extract_pairs(ia, ib, batch, batch, cfg);
  const auto acc = accepted_set(res);
  EXPECT_FALSE(acc.count({0, 1}));
  EXPECT_FALSE(acc.count({0, 0}));
  EXPECT_TRUE(acc.count({2, 2}));
}

TEST(ExtractPairs, MatchesBruteForceRuleEvaluation) {
  Rng rng(101);
  for (int inst = 0; inst < 5; ++inst) {
    const int na = 80 + rng.uniform_int(40);
    const int nb = 80 + rng.uniform_int(40);
    const auto wa = random_items(na, 10, rng);
    const auto ea = random_items(na, 14, rng);
    const auto wb = random_items(nb, 10, rng);
    const auto eb = random_items(nb, 14, rng);
    MiningConfig cfg;
    cfg.k = 4;
    const DualIndex ia = {VectorIndex::build(wa, IndexMode::exact),
                          VectorIndex::build(ea, IndexMode::exact)};
    const DualIndex ib = {VectorIndex::build(wb, IndexMode::exact),
                          VectorIndex::build(eb, IndexMode::exact)};
    std::vector<int> batch_a, batch_b;
    for (int i = 0; i < na; ++i) batch_a.push_back(i);
    for (int j = 0; j < nb; ++j) batch_b.push_back(j);
    const SpeResult res = extract_pairs(ia, ib, batch_a, batch_b, cfg);

    NaiveRule oracle{NaiveRule::cosines(to_naive(wa), to_naive(wb)),
                     NaiveRule::cosines(to_naive(ea), to_naive(eb)), na, nb, cfg.k};
    EXPECT_EQ(accepted_set(res), oracle.accepted());
  }
}

TEST(ExtractPairs, PartitionsBatchesAndStaysOneToOne) {
  Rng rng(7);
  const auto wa = random_items(60, 6, rng);
  const auto ea = random_items(60, 9, rng);
  const auto wb = random_items(50, 6, rng);
  const auto eb = random_items(50, 9, rng);
  const DualIndex ia = {VectorIndex::build(wa, IndexMode::exact),
                        VectorIndex::build(ea, IndexMode::exact)};
  const DualIndex ib = {VectorIndex::build(wb, IndexMode::exact),
                        VectorIndex::build(eb, IndexMode::exact)};
  std::vector<int> batch_a, batch_b;
  for (int i = 0; i < 60; ++i) batch_a.push_back(i);
  for (int j = 0; j < 50; ++j) batch_b.push_back(j);
  MiningConfig cfg;
  const SpeResult res = extract_pairs(ia, ib, batch_a, batch_b, cfg);

  std::set<int> a_ids, b_ids;
  for (const auto& p : res.accepted) {
    EXPECT_TRUE(a_ids.insert(p.a_id).second) << "a_id in two pairs";
    EXPECT_TRUE(b_ids.insert(p.b_id).second) << "b_id in two pairs";
  }
  std::set<int> a_all(res.rejected_a.begin(), res.rejected_a.end());
  for (int i : batch_a) {
    EXPECT_TRUE(a_ids.count(i) != a_all.count(i)) << i;  // exactly one side
  }
  std::set<int> b_all(res.rejected_b.begin(), res.rejected_b.end());
  for (int j : batch_b) {
    EXPECT_TRUE(b_ids.count(j) != b_all.count(j)) << j;
  }
}

TEST(ExtractPairs, AcceptanceSymmetricAcrossMiningSides) {
  Rng rng(3);
  const auto wa = random_items(45, 7, rng);
  const auto ea = random_items(45, 7, rng);
  const auto wb = random_items(45, 7, rng);
  const auto eb = random_items(45, 7, rng);
  const DualIndex ia = {VectorIndex::build(wa, IndexMode::exact),
                        VectorIndex::build(ea, IndexMode::exact)};
  const DualIndex ib = {VectorIndex::build(wb, IndexMode::exact),
                        VectorIndex::build(eb, IndexMode::exact)};
  std::vector<int> all_a, all_b;
  for (int i = 0; i < 45; ++i) all_a.push_back(i);
  for (int j = 0; j < 45; ++j) all_b.push_back(j);
  MiningConfig cfg;
  const SpeResult from_a = extract_pairs(ia, ib, all_a, {}, cfg);
  const SpeResult from_b = extract_pairs(ia, ib, {}, all_b, cfg);
  EXPECT_EQ(accepted_set(from_a), accepted_set(from_b));
}

TEST(ExtractPairs, CosineInvariantUnderCommonScaling) {
  Rng rng(13);
  const auto wa = random_items(30, 5, rng);
  const auto ea = random_items(30, 5, rng);
  const auto wb = random_items(30, 5, rng);
  const auto eb = random_items(30, 5, rng);
  auto scaled = [](std::vector<std::pair<int, Vec>> items) {
    for (auto& [id, v] : items) v *= 4.0;  // power of two: lossless in binary
    return items;
  };
  std::vector<int> batch;
  for (int i = 0; i < 30; ++i) batch.push_back(i);
  MiningConfig cfg;
  const SpeResult base = extract_pairs({VectorIndex::build(wa, IndexMode::exact),
                                        VectorIndex::build(ea, IndexMode::exact)},
                                       {VectorIndex::build(wb, IndexMode::exact),
                                        VectorIndex::build(eb, IndexMode::exact)},
                                       batch, batch, cfg);
  const SpeResult big = extract_pairs({VectorIndex::build(scaled(wa), IndexMode::exact),
                                       VectorIndex::build(scaled(ea), IndexMode::exact)},
                                      {VectorIndex::build(scaled(wb), IndexMode::exact),
                                       VectorIndex::build(scaled(eb), IndexMode::exact)},
                                      batch, batch, cfg);
  EXPECT_EQ(accepted_set(base), accepted_set(big));
  ASSERT_EQ(base.accepted.size(), big.accepted.size());
  for (std::size_t i = 0; i < base.accepted.size(); ++i) {
    EXPECT_DOUBLE_EQ(base.accepted[i].score_w, big.accepted[i].score_w);
    EXPECT_DOUBLE_EQ(base.accepted[i].score_e, big.accepted[i].score_e);
  }
}

TEST(ExtractPairs, DeterministicAcrossRuns) {
  Rng rng(29);
  const auto wa = random_items(35, 6, rng);
  const auto ea = random_items(35, 6, rng);
  const auto wb = random_items(35, 6, rng);
  const auto eb = random_items(35, 6, rng);
  std::vector<int> batch;
  for (int i = 0; i < 35; ++i) batch.push_back(i);
  MiningConfig cfg;
  auto run = [&]() {
    return extract_pairs({VectorIndex::build(wa, IndexMode::exact),
                          VectorIndex::build(ea, IndexMode::exact)},
                         {VectorIndex::build(wb, IndexMode::exact),
                          VectorIndex::build(eb, IndexMode::exact)},
                         batch, batch, cfg);
  };
  const SpeResult r1 = run();
  const SpeResult r2 = run();
  EXPECT_EQ(accepted_set(r1), accepted_set(r2));
  EXPECT_EQ(r1.rejected_a, r2.rejected_a);
  EXPECT_EQ(r1.rejected_b, r2.rejected_b);
}

TEST(ExtractPairs, EmptyIndexFails) {
  Rng rng(4);
  const auto items = random_items(5, 4, rng);
  const DualIndex ia = index_from(items, items);
  EXPECT_THROW(VectorIndex::build({}, IndexMode::exact), std::invalid_argument);
  (void)ia;
}

}  // namespace
