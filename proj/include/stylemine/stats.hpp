#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace stylemine {

// items x raters; kMissingRating marks an absent rating.
struct RatingsMatrix {
  static constexpr int kMissingRating = -1;
  std::vector<std::vector<int>> values;

  std::size_t items() const { return values.size(); }
};

enum class AlphaMetric { ordinal, interval };

// Krippendorff's alpha via the coincidence-matrix formulation. Items with
// fewer than two ratings cannot be paired and are skipped.
inline double krippendorff_alpha(const RatingsMatrix& matrix, AlphaMetric metric) {
  std::vector<std::vector<int>> units;
  for (const auto& row : matrix.values) {
    std::vector<int> unit;
    for (int v : row) {
      if (v != RatingsMatrix::kMissingRating) unit.push_back(v);
    }
    if (unit.size() >= 2) units.push_back(std::move(unit));
  }
  if (units.size() < 2) {
    throw std::invalid_argument("krippendorff_alpha: need >= 2 items with >= 2 ratings");
  }

  // distinct values and their coincidence marginals
  std::map<int, std::size_t> value_index;
  for (const auto& unit : units) {
    for (int v : unit) value_index.emplace(v, 0);
  }
  if (value_index.size() < 2) {
    throw std::invalid_argument(
        "krippendorff_alpha: all ratings identical, expected disagreement is zero");
  }
  std::vector<double> value_of;
  {
    std::size_t i = 0;
    for (auto& [v, idx] : value_index) {
      idx = i++;
      value_of.push_back(static_cast<double>(v));
    }
  }
  const std::size_t m = value_of.size();
  std::vector<std::vector<double>> coincidence(m, std::vector<double>(m, 0.0));
  for (const auto& unit : units) {
    const double w = 1.0 / static_cast<double>(unit.size() - 1);
    for (std::size_t i = 0; i < unit.size(); ++i) {
      for (std::size_t j = 0; j < unit.size(); ++j) {
        if (i == j) continue;
        coincidence[value_index[unit[i]]][value_index[unit[j]]] += w;
      }
    }
  }
  std::vector<double> marginal(m, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t k = 0; k < m; ++k) marginal[c] += coincidence[c][k];
    n += marginal[c];
  }

  auto diff2 = [&](std::size_t c, std::size_t k) {
    if (metric == AlphaMetric::interval) {
      const double d = value_of[c] - value_of[k];
      return d * d;
    }
    // ordinal: cumulative marginals between the two ranks
    const auto [lo, hi] = std::minmax(c, k);
    double s = 0.0;
    for (std::size_t g = lo; g <= hi; ++g) s += marginal[g];
    s -= (marginal[c] + marginal[k]) / 2.0;
    return s * s;
  };

  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t k = 0; k < m; ++k) {
      if (c == k) continue;
      const double d2 = diff2(c, k);
      observed += coincidence[c][k] * d2;
      expected += marginal[c] * marginal[k] * d2;
    }
  }
  if (expected == 0.0) {
    throw std::invalid_argument("krippendorff_alpha: expected disagreement is zero");
  }
  return 1.0 - (n - 1.0) * observed / expected;
}

// Two-sided Wilcoxon signed-rank test. Zero differences are dropped; ties
// share average ranks. Exact enumeration of the rank-sum distribution for
// n <= 25, normal approximation with tie correction above.
inline double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: unequal sample sizes");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) {
    throw std::invalid_argument("wilcoxon: all differences are zero");
  }
  const std::size_t n = diffs.size();
  if (n < 6) {
    throw std::invalid_argument("wilcoxon: fewer than 6 nonzero differences");
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(diffs[x]) < std::abs(diffs[y]);
  });
  std::vector<double> rank(n, 0.0);
  std::vector<std::size_t> tie_sizes;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }

  double w_plus = 0.0, rank_total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    rank_total += rank[k];
    if (diffs[k] > 0) w_plus += rank[k];
  }
  const double w_minus = rank_total - w_plus;

  if (n <= 25) {
    // Ranks are multiples of 1/2, so doubled ranks are exact integers and a
    // subset-sum table over 2*W enumerates all 2^n sign assignments.
    std::vector<long> r2(n);
    long sum2 = 0;
    for (std::size_t k = 0; k < n; ++k) {
      r2[k] = static_cast<long>(std::llround(2.0 * rank[k]));
      sum2 += r2[k];
    }
    std::vector<double> count(static_cast<std::size_t>(sum2) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (std::size_t k = 0; k < n; ++k) {
      reach += r2[k];
      for (long s = reach; s >= r2[k]; --s) {
        count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r2[k])];
      }
    }
    const long t_lo = static_cast<long>(std::llround(2.0 * std::min(w_plus, w_minus)));
    const long t_hi = static_cast<long>(std::llround(2.0 * std::max(w_plus, w_minus)));
    double below = 0.0, above = 0.0;
    for (long s = 0; s <= t_lo; ++s) below += count[static_cast<std::size_t>(s)];
    for (long s = t_hi; s <= sum2; ++s) above += count[static_cast<std::size_t>(s)];
    const double total = std::pow(2.0, static_cast<double>(n));
    return std::min(1.0, (below + above) / total);
  }

  const double dn = static_cast<double>(n);
  const double mean = dn * (dn + 1.0) / 4.0;
  double tie_term = 0.0;
  for (std::size_t t : tie_sizes) {
    const double dt = static_cast<double>(t);
    tie_term += dt * dt * dt - dt;
  }
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) throw std::invalid_argument("wilcoxon: zero variance");
  const double z = (w_plus - mean) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace stylemine
