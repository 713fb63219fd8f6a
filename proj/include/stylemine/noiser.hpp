#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "stylemine/rng.hpp"
#include "stylemine/types.hpp"

namespace stylemine {

struct NoiseConfig {
  double lambda = 3.5;      // mean span length
  double mask_ratio = 0.35; // fraction of content tokens consumed by spans
  int insert_masks = 1;     // extra MASK insertions per sequence
  bool permute = true;
  std::uint64_t seed = 0;   // used by callers that own the stream
  // Token ids that end a segment for the permutation step (punctuation).
  std::unordered_set<int> boundary_ids;
};

struct NoisedPair {
  TokenSequence noisy;
  TokenSequence clean;
};

// Text-infilling corruption: Poisson(lambda)-length spans each collapse to a
// single MASK until exactly ceil(mask_ratio * len) content tokens are
// consumed (spans are capped at the remaining budget), then `insert_masks`
// MASKs are inserted at uniform positions, then the order of
// punctuation-delimited segments is permuted. A style prefix is exempt.
inline NoisedPair noise(const TokenSequence& seq, const NoiseConfig& cfg, Rng& rng) {
  if (cfg.lambda <= 0) throw std::invalid_argument("noise: lambda must be > 0");
  if (cfg.mask_ratio < 0 || cfg.mask_ratio > 1) {
    throw std::invalid_argument("noise: mask_ratio must be in [0,1]");
  }
  if (cfg.insert_masks < 0) throw std::invalid_argument("noise: insert_masks must be >= 0");

  const std::vector<int> tokens = seq.content();
  const int n = static_cast<int>(tokens.size());
  if (n == 0) throw std::invalid_argument("noise: sequence has no content tokens");

  // (a) span masking
  std::vector<bool> masked(tokens.size(), false);
  std::vector<bool> span_start(tokens.size(), false);
  const int budget = static_cast<int>(std::ceil(cfg.mask_ratio * n));
  int consumed = 0;
  while (consumed < budget) {
    std::vector<int> unmasked;
    unmasked.reserve(tokens.size());
    for (int i = 0; i < n; ++i) {
      if (!masked[static_cast<std::size_t>(i)]) unmasked.push_back(i);
    }
    int span = rng.poisson_at_least_one(cfg.lambda);
    if (span > budget - consumed) span = budget - consumed;
    const int start = rng.uniform_int(static_cast<int>(unmasked.size()));
    if (span > static_cast<int>(unmasked.size()) - start) {
      span = static_cast<int>(unmasked.size()) - start;
    }
    span_start[static_cast<std::size_t>(unmasked[static_cast<std::size_t>(start)])] = true;
    for (int k = 0; k < span; ++k) {
      masked[static_cast<std::size_t>(unmasked[static_cast<std::size_t>(start + k)])] = true;
    }
    consumed += span;
  }

  std::vector<int> out;
  out.reserve(tokens.size() + static_cast<std::size_t>(cfg.insert_masks));
  for (int i = 0; i < n; ++i) {
    if (span_start[static_cast<std::size_t>(i)]) out.push_back(SpecialTokens::mask);
    if (!masked[static_cast<std::size_t>(i)]) out.push_back(tokens[static_cast<std::size_t>(i)]);
  }

  // (b) random mask insertions
  for (int k = 0; k < cfg.insert_masks; ++k) {
    const int pos = rng.uniform_int(static_cast<int>(out.size()) + 1);
    out.insert(out.begin() + pos, SpecialTokens::mask);
  }

  // (c) segment permutation
  if (cfg.permute && !out.empty()) {
    std::vector<std::vector<int>> segments(1);
    for (int id : out) {
      segments.back().push_back(id);
      if (cfg.boundary_ids.count(id)) segments.emplace_back();
    }
    if (segments.back().empty()) segments.pop_back();
    if (segments.size() >= 2) {
      rng.shuffle(segments);
      out.clear();
      for (const auto& seg : segments) out.insert(out.end(), seg.begin(), seg.end());
    }
  }

  NoisedPair pair;
  pair.clean = seq;
  pair.noisy.has_style_prefix = seq.has_style_prefix;
  if (seq.has_style_prefix) pair.noisy.ids.push_back(seq.ids[0]);
  pair.noisy.ids.insert(pair.noisy.ids.end(), out.begin(), out.end());
  return pair;
}

}  // namespace stylemine
