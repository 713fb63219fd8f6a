#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemine/corpus.hpp"
#include "stylemine/rng.hpp"
#include "stylemine/types.hpp"

namespace stylemine {

// Template-based two-style corpus with a known counterpart for every
// sentence. The two sides share all content words; only the style-lexicon
// slots differ, and they differ positionally (pos[i] <-> neg[i]). The style
// word of a given content combination is a fixed hash of that combination,
// so each surface sentence has exactly one counterpart.
namespace synth_detail {

inline const std::vector<std::string>& templates() {
  // Distinctive long tails keep masked template words recoverable during
  // denoising. Every template carries two style slots so that one masked
  // slot stays inferable from its visible sibling rather than from the tag.
  static const std::vector<std::string> t = {
      "the %N was %S and the %T staff noticed it right away .",
      "i told my friends the %S %N was %T last night .",
      "honestly , my %N is %S and the mood here is %T .",
      "what a %S %N with such a %T crowd around it !",
      "that %S %N looks %T compared to the one we had before .",
      "the %S %N at the %L was %T according to most guests .",
      "we found the %S %N quite %T after the long afternoon there .",
      "the %N seemed %D %S to the %T people waiting in line .",
      "this %N is %D %S and the %T reviews clearly agree .",
      "a %S %N like that leaves a %T memory for long .",
      "everyone said the %N was %S before the %T evening even started .",
      "the new %N turned out %S despite all the %T early promises .",
      "our %S %N from the %L felt %T by the end of the visit .",
      "the %N was %S , and the %T staff agreed with us completely .",
      "people call this %S %N %T whenever the subject comes up .",
      "the %S %N near the %L is %D %T in the early morning hours .",
      "the %N here is %S and %T according to the guest book .",
      "a %D %S %N with a %T view greeted us at the door .",
      "the %S %N by the %L looked %T under the evening lights .",
      "visitors keep saying the %S %N is %T all season long .",
      "the %S %N behind the %L seemed %T to every single customer .",
      "the %S %N beside the %L was %D %T when we stopped by today .",
  };
  return t;
}

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {
      "movie", "book",   "meal",  "hotel",   "room",    "coffee",  "pizza",
      "garden", "market", "lobby", "concert", "museum", "haircut", "sandwich"};
  return v;
}

inline const std::vector<std::string>& places() {
  static const std::vector<std::string> v = {
      "station", "corner", "plaza",   "harbor", "bakery",
      "campus",  "arcade", "rooftop", "alley",  "courtyard"};
  return v;
}

inline const std::vector<std::string>& adverbs() {
  static const std::vector<std::string> v = {"really", "quite", "rather", "truly", "simply"};
  return v;
}

inline const std::vector<std::string>& positive_words() {
  static const std::vector<std::string> v = {
      "wonderful", "excellent", "delightful", "superb",   "charming",
      "pleasant",  "brilliant", "graceful",   "spotless", "cheerful"};
  return v;
}

inline const std::vector<std::string>& negative_words() {
  static const std::vector<std::string> v = {
      "terrible",  "awful",     "dreadful",  "shabby", "gloomy",
      "unpleasant", "clumsy",   "graceless", "filthy", "dismal"};
  return v;
}

inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// The style word is a fixed pseudo-random function of the whole content
// combination, so a sentence has exactly one counterpart but the slot index
// carries no pattern a model could extrapolate to unseen combinations.
inline int style_slot(int tmpl, int noun, int place, int adv, int salt) {
  const std::uint64_t key = 1000003ULL * tmpl + 9176ULL * noun + 131ULL * place + 17ULL * adv +
                            0x51abc9e2ULL * salt;
  return static_cast<int>(mix(key) % positive_words().size());
}

inline std::string instantiate(const std::string& tmpl, const std::string& noun,
                               const std::string& place, const std::string& adv,
                               const std::string& s1, const std::string& s2) {
  std::string out;
  out.reserve(tmpl.size() + 24);
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '%' && i + 1 < tmpl.size()) {
      switch (tmpl[i + 1]) {
        case 'N': out += noun; ++i; continue;
        case 'L': out += place; ++i; continue;
        case 'D': out += adv; ++i; continue;
        case 'S': out += s1; ++i; continue;
        case 'T': out += s2; ++i; continue;
        default: break;
      }
    }
    out.push_back(tmpl[i]);
  }
  return out;
}

// All (styleA, styleB) sentence pairs the template grammar can produce.
inline std::vector<std::array<std::string, 2>> enumerate_pairs() {
  std::vector<std::array<std::string, 2>> pairs;
  const auto& ts = templates();
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const bool has_place = ts[t].find("%L") != std::string::npos;
    const bool has_adv = ts[t].find("%D") != std::string::npos;
    const int np = has_place ? static_cast<int>(places().size()) : 1;
    const int na = has_adv ? static_cast<int>(adverbs().size()) : 1;
    for (std::size_t n = 0; n < nouns().size(); ++n) {
      for (int p = 0; p < np; ++p) {
        for (int a = 0; a < na; ++a) {
          const int s1 = style_slot(static_cast<int>(t), static_cast<int>(n), p, a, 0);
          const int s2 = style_slot(static_cast<int>(t), static_cast<int>(n), p, a, 1);
          pairs.push_back(
              {instantiate(ts[t], nouns()[n], places()[p], adverbs()[a],
                           positive_words()[s1], positive_words()[s2]),
               instantiate(ts[t], nouns()[n], places()[p], adverbs()[a],
                           negative_words()[s1], negative_words()[s2])});
        }
      }
    }
  }
  return pairs;
}

}  // namespace synth_detail

inline StyleTag synth_style_a() { return {"pos", "<pos>"}; }
inline StyleTag synth_style_b() { return {"neg", "<neg>"}; }

struct SynthOutput {
  StyleCorpus a;
  StyleCorpus b;
  // Aligned with a.sentences: gold[i] = {a text, its style-B counterpart}.
  std::vector<std::array<std::string, 2>> gold;
};

struct SynthSplits {
  SynthOutput train;
  SynthOutput dev;
  SynthOutput test;
};

inline std::size_t synth_capacity() { return synth_detail::enumerate_pairs().size(); }

namespace synth_detail {

// Style A carries the a-side of `count` pairs. Style B carries the gold
// counterparts of the first `matched` of them plus filler b-sides drawn from
// pairs whose a-side is absent, so only a fraction of the corpus is hidden
// parallel data. Every a-sentence still has a well-defined gold counterpart.
inline SynthOutput make_output(const std::vector<std::array<std::string, 2>>& pairs,
                               std::size_t begin, std::size_t count, std::size_t matched,
                               std::size_t filler_begin, Split split, Rng& rng) {
  SynthOutput out;
  out.a.style = synth_style_a();
  out.b.style = synth_style_b();
  out.a.split = out.b.split = split;
  out.a.preprocessing = out.b.preprocessing = "synthetic,pre-normalized";
  for (std::size_t i = 0; i < count; ++i) {
    const auto& pair = pairs[begin + i];
    out.a.sentences.push_back(make_sentence(pair[0], out.a.style, static_cast<std::int64_t>(i)));
    out.gold.push_back(pair);
  }
  std::vector<std::string> b_texts;
  b_texts.reserve(count);
  for (std::size_t i = 0; i < matched; ++i) b_texts.push_back(pairs[begin + i][1]);
  for (std::size_t i = matched; i < count; ++i) {
    b_texts.push_back(pairs[filler_begin + (i - matched)][1]);
  }
  rng.shuffle(b_texts);  // hide the alignment from anything reading the files
  for (std::size_t i = 0; i < count; ++i) {
    out.b.sentences.push_back(make_sentence(b_texts[i], out.b.style,
                                            static_cast<std::int64_t>(i)));
  }
  return out;
}

}  // namespace synth_detail

// Splits come from one shuffled enumeration, so they are disjoint. `overlap`
// is the fraction of each style-B corpus that is a hidden counterpart of a
// style-A sentence; the rest is unmatched filler, which keeps the corpora
// genuinely non-parallel.
inline SynthSplits synth_splits(int n_train, int n_dev, int n_test, std::uint64_t seed,
                                double overlap = 0.7) {
  if (n_train < 1 || n_dev < 0 || n_test < 0) {
    throw std::invalid_argument("synth_splits: sizes must be positive");
  }
  if (overlap < 0.0 || overlap > 1.0) {
    throw std::invalid_argument("synth_splits: overlap must be in [0,1]");
  }
  auto pairs = synth_detail::enumerate_pairs();
  const auto matched_of = [&](int n) {
    return static_cast<std::size_t>(std::llround(overlap * n));
  };
  const std::size_t want = static_cast<std::size_t>(n_train) + n_dev + n_test;
  const std::size_t fillers = (static_cast<std::size_t>(n_train) - matched_of(n_train)) +
                              (static_cast<std::size_t>(n_dev) - matched_of(n_dev)) +
                              (static_cast<std::size_t>(n_test) - matched_of(n_test));
  if (want + fillers > pairs.size()) {
    throw std::invalid_argument("synth_splits: requested " + std::to_string(want + fillers) +
                                " template draws but the grammar only yields " +
                                std::to_string(pairs.size()));
  }
  Rng rng(seed);
  rng.shuffle(pairs);
  SynthSplits out;
  Rng order_rng = rng.fork(1);
  std::size_t cursor = 0, filler_cursor = want;
  auto emit = [&](int n, Split split) {
    const std::size_t matched = matched_of(n);
    SynthOutput res =
        synth_detail::make_output(pairs, cursor, static_cast<std::size_t>(n), matched,
                                  filler_cursor, split, order_rng);
    cursor += static_cast<std::size_t>(n);
    filler_cursor += static_cast<std::size_t>(n) - matched;
    return res;
  };
  out.train = emit(n_train, Split::train);
  out.dev = emit(n_dev, Split::dev);
  out.test = emit(n_test, Split::test);
  return out;
}

inline SynthOutput synth_generate(int n_per_style, std::uint64_t seed, double overlap = 0.7) {
  return synth_splits(n_per_style, 0, 0, seed, overlap).train;
}

// Sidecar format: one "styleA_sentence \t styleB_gold" line per pair.
inline void write_gold_tsv(const SynthOutput& out, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_gold_tsv: cannot open " + path);
  for (const auto& pair : out.gold) f << pair[0] << '\t' << pair[1] << '\n';
}

inline std::vector<std::array<std::string, 2>> load_gold_tsv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_gold_tsv: cannot open " + path);
  std::vector<std::array<std::string, 2>> gold;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("load_gold_tsv: malformed line");
    gold.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return gold;
}

}  // namespace stylemine
