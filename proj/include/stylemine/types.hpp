#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylemine {

// A task always has exactly two styles. The surface form is the literal
// tag token prepended to model inputs, e.g. "<pos>".
struct StyleTag {
  std::string id;
  std::string surface;

  bool operator==(const StyleTag&) const = default;
};

enum class Split { train, dev, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    default: return "test";
  }
}

struct Sentence {
  std::string text;
  int word_count = 0;
  StyleTag style;
  std::int64_t id = 0;
};

struct StyleCorpus {
  StyleTag style;
  Split split = Split::train;
  std::vector<Sentence> sentences;
  // Human-readable record of the preprocessing already applied to `sentences`.
  std::string preprocessing;

  std::size_t size() const { return sentences.size(); }
};

struct Lexicon {
  std::vector<std::string> entries;  // lowercase words, matched per whole token

  bool empty() const { return entries.empty(); }
};

// Reserved token ids shared by the tokenizer and the model. Learned tokens
// start at num_reserved().
struct SpecialTokens {
  static constexpr int pad = 0;
  static constexpr int bos = 1;
  static constexpr int eos = 2;
  static constexpr int unk = 3;
  static constexpr int mask = 4;
  static constexpr int first_tag = 5;

  int num_tags = 2;

  int num_reserved() const { return first_tag + num_tags; }
  int tag_id(int style_index) const { return first_tag + style_index; }
  bool is_tag(int id) const { return id >= first_tag && id < first_tag + num_tags; }
  bool is_special(int id) const { return id < num_reserved(); }
  // Positions counted into the w(s)/e(s) sums: content tokens plus UNK/MASK.
  // Style tags, BOS/EOS and PAD are excluded.
  bool in_repr_sum(int id) const {
    return id == unk || id == mask || id >= num_reserved();
  }
};

struct TokenSequence {
  std::vector<int> ids;
  bool has_style_prefix = false;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  // Ids after the style prefix, if any.
  std::vector<int> content() const {
    if (!has_style_prefix) return ids;
    return std::vector<int>(ids.begin() + 1, ids.end());
  }
};

enum class Direction { s1_to_s2, s2_to_s1 };
enum class PairOrigin { extracted, backtranslated, denoising };

inline const char* to_string(PairOrigin o) {
  switch (o) {
    case PairOrigin::extracted: return "extracted";
    case PairOrigin::backtranslated: return "backtranslated";
    default: return "denoising";
  }
}

// One supervision unit. `src` always carries the target-style tag as its
// first id; `tgt` never carries a tag.
struct TrainingPair {
  TokenSequence src;
  TokenSequence tgt;
  Direction direction = Direction::s1_to_s2;
  PairOrigin origin = PairOrigin::denoising;
};

}  // namespace stylemine
