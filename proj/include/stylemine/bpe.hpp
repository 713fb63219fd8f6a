#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stylemine/text.hpp"
#include "stylemine/types.hpp"

namespace stylemine {

// Classic byte-pair encoding over whitespace-pre-tokenized words.
//
// Each word is split into code-point symbols followed by a separate
// end-of-word marker symbol. The marker is U+E000 (private use), which sorts
// after ASCII letters, so the lexicographic tie-break prefers letter pairs.
// Merges are greedy by frequency; ties go to the lexicographically smallest
// pair. Merging stops early once no pair occurs at least twice.

inline const std::string& bpe_eow() {
  static const std::string m = "\xEE\x80\x80";  // U+E000
  return m;
}

using MergeRule = std::pair<std::string, std::string>;

class BpeModel {
 public:
  SpecialTokens specials;
  std::vector<StyleTag> styles;                 // styles[i] has id specials.tag_id(i)
  std::vector<MergeRule> merges;
  std::vector<std::string> id_to_token;         // full table, specials included

  int vocab_size() const { return static_cast<int>(id_to_token.size()); }

  int tag_id(const StyleTag& tag) const {
    for (std::size_t i = 0; i < styles.size(); ++i) {
      if (styles[i].surface == tag.surface) return specials.tag_id(static_cast<int>(i));
    }
    throw std::invalid_argument("BpeModel: unknown style tag " + tag.surface);
  }

  const StyleTag& tag_of(int id) const {
    if (!specials.is_tag(id)) throw std::invalid_argument("BpeModel: id is not a style tag");
    return styles[static_cast<std::size_t>(id - SpecialTokens::first_tag)];
  }

  // -1 when the token string is not in the vocabulary.
  int token_id(const std::string& tok) const {
    const auto it = token_to_id_.find(tok);
    return it == token_to_id_.end() ? -1 : it->second;
  }

  TokenSequence encode(std::string_view text, const StyleTag* style = nullptr) const {
    const auto words = split_words(text);
    if (words.empty()) throw std::invalid_argument("encode: text has no tokens");
    TokenSequence seq;
    if (style) {
      seq.ids.push_back(tag_id(*style));
      seq.has_style_prefix = true;
    }
    for (const auto& word : words) encode_word(word, seq.ids);
    return seq;
  }

  std::string decode(const TokenSequence& seq) const { return decode_ids(seq.ids); }

  std::string decode_ids(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
      if (id < 0 || id >= vocab_size()) {
        throw std::out_of_range("decode: token id " + std::to_string(id) +
                                " outside vocab of size " + std::to_string(vocab_size()));
      }
      if (id == SpecialTokens::unk) {
        out += "<unk>";
        continue;
      }
      if (specials.is_special(id)) continue;  // tags, BOS/EOS/PAD/MASK
      const std::string& tok = id_to_token[static_cast<std::size_t>(id)];
      std::size_t i = 0;
      while (i < tok.size()) {
        if (tok.compare(i, bpe_eow().size(), bpe_eow()) == 0) {
          out.push_back(' ');
          i += bpe_eow().size();
        } else {
          out.push_back(tok[i]);
          ++i;
        }
      }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("BpeModel::save: cannot open " + path);
    f << "stylemine-bpe v1\n";
    f << "styles " << styles.size() << "\n";
    for (const auto& s : styles) f << s.id << "\t" << s.surface << "\n";
    f << "merges " << merges.size() << "\n";
    for (const auto& m : merges) f << m.first << "\t" << m.second << "\n";
    f << "vocab " << id_to_token.size() << "\n";
    for (std::size_t i = 0; i < id_to_token.size(); ++i) {
      f << id_to_token[i] << "\t" << i << "\n";
    }
  }

  static BpeModel load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("BpeModel::load: cannot open " + path);
    std::string line;
    auto next_line = [&]() {
      if (!std::getline(f, line)) throw std::runtime_error("BpeModel::load: truncated file");
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    };
    if (next_line() != "stylemine-bpe v1") {
      throw std::runtime_error("BpeModel::load: unsupported model header");
    }
    BpeModel m;
    auto read_count = [&](const std::string& key) {
      next_line();
      std::istringstream iss(line);
      std::string word;
      std::size_t n = 0;
      if (!(iss >> word >> n) || word != key) {
        throw std::runtime_error("BpeModel::load: expected '" + key + " <n>'");
      }
      return n;
    };
    const std::size_t n_styles = read_count("styles");
    for (std::size_t i = 0; i < n_styles; ++i) {
      next_line();
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("BpeModel::load: bad style line");
      m.styles.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    m.specials.num_tags = static_cast<int>(n_styles);
    const std::size_t n_merges = read_count("merges");
    for (std::size_t i = 0; i < n_merges; ++i) {
      next_line();
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("BpeModel::load: bad merge line");
      m.merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    const std::size_t n_vocab = read_count("vocab");
    m.id_to_token.resize(n_vocab);
    for (std::size_t i = 0; i < n_vocab; ++i) {
      next_line();
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw std::runtime_error("BpeModel::load: bad vocab line");
      const std::size_t id = std::stoul(line.substr(tab + 1));
      if (id >= n_vocab) throw std::runtime_error("BpeModel::load: vocab id out of range");
      m.id_to_token[id] = line.substr(0, tab);
    }
    m.rebuild_lookup();
    return m;
  }

  void rebuild_lookup() {
    token_to_id_.clear();
    for (std::size_t i = 0; i < id_to_token.size(); ++i) {
      token_to_id_.emplace(id_to_token[i], static_cast<int>(i));
    }
    merge_rank_.clear();
    for (std::size_t r = 0; r < merges.size(); ++r) {
      merge_rank_.emplace(merges[r].first + "\x1f" + merges[r].second, static_cast<int>(r));
    }
  }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::unordered_map<std::string, int> merge_rank_;  // "left\x1fright" -> rank

  void encode_word(const std::string& word, std::vector<int>& out) const {
    std::vector<std::string> syms = utf8_chars(word);
    syms.push_back(bpe_eow());
    // Repeatedly apply the earliest-trained merge present in the word.
    for (;;) {
      int best_rank = INT32_MAX;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        const auto it = merge_rank_.find(syms[i] + "\x1f" + syms[i + 1]);
        if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
      }
      if (best_rank == INT32_MAX) break;
      const MergeRule& rule = merges[static_cast<std::size_t>(best_rank)];
      std::vector<std::string> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == rule.first && syms[i + 1] == rule.second) {
          next.push_back(syms[i] + syms[i + 1]);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      syms.swap(next);
    }
    for (const auto& sym : syms) {
      const auto it = token_to_id_.find(sym);
      out.push_back(it == token_to_id_.end() ? SpecialTokens::unk : it->second);
    }
  }
};

namespace bpe_detail {

struct PairHash {
  std::size_t operator()(const MergeRule& p) const {
    const std::size_t h1 = std::hash<std::string>()(p.first);
    const std::size_t h2 = std::hash<std::string>()(p.second);
    return h1 * 1000003u ^ h2;
  }
};

struct QueueEntry {
  long count;
  MergeRule pair;
};

struct QueueLess {
  // max-heap on count, then lexicographically smallest pair on top
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.count != b.count) return a.count < b.count;
    return a.pair > b.pair;
  }
};

}  // namespace bpe_detail

inline BpeModel train_bpe(const std::vector<StyleCorpus>& corpora, int merge_budget) {
  if (corpora.empty()) throw std::invalid_argument("train_bpe: no corpora");
  if (merge_budget < 0) throw std::invalid_argument("train_bpe: negative merge budget");

  BpeModel model;
  for (const StyleCorpus& c : corpora) {
    bool known = false;
    for (const auto& s : model.styles) known = known || s == c.style;
    if (!known) model.styles.push_back(c.style);
  }
  if (model.styles.size() != 2) {
    throw std::invalid_argument("train_bpe: task must have exactly two styles, got " +
                                std::to_string(model.styles.size()));
  }
  model.specials.num_tags = 2;

  // word frequencies
  std::unordered_map<std::string, long> word_freq;
  for (const StyleCorpus& c : corpora) {
    for (const Sentence& s : c.sentences) {
      for (const auto& w : split_words(s.text)) ++word_freq[w];
    }
  }
  if (word_freq.empty()) throw std::invalid_argument("train_bpe: empty text stream");

  struct Word {
    std::vector<std::string> syms;
    long freq;
  };
  std::vector<Word> words;
  {
    std::vector<std::pair<std::string, long>> sorted(word_freq.begin(), word_freq.end());
    std::sort(sorted.begin(), sorted.end());
    words.reserve(sorted.size());
    std::unordered_set<std::string> alphabet_set;
    for (auto& [text, freq] : sorted) {
      Word w;
      w.syms = utf8_chars(text);
      w.syms.push_back(bpe_eow());
      w.freq = freq;
      for (const auto& s : w.syms) alphabet_set.insert(s);
      words.push_back(std::move(w));
    }
    std::vector<std::string> alphabet(alphabet_set.begin(), alphabet_set.end());
    std::sort(alphabet.begin(), alphabet.end());
    for (int i = 0; i < model.specials.num_reserved(); ++i) model.id_to_token.emplace_back();
    model.id_to_token[SpecialTokens::pad] = "<pad>";
    model.id_to_token[SpecialTokens::bos] = "<bos>";
    model.id_to_token[SpecialTokens::eos] = "<eos>";
    model.id_to_token[SpecialTokens::unk] = "<unk>";
    model.id_to_token[SpecialTokens::mask] = "<mask>";
    for (std::size_t i = 0; i < model.styles.size(); ++i) {
      model.id_to_token[static_cast<std::size_t>(SpecialTokens::first_tag) + i] =
          model.styles[i].surface;
    }
    for (auto& a : alphabet) model.id_to_token.push_back(a);
  }

  using bpe_detail::PairHash;
  using bpe_detail::QueueEntry;
  using bpe_detail::QueueLess;
  std::unordered_map<MergeRule, long, PairHash> counts;
  std::unordered_map<MergeRule, std::unordered_set<int>, PairHash> where;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueLess> queue;

  auto add_word_pairs = [&](int wi, long sign) {
    const Word& w = words[static_cast<std::size_t>(wi)];
    for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
      MergeRule p{w.syms[i], w.syms[i + 1]};
      long& c = counts[p];
      c += sign * w.freq;
      if (sign > 0) {
        where[p].insert(wi);
        queue.push({c, p});
      }
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_word_pairs(static_cast<int>(wi), +1);

  std::unordered_set<std::string> vocab_set(model.id_to_token.begin(), model.id_to_token.end());
  for (int step = 0; step < merge_budget; ++step) {
    MergeRule best;
    long best_count = 0;
    // lazy deletion: skip queue entries whose count is stale
    while (!queue.empty()) {
      const QueueEntry top = queue.top();
      const auto it = counts.find(top.pair);
      const long current = it == counts.end() ? 0 : it->second;
      if (current != top.count) {
        queue.pop();
        if (current > 0) queue.push({current, top.pair});
        continue;
      }
      best = top.pair;
      best_count = top.count;
      break;
    }
    if (best_count < 2) break;  // nothing left worth merging

    model.merges.push_back(best);
    const std::string merged = best.first + best.second;
    if (vocab_set.insert(merged).second) model.id_to_token.push_back(merged);

    std::vector<int> affected(where[best].begin(), where[best].end());
    std::sort(affected.begin(), affected.end());
    // retire the merged pair entirely; affected words re-add their new pairs
    counts.erase(best);
    where.erase(best);
    for (int wi : affected) {
      Word& w = words[static_cast<std::size_t>(wi)];
      bool contains = false;
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        if (w.syms[i] == best.first && w.syms[i + 1] == best.second) {
          contains = true;
          break;
        }
      }
      if (!contains) continue;  // stale index entry
      add_word_pairs(wi, -1);
      std::vector<std::string> next;
      next.reserve(w.syms.size());
      for (std::size_t i = 0; i < w.syms.size(); ++i) {
        if (i + 1 < w.syms.size() && w.syms[i] == best.first && w.syms[i + 1] == best.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.syms[i]);
        }
      }
      w.syms.swap(next);
      add_word_pairs(wi, +1);
    }
    counts.erase(best);
    where.erase(best);
  }

  model.rebuild_lookup();
  return model;
}

}  // namespace stylemine
