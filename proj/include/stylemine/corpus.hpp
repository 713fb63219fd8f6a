#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "stylemine/text.hpp"
#include "stylemine/types.hpp"

namespace stylemine {

enum class LexiconMode { require, exclude };

inline Sentence make_sentence(std::string text, const StyleTag& style, std::int64_t id) {
  Sentence s;
  s.word_count = count_words(text);
  s.text = std::move(text);
  s.style = style;
  s.id = id;
  return s;
}

// Reads a one-sentence-per-line UTF-8 file. Empty lines are dropped; ids are
// assigned to the kept sentences in file order.
inline StyleCorpus load_corpus(const std::string& path, const StyleTag& style, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
  StyleCorpus corpus;
  corpus.style = style;
  corpus.split = split;
  std::string line;
  long line_no = 0;
  std::int64_t next_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (utf8_invalid_at(line) >= 0) {
      throw std::runtime_error("load_corpus: invalid UTF-8 in " + path + " at line " +
                               std::to_string(line_no));
    }
    corpus.sentences.push_back(make_sentence(line, style, next_id++));
  }
  return corpus;
}

inline void save_corpus(const StyleCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_corpus: cannot open " + path);
  for (const Sentence& s : corpus.sentences) out << s.text << '\n';
}

// Lowercase + punctuation-spacing normalization; word counts are recomputed.
inline StyleCorpus normalize_corpus(const StyleCorpus& corpus) {
  StyleCorpus out = corpus;
  for (Sentence& s : out.sentences) {
    s.text = normalize_text(s.text);
    s.word_count = count_words(s.text);
  }
  if (!out.preprocessing.empty()) out.preprocessing += "+";
  out.preprocessing += "lowercase,punct-spacing";
  return out;
}

inline StyleCorpus filter_by_length(const StyleCorpus& corpus, int min_words, int max_words) {
  if (min_words < 1 || min_words > max_words) {
    throw std::invalid_argument("filter_by_length: need 1 <= min_words <= max_words");
  }
  StyleCorpus out = corpus;
  out.sentences.clear();
  for (const Sentence& s : corpus.sentences) {
    if (s.word_count >= min_words && s.word_count <= max_words) out.sentences.push_back(s);
  }
  return out;
}

// Keeps the first occurrence of each exact text.
inline StyleCorpus dedup(const StyleCorpus& corpus) {
  StyleCorpus out = corpus;
  out.sentences.clear();
  std::unordered_set<std::string> seen;
  for (const Sentence& s : corpus.sentences) {
    if (seen.insert(s.text).second) out.sentences.push_back(s);
  }
  return out;
}

inline StyleCorpus lexicon_filter(const StyleCorpus& corpus, const Lexicon& lexicon,
                                  LexiconMode mode) {
  if (lexicon.empty()) throw std::invalid_argument("lexicon_filter: empty lexicon");
  std::unordered_set<std::string> words(lexicon.entries.begin(), lexicon.entries.end());
  StyleCorpus out = corpus;
  out.sentences.clear();
  for (const Sentence& s : corpus.sentences) {
    bool hit = false;
    for (const std::string& tok : split_words(lowercase_ascii(s.text))) {
      if (words.count(tok)) {
        hit = true;
        break;
      }
    }
    if (hit == (mode == LexiconMode::require)) out.sentences.push_back(s);
  }
  return out;
}

// Drops training sentences whose exact text appears in any held-out corpus.
inline StyleCorpus remove_overlap(const StyleCorpus& train,
                                  const std::vector<StyleCorpus>& held_out) {
  std::unordered_set<std::string> blocked;
  for (const StyleCorpus& c : held_out) {
    for (const Sentence& s : c.sentences) blocked.insert(s.text);
  }
  StyleCorpus out = train;
  out.sentences.clear();
  for (const Sentence& s : train.sentences) {
    if (!blocked.count(s.text)) out.sentences.push_back(s);
  }
  if (out.sentences.empty() && !train.sentences.empty()) {
    std::cerr << "warning: remove_overlap dropped every sentence of the "
              << train.style.id << " training corpus\n";
  }
  return out;
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_lexicon: cannot open " + path);
  Lexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lex.entries.push_back(lowercase_ascii(line));
  }
  return lex;
}

}  // namespace stylemine
