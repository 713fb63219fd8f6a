#include <gtest/gtest.h>

#include <unordered_set>

#include "stylemine/bpe.hpp"
#include "stylemine/synth.hpp"

using namespace stylemine;

namespace {

const StyleTag kPos{"pos", "<pos>"};
const StyleTag kNeg{"neg", "<neg>"};

StyleCorpus one_liner(const std::string& text, const StyleTag& tag) {
  StyleCorpus c;
  c.style = tag;
  c.sentences.push_back(make_sentence(text, tag, 0));
  return c;
}

std::vector<StyleCorpus> tiny_task(const std::string& a_text, const std::string& b_text) {
  return {one_liner(a_text, kPos), one_liner(b_text, kNeg)};
}

TEST(TrainBpe, FirstMergeFollowsFrequency) {
  // words: "aa" x2, "ab" x1 -> pair (a,a) has count 2 and wins the
  // lexicographic tie against (a,<eow>)
  const BpeModel m = train_bpe(tiny_task("aa aa", "ab"), 1);
  ASSERT_EQ(m.merges.size(), 1u);
  EXPECT_EQ(m.merges[0].first, "a");
  EXPECT_EQ(m.merges[0].second, "a");
}

TEST(TrainBpe, ZeroBudgetIsCharacterLevel) {
  const BpeModel m = train_bpe(tiny_task("hello world", "bye"), 0);
  EXPECT_TRUE(m.merges.empty());
  const TokenSequence seq = m.encode("hello");
  // h e l l o <eow> -> six symbols
  EXPECT_EQ(seq.size(), 6u);
  EXPECT_EQ(m.decode(seq), "hello");
}

TEST(TrainBpe, BudgetBoundsMergeCount) {
  const SynthOutput synth = synth_generate(300, 17);
  const BpeModel m = train_bpe({synth.a, synth.b}, 8000);
  EXPECT_LE(m.merges.size(), 8000u);
  // desk corpus saturates long before the paper-scale budget
  EXPECT_GT(m.merges.size(), 50u);
}

TEST(TrainBpe, EmptyStreamFails) {
  StyleCorpus a, b;
  a.style = kPos;
  b.style = kNeg;
  EXPECT_THROW(train_bpe({a, b}, 10), std::invalid_argument);
  EXPECT_THROW(train_bpe({}, 10), std::invalid_argument);
}

TEST(TrainBpe, RequiresTwoStyles) {
  EXPECT_THROW(train_bpe({one_liner("a", kPos)}, 5), std::invalid_argument);
}

TEST(TrainBpe, DeterministicMergeList) {
  const SynthOutput synth = synth_generate(200, 4);
  const BpeModel m1 = train_bpe({synth.a, synth.b}, 300);
  const BpeModel m2 = train_bpe({synth.a, synth.b}, 300);
  EXPECT_EQ(m1.merges, m2.merges);
  EXPECT_EQ(m1.id_to_token, m2.id_to_token);
}

TEST(TrainBpe, VocabGrowsMonotonicallyWithBudget) {
  const SynthOutput synth = synth_generate(200, 6);
  const BpeModel small = train_bpe({synth.a, synth.b}, 100);
  const BpeModel large = train_bpe({synth.a, synth.b}, 250);
  std::unordered_set<std::string> large_vocab(large.id_to_token.begin(),
                                              large.id_to_token.end());
  for (const auto& tok : small.id_to_token) {
    EXPECT_TRUE(large_vocab.count(tok)) << tok;
  }
  // merge lists agree on the shared prefix
  ASSERT_LE(small.merges.size(), large.merges.size());
  for (std::size_t i = 0; i < small.merges.size(); ++i) {
    EXPECT_EQ(small.merges[i], large.merges[i]);
  }
}

TEST(Encode, RoundTripsAllTrainingSentences) {
  const SynthOutput synth = synth_generate(400, 9);
  const BpeModel m = train_bpe({synth.a, synth.b}, 400);
  for (const StyleCorpus* c : {&synth.a, &synth.b}) {
    for (const Sentence& s : c->sentences) {
      EXPECT_EQ(m.decode(m.encode(s.text)), s.text);
    }
  }
}

TEST(Encode, StylePrefixIsFirstAndUnique) {
  const SynthOutput synth = synth_generate(100, 2);
  const BpeModel m = train_bpe({synth.a, synth.b}, 100);
  const TokenSequence seq = m.encode("the movie was wonderful .", &synth.a.style);
  ASSERT_TRUE(seq.has_style_prefix);
  EXPECT_EQ(seq.ids[0], m.tag_id(synth.a.style));
  for (std::size_t i = 1; i < seq.ids.size(); ++i) {
    EXPECT_FALSE(m.specials.is_tag(seq.ids[i]));
  }
}

TEST(Encode, UnknownCharactersBecomeUnk) {
  const BpeModel m = train_bpe(tiny_task("abc abc", "bcd"), 10);
  const TokenSequence seq = m.encode("ab\xC3\xA9");  // é unseen
  int unks = 0;
  for (int id : seq.ids) unks += id == SpecialTokens::unk;
  EXPECT_EQ(unks, 1);
  const TokenSequence two = m.encode("\xC3\xA9\xC3\xA9");
  unks = 0;
  for (int id : two.ids) unks += id == SpecialTokens::unk;
  EXPECT_EQ(unks, 2);
}

TEST(Encode, EmptyTextFails) {
  const BpeModel m = train_bpe(tiny_task("a", "b"), 0);
  EXPECT_THROW(m.encode(""), std::invalid_argument);
  EXPECT_THROW(m.encode("   "), std::invalid_argument);
}

TEST(Decode, SpecialOnlySequenceIsEmpty) {
  const BpeModel m = train_bpe(tiny_task("a", "b"), 0);
  TokenSequence seq;
  seq.ids = {SpecialTokens::bos, m.tag_id(kPos), SpecialTokens::mask, SpecialTokens::pad,
             SpecialTokens::eos};
  EXPECT_EQ(m.decode(seq), "");
}

TEST(Decode, OutOfRangeIdFails) {
  const BpeModel m = train_bpe(tiny_task("a", "b"), 0);
  TokenSequence seq;
  seq.ids = {m.vocab_size()};
  EXPECT_THROW(m.decode(seq), std::out_of_range);
}

TEST(ModelFile, SaveLoadRoundTrip) {
  const SynthOutput synth = synth_generate(150, 31);
  const BpeModel m = train_bpe({synth.a, synth.b}, 200);
  const std::string path = testing::TempDir() + "bpe.model";
  m.save(path);
  const BpeModel back = BpeModel::load(path);
  EXPECT_EQ(back.merges, m.merges);
  EXPECT_EQ(back.id_to_token, m.id_to_token);
  ASSERT_EQ(back.styles.size(), 2u);
  EXPECT_EQ(back.styles[0], m.styles[0]);
  const std::string text = synth.a.sentences[5].text;
  EXPECT_EQ(back.encode(text, &kPos).ids, m.encode(text, &kPos).ids);
}

TEST(ModelFile, RejectsBadHeader) {
  const std::string path = testing::TempDir() + "bogus.model";
  {
    std::ofstream f(path, std::ios::binary);
    f << "something else v9\n";
  }
  EXPECT_THROW(BpeModel::load(path), std::runtime_error);
}

}  // namespace
