#include <random>
#include <string>

#include <gtest/gtest.h>

#include "flin/text.hpp"

namespace text = flin::text;

TEST(Normalize, LowercasesAndCollapsesWhitespace) {
  EXPECT_EQ(text::normalize("  Let's   Go\t"), "let's go");
  EXPECT_EQ(text::normalize("7:00 PM"), "7:00 pm");
  EXPECT_EQ(text::normalize(""), "");
}

TEST(Normalize, ComposesToNfcAndLowercasesNonAscii) {
  EXPECT_EQ(text::normalize("Cafe\xCC\x81"), "caf\xC3\xA9");  // e + combining acute -> é
  EXPECT_EQ(text::normalize("\xC3\x89TOILE"), "\xC3\xA9toile");
}

TEST(Tokenize, SplitsPunctuationAndKeepsByteOffsets) {
  const std::string s = "Table at 7:00, please";
  const auto toks = text::tokenize(s);
  std::vector<std::string> texts;
  for (const auto& t : toks) {
    texts.push_back(t.text);
    EXPECT_EQ(text::normalize(s.substr(t.begin, t.end - t.begin)), t.text);
  }
  EXPECT_EQ(texts, (std::vector<std::string>{"table", "at", "7", ":", "00", ",", "please"}));
  EXPECT_EQ(toks[2].begin, 9u);
  EXPECT_EQ(toks[2].end, 10u);
}

TEST(Tokenize, EmptyAndBlankInputHaveNoTokens) {
  EXPECT_TRUE(text::tokenize("").empty());
  EXPECT_TRUE(text::tokenize(" \t ").empty());
}

TEST(Levenshtein, KnownDistances) {
  EXPECT_EQ(text::levenshtein(U"kitten", U"sitting"), 3u);
  EXPECT_EQ(text::levenshtein(U"", U"abc"), 3u);
  EXPECT_EQ(text::levenshtein(U"abc", U"abc"), 0u);
}

TEST(FuzzyRatio, Formula) {
  // lev("7 pm", "7:00 pm") = 3, max length 7
  EXPECT_DOUBLE_EQ(text::fuzzy_ratio("7 pm", "7:00 PM"), 1.0 - 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(text::fuzzy_ratio("", ""), 1.0);
  EXPECT_DOUBLE_EQ(text::fuzzy_ratio("abc", "xyz"), 0.0);
}

TEST(FuzzyRatio, CountsCodePointsNotBytes) {
  EXPECT_DOUBLE_EQ(text::fuzzy_ratio("caf\xC3\xA9", "cafe"), 0.75);
}

TEST(FuzzyRatio, IdentityAndSymmetryOnRandomStrings) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abc xyz:0123 PM";
  std::uniform_int_distribution<std::size_t> len(0, 12), ch(0, alphabet.size() - 1);
  auto draw = [&] {
    std::string s;
    for (std::size_t n = len(rng); n > 0; --n) s += alphabet[ch(rng)];
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    const std::string a = draw(), b = draw();
    EXPECT_DOUBLE_EQ(text::fuzzy_ratio(a, a), 1.0);
    EXPECT_DOUBLE_EQ(text::fuzzy_ratio(a, b), text::fuzzy_ratio(b, a));
    const double f = text::fuzzy_ratio(a, b);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

TEST(ValueMatch, FractionOfValueWordsInMention) {
  EXPECT_DOUBLE_EQ(text::value_match("at 7 pm", "7:00 PM"), 0.5);
  EXPECT_DOUBLE_EQ(text::value_match("me and my friend", "2 people"), 0.0);
  EXPECT_DOUBLE_EQ(text::value_match("2 people", "2 people"), 1.0);
}

TEST(ValueMatch, IsDirectional) {
  // value words {pm} all present in the mention; the reverse covers 1 of 3.
  EXPECT_DOUBLE_EQ(text::value_match("at 7 pm", "pm"), 1.0);
  EXPECT_DOUBLE_EQ(text::value_match("pm", "at 7 pm"), 1.0 / 3.0);
}

TEST(ValueMatch, UsesSetSemantics) {
  EXPECT_DOUBLE_EQ(text::value_match("pm", "pm pm 7"), 0.5);
}
