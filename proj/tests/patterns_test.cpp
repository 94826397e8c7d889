#include <gtest/gtest.h>

#include <random>
#include <set>

#include "rbp/patterns.hpp"

using namespace rbp;

TEST(ClassifyAbstract, Definitions) {
  EXPECT_EQ(classify_abstract({0, 1, 0}), AbstractPattern::ABA);
  EXPECT_EQ(classify_abstract({0, 1, 1}), AbstractPattern::ABB);
  EXPECT_EQ(classify_abstract({0, 1, 2}), AbstractPattern::ABC);
  EXPECT_EQ(classify_abstract({0, 0, 0}), AbstractPattern::AAA);
  EXPECT_EQ(classify_abstract({0, 0, 1}), AbstractPattern::AAB);
}

TEST(ClassifyAbstract, PatternsPartitionRandomTriples) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> tok(0, 4);
  for (int i = 0; i < 2000; ++i) {
    const Triple t{tok(rng), tok(rng), tok(rng)};
    // each pattern as a predicate over the eq relations, checked independently of classify_abstract
    const bool ab = t[0] == t[1], ac = t[0] == t[2], bc = t[1] == t[2];
    const std::array<bool, 5> holds{ab && bc, ab && !bc, !ab && ac, !ab && bc, !ab && !ac && !bc};
    int n = 0;
    for (bool h : holds) n += h;
    ASSERT_EQ(n, 1);
    const auto idx = static_cast<std::size_t>(std::find(holds.begin(), holds.end(), true) - holds.begin());
    EXPECT_EQ(classify_abstract(t), kAllPatterns[idx]);
  }
}

TEST(PatternNames, RoundTrip) {
  for (AbstractPattern p : kAllPatterns) EXPECT_EQ(parse_pattern(to_string(p)), p);
  EXPECT_THROW(parse_pattern("XYZ"), std::invalid_argument);
}

TEST(MatchesConcrete, WildcardsAndConstraints) {
  const std::size_t a = 0, b = 1, c = 2, d = 3, x = 7, y = 8;
  const ConcretePattern a_any{a, std::nullopt, std::nullopt};
  const ConcretePattern any_bc{std::nullopt, b, c};
  EXPECT_TRUE(matches_concrete(std::vector<std::size_t>{a, x, y}, a_any));
  EXPECT_TRUE(matches_concrete(std::vector<std::size_t>{d, b, c}, any_bc));
  EXPECT_FALSE(matches_concrete(std::vector<std::size_t>{b, x, y}, a_any));
  EXPECT_FALSE(matches_concrete(std::vector<std::size_t>{a, x}, a_any));
}

TEST(EnumerateTriples, SixLetterCounts) {
  std::vector<std::size_t> six{0, 1, 2, 3, 4, 5};
  EXPECT_EQ(enumerate_triples(six, AbstractPattern::ABA).size(), 30u);
  EXPECT_EQ(enumerate_triples(six, AbstractPattern::AAA).size(), 6u);
  EXPECT_EQ(enumerate_triples(six, AbstractPattern::ABC).size(), 120u);
}

TEST(EnumerateTriples, MatchesBruteForceForSmallVocabularies) {
  for (std::size_t k = 3; k <= 8; ++k) {
    std::vector<std::size_t> symbols;
    for (std::size_t i = 0; i < k; ++i) symbols.push_back(10 + 2 * i);  // non-contiguous indices
    for (AbstractPattern p : kAllPatterns) {
      std::set<Triple> brute;
      for (auto x : symbols)
        for (auto y : symbols)
          for (auto z : symbols)
            if (classify_abstract({x, y, z}) == p) brute.insert({x, y, z});
      const auto got = enumerate_triples(symbols, p);
      const std::set<Triple> unique(got.begin(), got.end());
      EXPECT_EQ(unique.size(), got.size()) << "duplicates for k=" << k << " " << to_string(p);
      EXPECT_EQ(unique, brute) << "k=" << k << " " << to_string(p);
    }
  }
}

TEST(EnumerateTriples, TooFewSymbolsNamesPattern) {
  std::vector<std::size_t> two{0, 1};
  try {
    enumerate_triples(two, AbstractPattern::ABC);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("ABC"), std::string::npos);
  }
  std::vector<std::size_t> one{0};
  EXPECT_THROW(enumerate_triples(one, AbstractPattern::ABA), std::invalid_argument);
  EXPECT_EQ(enumerate_triples(one, AbstractPattern::AAA).size(), 1u);
}
