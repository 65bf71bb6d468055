#include <gtest/gtest.h>

#include "forge/difficulty.hpp"
#include "forge/errors.hpp"

#include <random>

using namespace forge;
using forge::util::Rational;

namespace {

// Every vector in {1,2,3}^7, odometer order.
std::vector<std::array<int, 7>> all_vectors() {
  std::vector<std::array<int, 7>> out;
  std::array<int, 7> a{1, 1, 1, 1, 1, 1, 1};
  while (true) {
    out.push_back(a);
    std::size_t i = 0;
    while (i < 7 && a[i] == 3) a[i++] = 1;
    if (i == 7) break;
    ++a[i];
  }
  return out;
}

// Independent restatement of the three rules: count directly from the raw array.
std::set<int> brute_admissible(const std::array<int, 7>& a) {
  int n2 = 0, n3 = 0;
  for (int x : a) {
    if (x == 2) n2 += 1;
    if (x == 3) n3 += 1;
  }
  std::set<int> s;
  if (n2 <= 2 && n3 == 0) s.insert(1);
  if (n2 >= 2 && n3 <= 1) s.insert(2);
  if (n3 >= 2 && n2 >= 2) s.insert(3);
  return s;
}

} // namespace

TEST(Composition, ExhaustiveAgreementWithBruteForce) {
  const auto vs = all_vectors();
  ASSERT_EQ(vs.size(), 2187u);
  for (const auto& a : vs) {
    EXPECT_EQ(admissible_levels(DifficultyVector(a)), brute_admissible(a));
  }
}

TEST(Composition, AnyL3ExcludesLevelOne) {
  for (const auto& a : all_vectors()) {
    DifficultyVector v(a);
    if (v.count_at(3) > 0) EXPECT_FALSE(admissible_levels(v).contains(1));
  }
}

TEST(Composition, WeddingRefinedVectorMeetsLevelThree) {
  // jump_depth, jump_breadth, page_interaction, visual, info, reasoning, risk
  DifficultyVector v({3, 2, 2, 3, 2, 3, 2});
  EXPECT_TRUE(check_composition(Level(3), v));
  EXPECT_EQ(admissible_levels(v), (std::set<int>{3}));
}

TEST(Composition, WeddingDraftVectorAlsoMeetsLevelThree) {
  DifficultyVector v({3, 1, 2, 3, 2, 3, 2});
  EXPECT_TRUE(check_composition(Level(3), v));
}

TEST(Composition, RuleEdges) {
  EXPECT_TRUE(check_composition(Level(1), DifficultyVector::uniform(1)));
  EXPECT_FALSE(check_composition(Level(1), DifficultyVector({3, 1, 1, 1, 1, 1, 1})));
  EXPECT_FALSE(check_composition(Level(3), DifficultyVector({3, 2, 2, 2, 2, 2, 2})));
  EXPECT_EQ(admissible_levels(DifficultyVector::uniform(1)), (std::set<int>{1}));
  EXPECT_EQ(admissible_levels(DifficultyVector({2, 2, 1, 1, 1, 1, 1})), (std::set<int>{1, 2}));
  EXPECT_TRUE(admissible_levels(DifficultyVector::uniform(3)).empty());
}

TEST(Level, RejectsOutOfRange) {
  EXPECT_THROW(Level(0), Error);
  EXPECT_THROW(Level(4), Error);
  EXPECT_THROW(DifficultyVector({1, 1, 1, 1, 1, 1, 4}), Error);
}

TEST(Distribution, SingleAndPair) {
  auto t = dimension_distribution({DifficultyVector::uniform(1)});
  for (Dimension d : kAllDimensions) {
    EXPECT_EQ(t.at(d, 1).count, 1);
    EXPECT_EQ(t.at(d, 1).percent, "100.0");
  }
  t = dimension_distribution({DifficultyVector::uniform(1), DifficultyVector::uniform(3)});
  for (Dimension d : kAllDimensions) {
    EXPECT_EQ(t.at(d, 1).percent, "50.0");
    EXPECT_EQ(t.at(d, 2).count, 0);
    EXPECT_EQ(t.at(d, 3).percent, "50.0");
  }
  EXPECT_THROW(dimension_distribution({}), Error);
}

TEST(Distribution, RowSumsEqualCardinality) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> lv(1, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DifficultyVector> vs;
    const int n = 1 + trial * 3;
    for (int i = 0; i < n; ++i) {
      std::array<int, 7> a{};
      for (int& x : a) x = lv(rng);
      vs.emplace_back(a);
    }
    const auto t = dimension_distribution(vs);
    for (Dimension d : kAllDimensions) {
      EXPECT_EQ(t.at(d, 1).count + t.at(d, 2).count + t.at(d, 3).count, n);
    }
  }
}

TEST(AccuracyDrop, ReferenceRows) {
  PerDimensionAccuracy t;
  for (Dimension d : kAllDimensions) t[d] = {{1, Rational(50)}, {2, Rational(50)}, {3, Rational(50)}};
  t[Dimension::RiskFactor] = {{1, Rational::from_decimal("80.6")}, {3, Rational::from_decimal("23.1")}};
  t[Dimension::PageInteraction] = {{1, Rational::from_decimal("61.5")}, {3, Rational::from_decimal("3.0")}};
  const auto drops = accuracy_drop(t);
  EXPECT_EQ(drops.at(Dimension::RiskFactor).rendered, "57.5");
  EXPECT_EQ(drops.at(Dimension::PageInteraction).rendered, "58.5");
  EXPECT_EQ(drops.at(Dimension::JumpDepth).rendered, "0.0");
  EXPECT_EQ(drops.at(Dimension::JumpDepth).delta, Rational(0));
}

TEST(AccuracyDrop, MissingCellNamesDimension) {
  PerDimensionAccuracy t;
  for (Dimension d : kAllDimensions) t[d] = {{1, Rational(1)}, {3, Rational(1)}};
  t[Dimension::InfoComplexity].erase(3);
  try {
    accuracy_drop(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("info_complexity"), std::string::npos);
  }
}

TEST(AccuracyDrop, ExactReconstructionProperty) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> cnt(0, 300);
  std::uniform_int_distribution<int> tot(1, 300);
  for (int trial = 0; trial < 500; ++trial) {
    PerDimensionAccuracy t;
    for (Dimension d : kAllDimensions) {
      for (int l : {1, 3}) {
        const int n = tot(rng);
        t[d][l] = Rational::percent(cnt(rng) % (n + 1), n);
      }
    }
    const auto drops = accuracy_drop(t);
    for (Dimension d : kAllDimensions) {
      EXPECT_EQ(drops.at(d).delta + t[d][3], t[d][1]);
    }
  }
}

TEST(Serialization, RoundTripAndErrors) {
  DifficultyVector v({3, 2, 2, 3, 2, 3, 2});
  v.set_justification(Dimension::JumpDepth, "8 transitions");
  const auto j = to_json(v);
  EXPECT_TRUE(j.contains("reasoning_calc"));
  EXPECT_EQ(difficulty_from_json(j), v);

  auto missing = j;
  missing.erase("risk_factor");
  EXPECT_THROW(difficulty_from_json(missing), ParseError);
  auto bad = j;
  bad["risk_factor"] = 5;
  EXPECT_THROW(difficulty_from_json(bad), ParseError);
  auto unknown = j;
  unknown["speed"] = 1;
  EXPECT_THROW(difficulty_from_json(unknown), ParseError);
}

TEST(Rendering, HalfUpPercent) {
  EXPECT_EQ(util::percent_1dp(934, 1260), "74.1");
  EXPECT_EQ(util::percent_1dp(160, 180), "88.9");
  EXPECT_EQ(util::percent_1dp(1, 8), "12.5");
  EXPECT_EQ(Rational::from_decimal("52.55").render(1), "52.6");
  EXPECT_EQ(Rational(-1, 20).render(1), "-0.1");
  EXPECT_EQ(Rational(1, 3).render(3), "0.333");
}
