#include <gtest/gtest.h>

#include <set>

#include "strategem/core.hpp"
#include "strategem/hash.hpp"
#include "strategem/rng.hpp"
#include "support.hpp"

using namespace strategem;

TEST(OptionPosition, ParsesLettersCaseInsensitively) {
  EXPECT_EQ(OptionPosition::parse("C").index(), 2u);
  EXPECT_EQ(OptionPosition::parse("d").index(), 3u);
  EXPECT_EQ(OptionPosition(1).str(), "B");
  EXPECT_THROW(OptionPosition::parse("AB"), ValidationError);
  EXPECT_THROW(OptionPosition::parse("3"), ValidationError);
  EXPECT_THROW(OptionPosition(4).check(4), ValidationError);
  EXPECT_NO_THROW(OptionPosition(3).check(4));
}

TEST(ContentRole, RoundTripsThroughText) {
  EXPECT_TRUE(ContentRole::parse("C").is_correct());
  EXPECT_EQ(ContentRole::parse("D3"), ContentRole::distractor(3));
  EXPECT_EQ(ContentRole::distractor(12).str(), "D12");
  EXPECT_THROW(ContentRole::parse("D0"), ValidationError);
  EXPECT_THROW(ContentRole::parse("X1"), ValidationError);
  EXPECT_THROW(ContentRole::parse("D"), ValidationError);
}

TEST(Question, RejectsDuplicateContentAndWrongArity) {
  auto q = fixtures::make_question("q", 4);
  EXPECT_NO_THROW(q.validate(4));
  EXPECT_THROW(q.validate(5), ValidationError);
  q.distractor_contents[1] = q.correct_content;
  EXPECT_THROW(q.validate(4), ValidationError);
}

TEST(Dataset, RejectsDuplicateIdsAndEmptySets) {
  Dataset ds;
  EXPECT_THROW(ds.validate(), ValidationError);
  ds = fixtures::make_dataset(3, 4);
  EXPECT_NO_THROW(ds.validate());
  ds.questions[2].id = ds.questions[0].id;
  EXPECT_THROW(ds.validate(), ValidationError);
  EXPECT_THROW((void)ds.find("nope"), ValidationError);
}

TEST(Arrange, IsAPermutationWithCorrectAtRequestedSlot) {
  const auto q = fixtures::make_question("q", 5);
  Rng rng(7);
  for (std::size_t pos = 0; pos < 5; ++pos) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto a = arrange(q, OptionPosition(pos), rng);
      EXPECT_NO_THROW(a.validate());
      EXPECT_TRUE(role_of(a, OptionPosition(pos)).is_correct());
      std::set<std::size_t> codes;
      for (auto r : a.placement) codes.insert(r.code());
      EXPECT_EQ(codes.size(), 5u);
      for (std::size_t c = 1; c < 5; ++c) {
        EXPECT_EQ(role_of(a, position_of(a, ContentRole::distractor(c))), ContentRole::distractor(c));
      }
    }
  }
}

TEST(Arrange, DistractorOrderIsUniform) {
  // 3 distractors over 3 slots: each of the 6 orders should appear ~1/6 of the time.
  const auto q = fixtures::make_question("q", 4);
  Rng rng(11);
  std::map<std::vector<std::size_t>, int> freq;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const auto a = arrange(q, OptionPosition(0), rng);
    freq[std::vector<std::size_t>{a.placement[1].code(), a.placement[2].code(), a.placement[3].code()}]++;
  }
  ASSERT_EQ(freq.size(), 6u);
  const double sd = std::sqrt(n * (1.0 / 6) * (5.0 / 6));
  for (const auto& [_, c] : freq) EXPECT_NEAR(c, n / 6.0, 4.5 * sd);
}

TEST(Arrangement, ValidateCatchesBrokenPlacements) {
  auto a = fixtures::ordered_arrangement("q", 4, 2);
  EXPECT_NO_THROW(a.validate());
  a.placement[0] = ContentRole::distractor(2);
  EXPECT_THROW(a.validate(), ValidationError);
  a = fixtures::ordered_arrangement("q", 4, 2);
  a.correct_position = OptionPosition(1);
  EXPECT_THROW(a.validate(), ValidationError);
}

TEST(TrialLogRecord, ValidateChecksOutcomeConsistency) {
  auto r = fixtures::scored("q", 4, 1, 3);
  EXPECT_NO_THROW(r.validate());
  EXPECT_FALSE(r.correct());
  r.outcome->selected_role = ContentRole::correct();
  EXPECT_THROW(r.validate(), ValidationError);
  TrialLogRecord f;
  f.status = TrialStatus::ParseFailure;
  EXPECT_THROW(f.validate(), ValidationError);
  f.error = "no letter";
  EXPECT_NO_THROW(f.validate());
}

TEST(PositionDistribution, NormalizesCountsAndChecksProbabilities) {
  const std::vector<int> counts{1, 3, 0, 4};
  const auto d = PositionDistribution::from_counts(std::span<const int>(counts));
  EXPECT_DOUBLE_EQ(d[1], 0.375);
  EXPECT_DOUBLE_EQ(d[2], 0.0);
  EXPECT_THROW(PositionDistribution::from_probs({0.5, 0.6}), ValidationError);
  const std::vector<int> zeros{0, 0};
  EXPECT_THROW(PositionDistribution::from_counts(std::span<const int>(zeros)), ValidationError);
}

TEST(Rng, SameSeedSameStreamAndSplitsAreIndependent) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(42);
  const auto s1 = c.split("x"), s2 = c.split("y");
  EXPECT_NE(Rng(s1).next(), Rng(s2).next());
  EXPECT_EQ(c.next(), Rng(42).next());  // splitting does not advance
}

TEST(Rng, BelowIsUniformAndUniformIsInUnitInterval) {
  Rng rng(3);
  const int n = 70000;
  std::vector<int> hist(7, 0);
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++hist[v];
  }
  const double sd = std::sqrt(n * (1.0 / 7) * (6.0 / 7));
  for (int h : hist) EXPECT_NEAR(h, n / 7.0, 4.5 * sd);
  double mean = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  EXPECT_NEAR(mean / n, 0.5, 4.5 * std::sqrt(1.0 / 12 / n));
}

TEST(Hash, MatchesPublishedFnv1aVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(to_hex(0xabcULL), "0000000000000abc");
}
