#include <gtest/gtest.h>

#include <cmath>

#include "strategem/randomization.hpp"
#include "strategem/respondent.hpp"
#include "support.hpp"

using namespace strategem;

TEST(RenderPrompt, ListsOptionsInPlacementOrder) {
  const auto q = fixtures::make_question("q", 3);
  Arrangement a{"q", {ContentRole::distractor(2), ContentRole::correct(), ContentRole::distractor(1)}, OptionPosition(1)};
  const auto text = render_prompt(q, a);
  EXPECT_NE(text.find("A) q-wrong2\nB) q-right\nC) q-wrong1\n"), std::string::npos);
  EXPECT_NE(text.find("(A, B, or C)"), std::string::npos);
  EXPECT_THROW(render_prompt(q, a, "other-template"), ValidationError);
}

struct ParseCase {
  const char* text;
  std::optional<char> expected;
};

void PrintTo(const ParseCase& c, std::ostream* os) { *os << '"' << c.text << '"'; }

class ParseAnswer : public ::testing::TestWithParam<ParseCase> {};

TEST_P(ParseAnswer, ExtractsTheSelectedLetter) {
  const auto& c = GetParam();
  const auto got = parse_answer_letter(c.text, 4);
  if (c.expected) {
    ASSERT_TRUE(got.has_value()) << c.text;
    EXPECT_EQ(got->label(), *c.expected) << c.text;
  } else {
    EXPECT_FALSE(got.has_value()) << c.text << " -> " << (got ? got->label() : '-');
  }
}

INSTANTIATE_TEST_SUITE_P(
    Cases, ParseAnswer,
    ::testing::Values(ParseCase{"B", 'B'}, ParseCase{"c", 'C'}, ParseCase{"(D)", 'D'}, ParseCase{"B.", 'B'},
                      ParseCase{"The answer is C", 'C'}, ParseCase{"Answer: A", 'A'},
                      ParseCase{"A or B? The answer is B.", 'B'}, ParseCase{"I think it's a tough one: D", 'D'},
                      ParseCase{"E", std::nullopt}, ParseCase{"", std::nullopt}, ParseCase{"Both A and C", std::nullopt},
                      ParseCase{"BAD", std::nullopt}, ParseCase{"B\n", 'B'}, ParseCase{"**C**", 'C'},
                      ParseCase{"Final answer - A", 'A'}, ParseCase{"a", 'A'}));

namespace {

// Accuracy at the memorized slot and elsewhere, from the generative definition.
std::pair<double, double> model_accuracies(const SyntheticAgentSpec& s, std::size_t k) {
  const double kd = static_cast<double>(k);
  const double reason = s.mix.p_r * s.reasoning_success;
  const double guess = s.mix.p_g / kd;
  const double mem_other = s.variant == MemorizerVariant::StrictMemorizer ? 0.0 : s.mix.p_m / kd;
  return {s.mix.p_m + reason + guess, mem_other + reason + guess};
}

std::pair<double, double> simulate(const SyntheticAgentSpec& s, std::size_t k, int n, std::uint64_t seed) {
  const auto q = fixtures::make_question("q", k);
  Rng rng(seed);
  int hit_om = 0, n_om = 0, hit_other = 0, n_other = 0;
  for (int i = 0; i < n; ++i) {
    const auto pos = OptionPosition(static_cast<std::size_t>(rng.below(k)));
    const auto a = arrange(q, pos, rng);
    const auto out = synthetic_respond(s, a, rng);
    EXPECT_EQ(out.selected_role, role_of(a, out.selected_position));
    if (pos == s.o_m) {
      ++n_om;
      hit_om += out.selected_role.is_correct();
    } else {
      ++n_other;
      hit_other += out.selected_role.is_correct();
    }
  }
  return {static_cast<double>(hit_om) / n_om, static_cast<double>(hit_other) / n_other};
}

}  // namespace

TEST(SyntheticRespond, AccuracyMatchesGenerativeModel) {
  const int n = 80000;
  std::vector<SyntheticAgentSpec> specs;
  specs.push_back({{0.5, 0.3, 0.2}, OptionPosition(1), MemorizerVariant::FallbackGuess, 1.0, {}, {}});
  specs.push_back({{0.5, 0.3, 0.2}, OptionPosition(1), MemorizerVariant::StrictMemorizer, 1.0, {}, {}});
  specs.push_back({{0.1, 0.6, 0.3}, OptionPosition(0), MemorizerVariant::FallbackGuess, 0.7, {}, {}});
  specs.push_back({{0.0, 0.0, 1.0}, OptionPosition(2), MemorizerVariant::FallbackGuess, 1.0, {}, {}});
  std::uint64_t seed = 100;
  for (const auto& s : specs) {
    const auto [om, other] = model_accuracies(s, 4);
    const auto [om_hat, other_hat] = simulate(s, 4, n, ++seed);
    EXPECT_NEAR(om_hat, om, 4.5 * std::sqrt(om * (1 - om) / (n / 4.0)) + 1e-9);
    EXPECT_NEAR(other_hat, other, 4.5 * std::sqrt(other * (1 - other) / (n * 0.75)) + 1e-9);
  }
}

TEST(SyntheticRespond, GuessWeightsShapeSelections) {
  SyntheticAgentSpec s{{0, 0, 1}, OptionPosition(0), MemorizerVariant::FallbackGuess, 1.0, {0.4, 0.3, 0.2, 0.1}, {}};
  const auto q = fixtures::make_question("q", 4);
  Rng rng(8);
  std::vector<int> hist(4, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const auto a = arrange(q, OptionPosition(static_cast<std::size_t>(rng.below(4))), rng);
    ++hist[synthetic_respond(s, a, rng).selected_position.index()];
  }
  for (std::size_t o = 0; o < 4; ++o) {
    const double p = s.guess_weights[o];
    EXPECT_NEAR(hist[o], n * p, 4.5 * std::sqrt(n * p * (1 - p)));
  }
}

TEST(SyntheticRespond, DriftingAgentInterpolatesMix) {
  SyntheticAgentSpec s{{1, 0, 0}, OptionPosition(0), MemorizerVariant::FallbackGuess, 1.0, {}, StrategyMix{0, 1, 0}};
  const auto m = s.mix_at(0.25);
  EXPECT_DOUBLE_EQ(m.p_m, 0.75);
  EXPECT_DOUBLE_EQ(m.p_r, 0.25);
  EXPECT_DOUBLE_EQ(m.p_g, 0.0);
}

TEST(SyntheticAgentSpec, ValidationRejectsBadParameters) {
  SyntheticAgentSpec s;
  EXPECT_NO_THROW(s.validate(4));
  s.mix = {0.5, 0.5, 0.1};
  EXPECT_THROW(s.validate(4), ValidationError);
  s = SyntheticAgentSpec{};
  s.o_m = OptionPosition(4);
  EXPECT_THROW(s.validate(4), ValidationError);
  s = SyntheticAgentSpec{};
  s.reasoning_success = 1.2;
  EXPECT_THROW(s.validate(4), ValidationError);
  s = SyntheticAgentSpec{};
  s.guess_weights = {0.5, 0.5};
  EXPECT_THROW(s.validate(4), ValidationError);
}

TEST(SyntheticRespondent, ResultDependsOnlyOnTrialSeed) {
  const auto ds = fixtures::make_dataset(2, 4);
  SyntheticRespondent r(SyntheticAgentSpec{{0.2, 0.3, 0.5}, OptionPosition(0), MemorizerVariant::FallbackGuess, 0.9, {}, {}});
  BalancedDesignConfig cfg{5, 1};
  const auto plan = build_balanced_plan(ds, cfg);
  std::vector<TrialOutcome> forward, backward(plan.size());
  for (const auto& t : plan) forward.push_back(r.respond(t, ds.find(t.question_id)));
  for (std::size_t i = plan.size(); i-- > 0;) backward[i] = r.respond(plan[i], ds.find(plan[i].question_id));
  EXPECT_EQ(forward, backward);
  for (std::size_t i = 0; i < plan.size(); ++i) EXPECT_EQ(forward[i].trial_id, plan[i].trial_id);
}

TEST(SyntheticRespondent, PerQuestionSpecsOverrideDefault) {
  SyntheticRespondent r;
  EXPECT_THROW((void)r.spec_for("x"), ValidationError);
  r.set("x", SyntheticAgentSpec{{1, 0, 0}, OptionPosition(3), MemorizerVariant::StrictMemorizer, 1.0, {}, {}});
  r.set_default(SyntheticAgentSpec{});
  EXPECT_EQ(r.spec_for("x").o_m, OptionPosition(3));
  EXPECT_EQ(r.spec_for("y").o_m, OptionPosition(0));
}
