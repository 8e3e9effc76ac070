#include <gtest/gtest.h>

#include <random>

#include "strategem/pmm.hpp"
#include "support.hpp"

using namespace strategem;

TEST(EstimateStrategy, HandWorkedExample) {
  // k = 4, A_om = 0.8, A_other = 0.4: P_M = 0.4/0.75, P_R = 0.55/0.75 - P_M, P_G = rest.
  const auto e = estimate_strategy(0.8, 0.4, 4);
  EXPECT_NEAR(e.raw.p_m, 8.0 / 15, 1e-15);
  EXPECT_NEAR(e.raw.p_r, 1.0 / 5, 1e-15);
  EXPECT_NEAR(e.raw.p_g, 4.0 / 15, 1e-15);
  EXPECT_FALSE(e.clamped);
  EXPECT_FALSE(e.violation.any());
  EXPECT_EQ(e.mix, e.raw);
}

TEST(EstimateStrategy, InvertsTheForwardModelAcrossTheSimplex) {
  std::mt19937_64 gen(4);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (std::size_t k : {2u, 3u, 4u, 5u, 8u}) {
    for (int i = 0; i < 500; ++i) {
      const double a = g(gen), b = g(gen), c = g(gen), s = a + b + c;
      const StrategyMix truth{a / s, b / s, c / s};
      // Forward model written out directly.
      const double kd = static_cast<double>(k);
      const double a_om = truth.p_m + truth.p_r + truth.p_g / kd;
      const double a_other = truth.p_m / kd + truth.p_r + truth.p_g / kd;
      const auto e = estimate_strategy(a_om, a_other, k);
      EXPECT_NEAR(e.mix.p_m, truth.p_m, 1e-12);
      EXPECT_NEAR(e.mix.p_r, truth.p_r, 1e-12);
      EXPECT_NEAR(e.mix.p_g, truth.p_g, 1e-12);
      const auto fwd = expected_accuracies(truth, k);
      EXPECT_NEAR(fwd.a_om, a_om, 1e-15);
      EXPECT_NEAR(fwd.a_other, a_other, 1e-15);
    }
  }
}

TEST(EstimateStrategy, VertexInputsAreNotViolations) {
  const auto m = estimate_strategy(1.0, 0.25, 4);
  EXPECT_FALSE(m.clamped);
  EXPECT_NEAR(m.mix.p_m, 1.0, 1e-15);
  const auto r = estimate_strategy(1.0, 1.0, 4);
  EXPECT_FALSE(r.clamped);
  EXPECT_NEAR(r.mix.p_r, 1.0, 1e-15);
  const auto g = estimate_strategy(0.25, 0.25, 4);
  EXPECT_FALSE(g.clamped);
  EXPECT_NEAR(g.mix.p_g, 1.0, 1e-15);
}

TEST(EstimateStrategy, FlagsAndProjectsInfeasibleInputs) {
  // A_other > A_om gives negative P_M.
  const auto e = estimate_strategy(0.3, 0.6, 4);
  EXPECT_TRUE(e.clamped);
  EXPECT_TRUE(e.violation.p_m_out_of_range);
  EXPECT_TRUE(e.mix.on_simplex(1e-12));
  // Below-chance accuracy gives negative P_R and P_G > 1 bound issues.
  const auto low = estimate_strategy(0.05, 0.05, 4);
  EXPECT_TRUE(low.clamped);
  EXPECT_TRUE(low.violation.p_r_negative);
  EXPECT_NEAR(low.mix.p_g, 1.0, 1e-12);
  EXPECT_THROW(estimate_strategy(1.1, 0.2, 4), ValidationError);
  EXPECT_THROW(estimate_strategy(0.5, 0.2, 1), ValidationError);
}

TEST(ProjectToSimplex, MatchesClosedFormCases) {
  const auto p = project_to_simplex(std::array<double, 3>{-0.2, 0.7, 0.5});
  EXPECT_NEAR(p[0], 0.0, 1e-15);
  EXPECT_NEAR(p[1], 0.6, 1e-15);
  EXPECT_NEAR(p[2], 0.4, 1e-15);
  const auto q = project_to_simplex(std::array<double, 3>{2.0, 0.0, 0.0});
  EXPECT_NEAR(q[0], 1.0, 1e-15);
  const auto inside = project_to_simplex(std::array<double, 3>{0.2, 0.3, 0.5});
  EXPECT_NEAR(inside[1], 0.3, 1e-15);
}

TEST(ProjectToSimplex, IsTheNearestPointOnAGrid) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::array<double, 3> v{u(gen), u(gen), u(gen)};
    const auto p = project_to_simplex(v);
    const auto dist = [&](double a, double b, double c) {
      return (a - v[0]) * (a - v[0]) + (b - v[1]) * (b - v[1]) + (c - v[2]) * (c - v[2]);
    };
    const double best = dist(p[0], p[1], p[2]);
    const int n = 200;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        const double a = static_cast<double>(i) / n, b = static_cast<double>(j) / n;
        ASSERT_LE(best, dist(a, b, 1 - a - b) + 1e-12);
      }
    }
  }
}

TEST(EstimateQuestion, PoolsOtherPositions) {
  const auto acc = position_accuracy(fixtures::balanced_records("q", 4, 20, {16, 8, 8, 8}), 4);
  const auto e = estimate_question(acc, OptionPosition(0));
  EXPECT_DOUBLE_EQ(e.a_om, 0.8);
  EXPECT_DOUBLE_EQ(e.a_other, 0.4);
  EXPECT_EQ(e.question_id, "q");
  const auto off = estimate_question(acc, OptionPosition(2));
  EXPECT_DOUBLE_EQ(off.a_om, 0.4);
  EXPECT_NEAR(off.a_other, 32.0 / 60, 1e-15);
  EXPECT_TRUE(off.clamped);
}

TEST(ValidateQuestion, ZeroMisfitForConsistentData) {
  const auto acc = position_accuracy(fixtures::balanced_records("q", 4, 20, {16, 8, 8, 8}), 4);
  const auto e = estimate_question(acc, OptionPosition(0));
  const auto v = validate_question(e, acc);
  EXPECT_NEAR(v.alpha_observed, (0.8 + 3 * 0.4) / 4, 1e-15);
  EXPECT_NEAR(v.delta_alpha, 0.0, 1e-12);
  // A clamped estimate does not reproduce the data.
  const auto bad = estimate_question(acc, OptionPosition(1));
  EXPECT_GT(validate_question(bad, acc).delta_alpha, 0.01);
}

TEST(SelectMemorizedPosition, ArgmaxBreaksTiesLow) {
  const auto acc = position_accuracy(fixtures::balanced_records("q", 4, 10, {3, 7, 7, 1}), 4);
  EXPECT_EQ(select_memorized_position(acc, MemorizedPositionPolicy::OriginalPosition, OptionPosition(3)),
            OptionPosition(3));
  EXPECT_EQ(select_memorized_position(acc, MemorizedPositionPolicy::ArgmaxAccuracy, OptionPosition(3)),
            OptionPosition(1));
  EXPECT_EQ(parse_policy("argmax"), MemorizedPositionPolicy::ArgmaxAccuracy);
  EXPECT_THROW(parse_policy("mode"), ValidationError);
}

TEST(ThetaResolved, ConditionsOnRealizedPositionAndPoolsShortSides) {
  using fixtures::scored;
  std::vector<TrialLogRecord> recs;
  std::uint32_t rep = 0;
  // theta 0, exclusive, anchor A: all trials have Correct at A; other anchors supply A_other.
  for (int i = 0; i < 40; ++i) recs.push_back(scored("q", 4, 0, 0, 0.0, Protocol::Exclusive, 0, rep++));
  for (std::size_t a = 1; a < 4; ++a) {
    for (int i = 0; i < 40; ++i) recs.push_back(scored("q", 4, a, i < 20 ? a : 0, 0.0, Protocol::Exclusive, a, rep++));
  }
  // theta 1, anchor A: Correct never at A, so A_om comes from the other anchors' cells at theta 1.
  for (int i = 0; i < 60; ++i) {
    const std::size_t c = 1 + i % 3;
    recs.push_back(scored("q", 4, c, i < 30 ? c : 0, 1.0, Protocol::Exclusive, 0, rep++));
  }
  for (int i = 0; i < 30; ++i) recs.push_back(scored("q", 4, 0, 0, 1.0, Protocol::Exclusive, 1, rep++));

  const std::vector<double> grid{0.0, 1.0};
  const auto res = theta_resolved_estimates(recs, Protocol::Exclusive, OptionPosition(0), grid,
                                            [](const std::string&) { return OptionPosition(0); }, 4);
  ASSERT_EQ(res.cells.size(), 2u);
  const auto& c0 = res.cells[0];
  EXPECT_TRUE(c0.pooled);
  ASSERT_TRUE(c0.estimate);
  EXPECT_DOUBLE_EQ(c0.estimate->a_om, 1.0);
  EXPECT_DOUBLE_EQ(c0.estimate->a_other, 0.5);
  EXPECT_NEAR(c0.estimate->mix.p_m, 2.0 / 3, 1e-12);
  EXPECT_NEAR(c0.estimate->mix.p_r, 1.0 / 3, 1e-12);
  const auto& c1 = res.cells[1];
  EXPECT_TRUE(c1.pooled);
  ASSERT_TRUE(c1.estimate);
  EXPECT_DOUBLE_EQ(c1.estimate->a_om, 1.0);
  EXPECT_DOUBLE_EQ(c1.estimate->a_other, 0.5);
  ASSERT_EQ(res.curve.points.size(), 2u);
  EXPECT_EQ(res.curve.points[0].n_questions, 1u);
}
