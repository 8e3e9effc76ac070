#include <gtest/gtest.h>

#include <cmath>

#include "strategem/fields.hpp"
#include "strategem/rng.hpp"

using namespace strategem;

namespace {

constexpr double kCx = 0.5, kCy = kSqrt3Over2 / 3.0;  // centroid

std::vector<CartesianPoint> sample_field(const SimplexLattice& lat, auto&& f) {
  std::vector<CartesianPoint> out;
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    out.push_back(f(lat.cartesian(nd.i, nd.j)));
  }
  return out;
}

double rms_error(const SimplexLattice& lat, const std::vector<CartesianPoint>& got,
                 const std::vector<CartesianPoint>& want) {
  double ss = 0;
  for (std::size_t r = 0; r < lat.size(); ++r) {
    ss += (got[r].x - want[r].x) * (got[r].x - want[r].x) + (got[r].y - want[r].y) * (got[r].y - want[r].y);
  }
  return std::sqrt(ss / static_cast<double>(lat.size()));
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(Ternary, VerticesAndRoundTrip) {
  const auto m = barycentric_to_cartesian({1, 0, 0});
  const auto g = barycentric_to_cartesian({0, 0, 1});
  const auto r = barycentric_to_cartesian({0, 1, 0});
  EXPECT_DOUBLE_EQ(m.x, 0.0);
  EXPECT_DOUBLE_EQ(g.x, 1.0);
  EXPECT_DOUBLE_EQ(r.x, 0.5);
  EXPECT_DOUBLE_EQ(r.y, std::sqrt(3.0) / 2);
  const SimplexPoint p{0.2, 0.3, 0.5};
  const auto back = cartesian_to_barycentric(barycentric_to_cartesian(p));
  EXPECT_NEAR(back.p_m, 0.2, 1e-15);
  EXPECT_NEAR(back.p_r, 0.3, 1e-15);
  EXPECT_NEAR(back.p_g, 0.5, 1e-15);
}

TEST(Ternary, RejectsPointsOutsideTheTriangle) {
  EXPECT_THROW(cartesian_to_barycentric({-0.01, 0.0}), ValidationError);
  EXPECT_THROW(cartesian_to_barycentric({0.5, 0.9}), ValidationError);
  EXPECT_NO_THROW(cartesian_to_barycentric({0.5, 0.0}));
  EXPECT_THROW(barycentric_to_cartesian({0.5, 0.6, 0.1}), ValidationError);
}

TEST(Ternary, TangentRoundTripSumsToZero) {
  const SimplexTangent t{-0.3, 0.1, 0.2};
  const auto back = cartesian_to_tangent(tangent_to_cartesian(t));
  EXPECT_NEAR(back.d_m, -0.3, 1e-15);
  EXPECT_NEAR(back.d_r, 0.1, 1e-15);
  EXPECT_NEAR(back.d_g, 0.2, 1e-15);
  EXPECT_NEAR(back.d_m + back.d_r + back.d_g, 0.0, 1e-15);
}

TEST(SimplexLattice, CountsIndexingAndBoundary) {
  const SimplexLattice lat(0.1);
  EXPECT_EQ(lat.divisions(), 10);
  EXPECT_EQ(lat.size(), 66u);
  std::size_t boundary = 0, vertices = 0;
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    EXPECT_EQ(lat.index(nd.i, nd.j), r);
    const auto p = lat.simplex(nd);
    EXPECT_NEAR(p.p_m + p.p_r + p.p_g, 1.0, 1e-15);
    boundary += lat.is_boundary(nd);
    vertices += lat.is_vertex(nd);
  }
  EXPECT_EQ(boundary, 30u);
  EXPECT_EQ(vertices, 3u);
  for (std::size_t k = 0; k < 6; ++k) {
    const auto d = SimplexLattice::direction(k);
    EXPECT_NEAR(std::hypot(d.x, d.y), 1.0, 1e-15);
  }
  EXPECT_THROW(SimplexLattice(0.3), ValidationError);
  EXPECT_THROW(SimplexLattice(0.0), ValidationError);
}

TEST(Idw, ExactAtSitesAndMatchesHandWeights) {
  const std::vector<CartesianPoint> sites{{0, 0}, {1, 0}, {0, 1}};
  const std::vector<double> values{1.0, 3.0, 5.0};
  EXPECT_DOUBLE_EQ(idw_at({1, 0}, sites, values, 1)[0], 3.0);
  // At (0.5, 0): squared distances 0.25, 0.25, 1.25; weights 4, 4, 0.8.
  const double want = (4 * 1.0 + 4 * 3.0 + 0.8 * 5.0) / 8.8;
  EXPECT_NEAR(idw_at({0.5, 0}, sites, values, 1)[0], want, 1e-15);
}

TEST(Idw, NeighbourLimitUsesNearestSitesOnly) {
  std::vector<CartesianPoint> sites;
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) {
    sites.push_back({static_cast<double>(i), 0});
    values.push_back(i < 2 ? 1.0 : 100.0);
  }
  IdwOptions two;
  two.neighbors = 2;
  EXPECT_NEAR(idw_at({0.5, 0}, sites, values, 1, two)[0], 1.0, 1e-15);
  IdwOptions all;
  all.neighbors = 0;
  EXPECT_GT(idw_at({0.5, 0}, sites, values, 1, all)[0], 1.0);
}

TEST(Idw, StaysWithinSampleRange) {
  Rng rng(2);
  std::vector<CartesianPoint> sites;
  std::vector<double> values;
  for (int i = 0; i < 40; ++i) {
    sites.push_back({rng.uniform(), rng.uniform()});
    values.push_back(rng.uniform() * 2 - 1);
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  for (int i = 0; i < 200; ++i) {
    const double v = idw_at({rng.uniform(), rng.uniform()}, sites, values, 1)[0];
    EXPECT_GE(v, *lo - 1e-15);
    EXPECT_LE(v, *hi + 1e-15);
  }
}

TEST(Projection, KeepsRotationAndRemovesSource) {
  const SimplexLattice lat(0.05);
  const auto rot = sample_field(lat, [](CartesianPoint p) { return CartesianPoint{-(p.y - kCy), p.x - kCx}; });
  const auto src = sample_field(lat, [](CartesianPoint p) { return CartesianPoint{p.x - kCx, p.y - kCy}; });
  const auto pr = project_divergence_free(lat, rot);
  EXPECT_TRUE(pr.converged);
  EXPECT_LT(rms_error(lat, pr.solenoidal, rot), 1e-9);
  const auto ps = project_divergence_free(lat, src);
  EXPECT_LT(rms_error(lat, ps.solenoidal, std::vector<CartesianPoint>(lat.size())), 1e-9);
  std::vector<CartesianPoint> mixed(lat.size());
  for (std::size_t r = 0; r < lat.size(); ++r) mixed[r] = {rot[r].x + 0.7 * src[r].x, rot[r].y + 0.7 * src[r].y};
  const auto pm = project_divergence_free(lat, mixed);
  EXPECT_LT(rms_error(lat, pm.solenoidal, rot), 1e-9);
  EXPECT_LT(max_abs(pm.divergence_residual), 1e-9);
}

TEST(Projection, OutputIsDiscretelyDivergenceFreeForRoughInput) {
  const SimplexLattice lat(0.04);
  Rng rng(13);
  std::vector<CartesianPoint> noise(lat.size());
  for (auto& v : noise) v = {rng.uniform() - 0.5, rng.uniform() - 0.5};
  const auto p = project_divergence_free(lat, noise);
  EXPECT_TRUE(p.converged);
  EXPECT_LT(max_abs(p.divergence_residual), 1e-9);
  EXPECT_GT(max_abs(p.input_divergence), 1.0);
}

TEST(Projection, SecondOrderAccurateForCubicStreamFunction) {
  // psi = x^3 - 3 x y^2, so w = (-psi_y, psi_x) = (6xy, 3x^2 - 3y^2) is divergence-free.
  auto err = [](double h) {
    const SimplexLattice lat(h);
    const auto w = sample_field(lat, [](CartesianPoint p) {
      return CartesianPoint{6 * p.x * p.y, 3 * p.x * p.x - 3 * p.y * p.y};
    });
    return rms_error(lat, project_divergence_free(lat, w).solenoidal, w);
  };
  const double coarse = err(0.05), fine = err(0.025);
  EXPECT_LT(fine, 2e-3);
  EXPECT_GT(coarse / fine, 3.0);
}

TEST(Projection, OrderingsAndThreadsAgree) {
  const SimplexLattice lat(0.05);
  Rng rng(21);
  std::vector<CartesianPoint> f(lat.size());
  for (auto& v : f) v = {rng.uniform(), rng.uniform()};
  ProjectionOptions lex;
  ProjectionOptions color;
  color.ordering = SweepOrdering::Multicolor;
  ProjectionOptions color4 = color;
  color4.threads = 4;
  const auto a = project_divergence_free(lat, f, lex);
  const auto b = project_divergence_free(lat, f, color);
  const auto c = project_divergence_free(lat, f, color4);
  EXPECT_LT(rms_error(lat, a.solenoidal, b.solenoidal), 1e-6);
  for (std::size_t r = 0; r < lat.size(); ++r) {
    EXPECT_EQ(b.stream[r], c.stream[r]);
    EXPECT_EQ(b.solenoidal[r].x, c.solenoidal[r].x);
  }
  EXPECT_EQ(b.iterations, c.iterations);
}

TEST(Projection, ReportsNonConvergence) {
  const SimplexLattice lat(0.05);
  std::vector<CartesianPoint> f(lat.size(), CartesianPoint{1.0, 0.3});
  for (std::size_t r = 0; r < lat.size(); r += 3) f[r] = {-1.0, 2.0};
  ProjectionOptions opt;
  opt.max_iterations = 2;
  const auto p = project_divergence_free(lat, f, opt);
  EXPECT_FALSE(p.converged);
  EXPECT_EQ(p.iterations, 2u);
  EXPECT_THROW(project_divergence_free(lat, std::vector<CartesianPoint>(3)), ValidationError);
}

TEST(FiniteDifferenceFlow, ExactForQuadraticPaths) {
  Trajectory t;
  t.question_id = "q";
  for (int i = 0; i <= 4; ++i) {
    const double th = i * 0.25;
    const double pm = 0.8 - 0.3 * th * th, pr = 0.1 + 0.2 * th;
    t.points.push_back({th, {pm, pr, 1 - pm - pr}});
  }
  const auto flow = finite_difference_flow(std::vector<Trajectory>{t});
  ASSERT_EQ(flow.size(), 5u);
  for (const auto& s : flow) {
    EXPECT_NEAR(s.velocity.d_m, -0.6 * s.theta, 1e-12);
    EXPECT_NEAR(s.velocity.d_r, 0.2, 1e-12);
    EXPECT_NEAR(s.velocity.d_m + s.velocity.d_r + s.velocity.d_g, 0.0, 1e-12);
  }
  t.points[2].first = 0.55;
  EXPECT_THROW(finite_difference_flow(std::vector<Trajectory>{t}), ValidationError);
}

TEST(Trajectories, GroupsCellsAndSkipsLowConfidence) {
  std::vector<CellEstimate> cells;
  auto cell = [](const std::string& q, double th, double pm, bool low = false) {
    CellEstimate c;
    c.question_id = q;
    c.theta = th;
    c.protocol = Protocol::Exclusive;
    c.low_confidence = low;
    StrategyEstimate e;
    e.mix = {pm, 0.5 - pm / 2, 0.5 - pm / 2};
    c.estimate = e;
    return c;
  };
  cells.push_back(cell("a", 0.5, 0.4));
  cells.push_back(cell("a", 0.0, 0.8));
  cells.push_back(cell("b", 0.0, 0.2));
  cells.push_back(cell("b", 0.5, 0.1, true));
  const auto t = trajectories(cells);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].question_id, "a");
  EXPECT_EQ(t[0].points.front().first, 0.0);
  EXPECT_DOUBLE_EQ(t[0].points.front().second.p_m, 0.8);
  EXPECT_THROW(trajectories(std::vector<CellEstimate>{cell("a", 0.0, 0.5)}), ValidationError);
}

TEST(InterpolateFlow, RecoversARotationFromScatteredSamples) {
  Rng rng(31);
  std::vector<FlowSample> samples;
  for (int i = 0; i < 300; ++i) {
    double a = rng.uniform(), b = rng.uniform();
    if (a + b > 1) a = 1 - a, b = 1 - b;
    const SimplexPoint p{1 - a - b, b, a};
    const auto xy = barycentric_to_cartesian(p);
    samples.push_back({"q", 0, p, cartesian_to_tangent({-(xy.y - kCy), xy.x - kCx})});
  }
  const auto f = interpolate_flow(samples, 0.05);
  EXPECT_LT(f.max_interior_residual(), 1e-9);
  double ss = 0;
  for (const auto& n : f.nodes) {
    const auto w = tangent_to_cartesian(n.projected);
    ss += std::pow(w.x + (n.xy.y - kCy), 2) + std::pow(w.y - (n.xy.x - kCx), 2);
  }
  EXPECT_LT(std::sqrt(ss / f.nodes.size()), 0.05);
  const std::vector<FlowSample> line{samples[0], samples[0], samples[0]};
  EXPECT_THROW(interpolate_flow(line, 0.05), ValidationError);
}

TEST(ScalarField, ExactAtSitesClippedAndRangeChecked) {
  const std::vector<ScalarSample> s{{{1, 0, 0}, 0.9}, {{0, 1, 0}, 0.2}, {{0, 0, 1}, 0.25}};
  const auto f = interpolate_scalar(s, ScalarKind::Accuracy, 0.1);
  EXPECT_NEAR(f.nodes.front().value, 0.9, 1e-15);  // node (0,0) is the M vertex
  for (const auto& n : f.nodes) {
    EXPECT_GE(n.value, 0.2 - 1e-15);
    EXPECT_LE(n.value, 0.9 + 1e-15);
  }
  EXPECT_NEAR(interpolate_scalar_at({0, 1, 0}, s, ScalarKind::Accuracy, 4), 0.2, 1e-15);
  const std::vector<ScalarSample> bad{{{1, 0, 0}, 2.5}};
  EXPECT_THROW(interpolate_scalar(bad, ScalarKind::Entropy, 0.1, 4), ValidationError);
  EXPECT_NO_THROW(interpolate_scalar(bad, ScalarKind::Entropy, 0.1, 8));
  EXPECT_DOUBLE_EQ(scalar_range(ScalarKind::Entropy, 4).second, 2.0);
}
