#ifndef STRATEGEM_FIELDS_HPP
#define STRATEGEM_FIELDS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/pmm.hpp"

namespace strategem {

inline constexpr double kSqrt3Over2 = 0.86602540378443864676;

struct SimplexPoint {
  double p_m = 0.0;
  double p_r = 0.0;
  double p_g = 0.0;

  void validate(double tol = 1e-9) const {
    if (p_m < -tol || p_r < -tol || p_g < -tol || std::abs(p_m + p_r + p_g - 1.0) > tol) {
      throw ValidationError("point is not on the strategy simplex");
    }
  }
  static SimplexPoint from(const StrategyMix& m) { return {m.p_m, m.p_r, m.p_g}; }
};

struct CartesianPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Ternary layout: M = (0,0), G = (1,0), R = (1/2, sqrt(3)/2).
inline CartesianPoint barycentric_to_cartesian(const SimplexPoint& p) {
  p.validate();
  return {p.p_g + 0.5 * p.p_r, kSqrt3Over2 * p.p_r};
}

/// Inverse of barycentric_to_cartesian. Points outside the triangle (beyond a
/// 1e-12 slack) are rejected with their signed distances to the three edges.
inline SimplexPoint cartesian_to_barycentric(const CartesianPoint& c) {
  const double p_r = c.y / kSqrt3Over2;
  const double p_g = c.x - 0.5 * p_r;
  const double p_m = 1.0 - p_r - p_g;
  constexpr double slack = 1e-12;
  if (p_m < -slack || p_r < -slack || p_g < -slack) {
    throw ValidationError("point (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                          ") lies outside the simplex; signed distances to edges opposite M,R,G: " +
                          std::to_string(p_m * kSqrt3Over2) + ", " + std::to_string(p_r * kSqrt3Over2) + ", " +
                          std::to_string(p_g * kSqrt3Over2));
  }
  return {p_m, p_r, p_g};
}

/// Tangent vector on the simplex (components sum to 0).
struct SimplexTangent {
  double d_m = 0.0;
  double d_r = 0.0;
  double d_g = 0.0;
};

inline CartesianPoint tangent_to_cartesian(const SimplexTangent& t) {
  return {t.d_g + 0.5 * t.d_r, kSqrt3Over2 * t.d_r};
}

inline SimplexTangent cartesian_to_tangent(const CartesianPoint& v) {
  const double d_r = v.y / kSqrt3Over2;
  const double d_g = v.x - 0.5 * d_r;
  return {-d_r - d_g, d_r, d_g};
}

// ---------------------------------------------------------------------------
// Lattice

/// Barycentric lattice with spacing h = 1/n. Node (i, j) has p_g = i h,
/// p_r = j h; in the plane it is a triangular lattice with six neighbours at
/// distance h.
class SimplexLattice {
 public:
  struct Node {
    int i = 0;
    int j = 0;
  };

  static constexpr std::array<std::array<int, 2>, 6> kOffsets{
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}}};

  explicit SimplexLattice(double h) {
    if (!(h > 0.0 && h <= 0.5)) throw ValidationError("grid spacing must lie in (0, 0.5]");
    const double n = std::round(1.0 / h);
    if (std::abs(n * h - 1.0) > 1e-9) throw ValidationError("grid spacing must divide 1 evenly");
    n_ = static_cast<int>(n);
    h_ = 1.0 / n;
    for (int j = 0; j <= n_; ++j) {
      for (int i = 0; i + j <= n_; ++i) nodes_.push_back({i, j});
    }
  }

  int divisions() const noexcept { return n_; }
  double spacing() const noexcept { return h_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t idx) const { return nodes_.at(idx); }

  bool contains(int i, int j) const noexcept { return i >= 0 && j >= 0 && i + j <= n_; }
  std::size_t index(int i, int j) const {
    // Row j holds n - j + 1 nodes and starts after rows 0..j-1.
    return static_cast<std::size_t>(j * (n_ + 1) - j * (j - 1) / 2 + i);
  }
  bool is_boundary(const Node& nd) const noexcept { return nd.i == 0 || nd.j == 0 || nd.i + nd.j == n_; }
  bool is_vertex(const Node& nd) const noexcept {
    return (nd.i == 0 && nd.j == 0) || (nd.i == n_ && nd.j == 0) || (nd.i == 0 && nd.j == n_);
  }

  CartesianPoint cartesian(int i, int j) const { return {h_ * (i + 0.5 * j), h_ * kSqrt3Over2 * j}; }
  SimplexPoint simplex(const Node& nd) const {
    // Integer arithmetic keeps vertices and edges exact.
    return {static_cast<double>(n_ - nd.i - nd.j) / n_, static_cast<double>(nd.j) / n_,
            static_cast<double>(nd.i) / n_};
  }

  static CartesianPoint direction(std::size_t k) {
    const auto& o = kOffsets[k];
    return {o[0] + 0.5 * o[1], kSqrt3Over2 * o[1]};
  }

 private:
  int n_ = 0;
  double h_ = 0.0;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Inverse-distance weighting

struct IdwOptions {
  double power = 2.0;
  /// Nearest sites used per query; 0 uses every site.
  std::size_t neighbors = 12;
  /// Sites closer than this to a query are returned exactly.
  double coincidence = 1e-12;
};

/// IDW of `values` (one row of `dim` components per site) at `q`.
inline std::vector<double> idw_at(CartesianPoint q, std::span<const CartesianPoint> sites,
                                  std::span<const double> values, std::size_t dim, IdwOptions opt = {}) {
  std::vector<std::pair<double, std::size_t>> dist(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) dist[s] = {std::hypot(q.x - sites[s].x, q.y - sites[s].y), s};
  std::size_t use = dist.size();
  if (opt.neighbors > 0 && opt.neighbors < use) {
    use = opt.neighbors;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(use), dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(use));
  }

  std::vector<double> acc(dim, 0.0), exact(dim, 0.0);
  double wsum = 0.0;
  std::size_t n_exact = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const auto [d, s] = dist[i];
    if (d < opt.coincidence) {
      ++n_exact;
      for (std::size_t c = 0; c < dim; ++c) exact[c] += values[s * dim + c];
      continue;
    }
    if (i >= use) continue;
    const double w = 1.0 / std::pow(d, opt.power);
    wsum += w;
    for (std::size_t c = 0; c < dim; ++c) acc[c] += w * values[s * dim + c];
  }
  if (n_exact > 0) {
    for (auto& e : exact) e /= static_cast<double>(n_exact);
    return exact;
  }
  for (auto& a : acc) a /= wsum;
  return acc;
}

// ---------------------------------------------------------------------------
// Divergence-free projection

enum class SweepOrdering { Lexicographic, Multicolor };

struct ProjectionOptions {
  double tolerance = 1e-8;
  std::uint32_t max_iterations = 10000;
  /// 1 gives plain Gauss-Seidel; 0 picks the near-optimal SOR factor for the grid.
  double relaxation = 0.0;
  SweepOrdering ordering = SweepOrdering::Lexicographic;
  /// Worker threads for the multicolor ordering.
  unsigned threads = 1;
};

struct ProjectionResult {
  std::vector<CartesianPoint> solenoidal;  // per lattice node
  std::vector<double> stream;              // per lattice node
  std::vector<double> divergence_residual; // div_h of the output, per node
  std::vector<double> input_divergence;    // div_h of the input, per node (interior only; 0 on boundary)
  std::uint32_t iterations = 0;
  double poisson_residual = 0.0;
  bool converged = false;
};

namespace detail {

/// Stream function on the lattice plus two ghost layers, with ghost values
/// extrapolated by local quadratic least squares from the real nodes.
class ExtendedLattice {
 public:
  explicit ExtendedLattice(const SimplexLattice& lat) : lat_(lat), n_(lat.divisions()) {
    width_ = n_ + 1 + 2 * kPad;
    slot_.assign(static_cast<std::size_t>(width_ * width_), -1);
    for (std::size_t r = 0; r < lat.size(); ++r) slot_[key(lat.node(r).i, lat.node(r).j)] = static_cast<int>(r);

    // Ghost layers by adjacency.
    std::vector<std::array<int, 2>> frontier;
    for (std::size_t r = 0; r < lat.size(); ++r) frontier.push_back({lat.node(r).i, lat.node(r).j});
    for (int layer = 0; layer < 2; ++layer) {
      std::vector<std::array<int, 2>> next;
      for (const auto& [i, j] : frontier) {
        for (const auto& o : SimplexLattice::kOffsets) {
          const int a = i + o[0], b = j + o[1];
          if (slot_[key(a, b)] != -1) continue;
          slot_[key(a, b)] = static_cast<int>(lat.size() + ghosts_.size());
          ghosts_.push_back({a, b});
          next.push_back({a, b});
        }
      }
      frontier = std::move(next);
    }
    build_ghost_stencils();
  }

  std::size_t total() const noexcept { return lat_.size() + ghosts_.size(); }
  int slot(int i, int j) const { return slot_[key(i, j)]; }

  /// Fill ghost entries of `values` (sized total()) from the real entries.
  void extrapolate(std::vector<double>& values) const {
    for (std::size_t g = 0; g < ghosts_.size(); ++g) {
      double v = 0.0;
      for (const auto& [donor, w] : stencils_[g]) v += w * values[donor];
      values[lat_.size() + g] = v;
    }
  }

  /// Central six-point gradient at (i, j); neighbours must exist.
  CartesianPoint gradient(const std::vector<double>& values, int i, int j) const {
    CartesianPoint g{0.0, 0.0};
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& o = SimplexLattice::kOffsets[k];
      const double v = values[static_cast<std::size_t>(slot(i + o[0], j + o[1]))];
      const auto e = SimplexLattice::direction(k);
      g.x += v * e.x;
      g.y += v * e.y;
    }
    const double s = 1.0 / (3.0 * lat_.spacing());
    return {g.x * s, g.y * s};
  }

 private:
  static constexpr int kPad = 3;

  std::size_t key(int i, int j) const {
    return static_cast<std::size_t>((j + kPad) * width_ + (i + kPad));
  }

  void build_ghost_stencils() {
    constexpr std::size_t kDonors = 12;
    const double h = lat_.spacing();
    stencils_.resize(ghosts_.size());
    std::vector<std::pair<double, std::size_t>> dist(lat_.size());
    for (std::size_t g = 0; g < ghosts_.size(); ++g) {
      const auto q = lat_.cartesian(ghosts_[g][0], ghosts_[g][1]);
      for (std::size_t r = 0; r < lat_.size(); ++r) {
        const auto p = lat_.cartesian(lat_.node(r).i, lat_.node(r).j);
        dist[r] = {std::hypot(p.x - q.x, p.y - q.y), r};
      }
      const std::size_t m = std::min(kDonors, dist.size());
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m), dist.end());
      Eigen::MatrixXd a(static_cast<Eigen::Index>(m), 6);
      for (std::size_t r = 0; r < m; ++r) {
        const auto nd = lat_.node(dist[r].second);
        const auto p = lat_.cartesian(nd.i, nd.j);
        const double dx = (p.x - q.x) / h, dy = (p.y - q.y) / h;
        a.row(static_cast<Eigen::Index>(r)) << 1.0, dx, dy, dx * dx, dx * dy, dy * dy;
      }
      // Row 0 of the pseudo-inverse gives the fitted value at the ghost.
      const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
      for (std::size_t r = 0; r < m; ++r) {
        stencils_[g].emplace_back(dist[r].second, pinv(0, static_cast<Eigen::Index>(r)));
      }
    }
  }

  const SimplexLattice& lat_;
  int n_;
  int width_ = 0;
  std::vector<int> slot_;
  std::vector<std::array<int, 2>> ghosts_;
  std::vector<std::vector<std::pair<std::size_t, double>>> stencils_;
};

inline double sor_factor(int n) {
  constexpr double pi = 3.14159265358979323846;
  return 2.0 / (1.0 + std::sin(pi / n));
}

}  // namespace detail

/// Remove the irrotational part of a lattice vector field.
///
/// Solves Laplacian(psi) = curl(v) on interior nodes with Dirichlet data from
/// the boundary flux of v (its mean removed, so the data closes around the
/// loop) and returns w = (-d psi/dy, d psi/dx). With central differences the
/// discrete divergence of w vanishes identically. Fields whose curl is zero
/// and whose boundary flux is uniform (a source about the centroid) map to
/// zero; divergence-free fields with matching boundary flux are unchanged.
inline ProjectionResult project_divergence_free(const SimplexLattice& lat, std::span<const CartesianPoint> field,
                                                ProjectionOptions opt = {}) {
  if (field.size() != lat.size()) throw ValidationError("field size does not match lattice");
  const int n = lat.divisions();
  const double h = lat.spacing();
  detail::ExtendedLattice ext(lat);

  // Interior curl and divergence of the input.
  std::vector<double> curl(lat.size(), 0.0);
  ProjectionResult res;
  res.input_divergence.assign(lat.size(), 0.0);
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    if (lat.is_boundary(nd)) continue;
    double c = 0.0, d = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& o = SimplexLattice::kOffsets[k];
      const auto& v = field[lat.index(nd.i + o[0], nd.j + o[1])];
      const auto e = SimplexLattice::direction(k);
      c += e.x * v.y - e.y * v.x;
      d += e.x * v.x + e.y * v.y;
    }
    curl[r] = c / (3.0 * h);
    res.input_divergence[r] = d / (3.0 * h);
  }

  // Boundary loop M -> G -> R -> M with outward normals.
  struct Step {
    int i, j;
    CartesianPoint normal;
  };
  std::vector<std::pair<Step, Step>> segments;
  const CartesianPoint n_bottom{0.0, -1.0}, n_hyp{kSqrt3Over2, 0.5}, n_left{-kSqrt3Over2, 0.5};
  for (int s = 0; s < n; ++s) segments.push_back({{s, 0, n_bottom}, {s + 1, 0, n_bottom}});
  for (int s = 0; s < n; ++s) segments.push_back({{n - s, s, n_hyp}, {n - s - 1, s + 1, n_hyp}});
  for (int s = 0; s < n; ++s) segments.push_back({{0, n - s, n_left}, {0, n - s - 1, n_left}});
  auto flux = [&](const Step& st) {
    const auto& v = field[lat.index(st.i, st.j)];
    return v.x * st.normal.x + v.y * st.normal.y;
  };
  std::vector<double> seg_flux;
  double total_flux = 0.0;
  for (const auto& [a, b] : segments) {
    seg_flux.push_back(0.5 * (flux(a) + flux(b)) * h);
    total_flux += seg_flux.back();
  }
  const double mean_flux = total_flux / static_cast<double>(segments.size());

  std::vector<double> psi(ext.total(), 0.0);
  std::vector<bool> fixed(lat.size(), false);
  double acc = 0.0;
  psi[lat.index(0, 0)] = 0.0;
  fixed[lat.index(0, 0)] = true;
  for (std::size_t s = 0; s + 1 < segments.size(); ++s) {
    acc -= seg_flux[s] - mean_flux;
    const auto& b = segments[s].second;
    psi[lat.index(b.i, b.j)] = acc;
    fixed[lat.index(b.i, b.j)] = true;
  }

  // SOR on interior nodes.
  std::vector<std::size_t> interior;
  for (std::size_t r = 0; r < lat.size(); ++r) {
    if (!fixed[r]) interior.push_back(r);
  }
  const double omega = opt.relaxation > 0.0 ? opt.relaxation : detail::sor_factor(n);
  const double h2 = 1.5 * h * h;  // (3/2) h^2
  auto relax = [&](std::size_t r) {
    const auto nd = lat.node(r);
    double s = 0.0;
    for (const auto& o : SimplexLattice::kOffsets) s += psi[lat.index(nd.i + o[0], nd.j + o[1])];
    const double target = (s - h2 * curl[r]) / 6.0;
    psi[r] += omega * (target - psi[r]);
  };
  auto residual = [&]() {
    double worst = 0.0;
    for (auto r : interior) {
      const auto nd = lat.node(r);
      double s = 0.0;
      for (const auto& o : SimplexLattice::kOffsets) s += psi[lat.index(nd.i + o[0], nd.j + o[1])];
      worst = std::max(worst, std::abs((s - 6.0 * psi[r]) / h2 - curl[r]));
    }
    return worst;
  };

  std::array<std::vector<std::size_t>, 3> colors;
  for (auto r : interior) {
    const auto nd = lat.node(r);
    colors[static_cast<std::size_t>(((nd.i - nd.j) % 3 + 3) % 3)].push_back(r);
  }
  auto sweep_color = [&](const std::vector<std::size_t>& nodes) {
    const unsigned workers = std::max(1u, opt.threads);
    if (workers == 1 || nodes.size() < 64) {
      for (auto r : nodes) relax(r);
      return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (nodes.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(nodes.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t x = lo; x < hi; ++x) relax(nodes[x]);
      });
    }
    for (auto& t : pool) t.join();
  };

  res.poisson_residual = residual();
  while (res.poisson_residual > opt.tolerance && res.iterations < opt.max_iterations) {
    if (opt.ordering == SweepOrdering::Lexicographic) {
      for (auto r : interior) relax(r);
    } else {
      for (const auto& c : colors) sweep_color(c);
    }
    ++res.iterations;
    if (res.iterations % 8 == 0 || res.iterations == opt.max_iterations) res.poisson_residual = residual();
  }
  res.poisson_residual = residual();
  res.converged = res.poisson_residual <= opt.tolerance;

  ext.extrapolate(psi);

  // w = perp-grad(psi) on real nodes and the first ghost layer, then div_h(w).
  std::vector<double> wx(ext.total(), 0.0), wy(ext.total(), 0.0);
  std::vector<bool> has_w(ext.total(), false);
  auto compute_w = [&](int i, int j) {
    const int s = ext.slot(i, j);
    if (s < 0 || has_w[static_cast<std::size_t>(s)]) return;
    const auto g = ext.gradient(psi, i, j);
    wx[static_cast<std::size_t>(s)] = -g.y;
    wy[static_cast<std::size_t>(s)] = g.x;
    has_w[static_cast<std::size_t>(s)] = true;
  };
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    compute_w(nd.i, nd.j);
    for (const auto& o : SimplexLattice::kOffsets) compute_w(nd.i + o[0], nd.j + o[1]);
  }

  res.stream.assign(psi.begin(), psi.begin() + static_cast<std::ptrdiff_t>(lat.size()));
  res.solenoidal.resize(lat.size());
  res.divergence_residual.assign(lat.size(), 0.0);
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    res.solenoidal[r] = {wx[r], wy[r]};
    double d = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& o = SimplexLattice::kOffsets[k];
      const auto s = static_cast<std::size_t>(ext.slot(nd.i + o[0], nd.j + o[1]));
      const auto e = SimplexLattice::direction(k);
      d += e.x * wx[s] + e.y * wy[s];
    }
    res.divergence_residual[r] = d / (3.0 * h);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Trajectories and flow

struct Trajectory {
  std::string question_id;
  Protocol protocol = Protocol::Static;
  OptionPosition anchor;
  std::vector<std::pair<double, SimplexPoint>> points;  // theta ascending
};

/// Group clamped per-cell estimates into theta-ordered polylines per
/// (question, protocol, anchor). Cells without an estimate or flagged
/// low-confidence are skipped; polylines with fewer than two points are dropped.
inline std::vector<Trajectory> trajectories(std::span<const CellEstimate> cells) {
  std::map<std::tuple<std::string, Protocol, OptionPosition>, std::map<double, SimplexPoint>> grouped;
  std::vector<std::tuple<std::string, Protocol, OptionPosition>> order;
  std::map<double, bool> thetas;
  for (const auto& c : cells) {
    if (!c.estimate || c.low_confidence) continue;
    const auto key = std::make_tuple(c.question_id, c.protocol, c.anchor);
    if (!grouped.count(key)) order.push_back(key);
    grouped[key][c.theta] = SimplexPoint::from(c.estimate->mix);
    thetas[c.theta] = true;
  }
  if (thetas.size() < 2) throw ValidationError("trajectories need estimates at two or more theta values");
  std::vector<Trajectory> out;
  for (const auto& key : order) {
    const auto& pts = grouped.at(key);
    if (pts.size() < 2) continue;
    Trajectory t{std::get<0>(key), std::get<1>(key), std::get<2>(key), {}};
    for (const auto& [theta, p] : pts) t.points.emplace_back(theta, p);
    out.push_back(std::move(t));
  }
  return out;
}

/// A scattered tangent sample dP/dtheta located at P.
struct FlowSample {
  std::string question_id;
  double theta = 0.0;
  SimplexPoint at;
  SimplexTangent velocity;
};

/// dP/dtheta per trajectory point: central differences inside, second-order
/// one-sided at the ends (first-order for two-point polylines).
inline std::vector<FlowSample> finite_difference_flow(std::span<const Trajectory> trajs) {
  std::vector<FlowSample> out;
  for (const auto& t : trajs) {
    const auto& p = t.points;
    if (p.size() < 2) throw ValidationError("trajectory for '" + t.question_id + "' has a single theta");
    const double d = p[1].first - p[0].first;
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (std::abs((p[i].first - p[i - 1].first) - d) > 1e-9) {
        throw ValidationError("trajectory for '" + t.question_id + "' has a non-uniform theta grid");
      }
    }
    auto diff = [&](std::size_t i) -> SimplexTangent {
      auto comb = [&](double a, std::size_t ia, double b, std::size_t ib, double c, std::size_t ic, double scale) {
        const auto& A = p[ia].second;
        const auto& B = p[ib].second;
        const auto& C = p[ic].second;
        return SimplexTangent{(a * A.p_m + b * B.p_m + c * C.p_m) / scale, (a * A.p_r + b * B.p_r + c * C.p_r) / scale,
                              (a * A.p_g + b * B.p_g + c * C.p_g) / scale};
      };
      const std::size_t last = p.size() - 1;
      if (p.size() == 2) return comb(-1.0, 0, 1.0, 1, 0.0, 0, d);
      if (i == 0) return comb(-3.0, 0, 4.0, 1, -1.0, 2, 2.0 * d);
      if (i == last) return comb(3.0, last, -4.0, last - 1, 1.0, last - 2, 2.0 * d);
      return comb(-1.0, i - 1, 1.0, i + 1, 0.0, i, 2.0 * d);
    };
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.push_back({t.question_id, p[i].first, p[i].second, diff(i)});
    }
  }
  return out;
}

struct FlowNode {
  SimplexPoint at;
  CartesianPoint xy;
  bool boundary = false;
  SimplexTangent interpolated;
  SimplexTangent projected;
  double divergence_residual = 0.0;
};

struct FlowField {
  double spacing = 0.0;
  std::vector<FlowNode> nodes;
  ProjectionResult projection;
  /// Name of the construction, for reports.
  static constexpr const char* kMethod = "idw2+stream-function-projection";

  double max_interior_residual() const {
    double worst = 0.0;
    for (const auto& nd : nodes) {
      if (!nd.boundary) worst = std::max(worst, std::abs(nd.divergence_residual));
    }
    return worst;
  }
};

inline bool all_collinear(std::span<const CartesianPoint> pts) {
  if (pts.size() < 3) return true;
  const auto& a = pts[0];
  std::size_t far = 0;
  double best = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = std::hypot(pts[i].x - a.x, pts[i].y - a.y);
    if (d > best) {
      best = d;
      far = i;
    }
  }
  if (best < 1e-12) return true;
  const auto& b = pts[far];
  for (const auto& c : pts) {
    const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (std::abs(cross) > 1e-12 * best) return false;
  }
  return true;
}

/// IDW (power 2) of scattered tangent vectors onto the lattice, followed by
/// the divergence-free projection.
inline FlowField interpolate_flow(std::span<const FlowSample> samples, double h, ProjectionOptions opt = {},
                                  IdwOptions idw = {}) {
  std::vector<CartesianPoint> sites;
  std::vector<double> values;
  for (const auto& s : samples) {
    sites.push_back(barycentric_to_cartesian(s.at));
    const auto v = tangent_to_cartesian(s.velocity);
    values.push_back(v.x);
    values.push_back(v.y);
  }
  if (sites.size() < 3 || all_collinear(sites)) {
    throw ValidationError("interpolate_flow needs three or more non-collinear sample sites");
  }
  const SimplexLattice lat(h);
  std::vector<CartesianPoint> grid(lat.size());
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    const auto v = idw_at(lat.cartesian(nd.i, nd.j), sites, values, 2, idw);
    grid[r] = {v[0], v[1]};
  }
  FlowField f;
  f.spacing = lat.spacing();
  f.projection = project_divergence_free(lat, grid, opt);
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    f.nodes.push_back({lat.simplex(nd), lat.cartesian(nd.i, nd.j), lat.is_boundary(nd), cartesian_to_tangent(grid[r]),
                       cartesian_to_tangent(f.projection.solenoidal[r]), f.projection.divergence_residual[r]});
  }
  return f;
}

// ---------------------------------------------------------------------------
// Scalar fields

enum class ScalarKind { Accuracy, Entropy };

inline const char* to_string(ScalarKind k) { return k == ScalarKind::Accuracy ? "accuracy" : "entropy"; }

struct ScalarSample {
  SimplexPoint at;
  double value = 0.0;
};

struct ScalarNode {
  SimplexPoint at;
  CartesianPoint xy;
  double value = 0.0;
};

struct ScalarField {
  ScalarKind kind = ScalarKind::Accuracy;
  double spacing = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  std::vector<ScalarNode> nodes;
};

inline std::pair<double, double> scalar_range(ScalarKind kind, std::size_t k) {
  return kind == ScalarKind::Accuracy ? std::pair{0.0, 1.0} : std::pair{0.0, std::log2(static_cast<double>(k))};
}

/// IDW of a scalar at one query point, clipped to the kind's range.
inline double interpolate_scalar_at(const SimplexPoint& q, std::span<const ScalarSample> samples, ScalarKind kind,
                                    std::size_t k, IdwOptions idw = {}) {
  std::vector<CartesianPoint> sites;
  std::vector<double> values;
  for (const auto& s : samples) {
    sites.push_back(barycentric_to_cartesian(s.at));
    values.push_back(s.value);
  }
  const auto [lo, hi] = scalar_range(kind, k);
  return std::clamp(idw_at(barycentric_to_cartesian(q), sites, values, 1, idw)[0], lo, hi);
}

inline ScalarField interpolate_scalar(std::span<const ScalarSample> samples, ScalarKind kind, double h,
                                      std::size_t k = kDefaultOptionCount, IdwOptions idw = {}) {
  if (samples.empty()) throw ValidationError("interpolate_scalar: no samples");
  const auto [lo, hi] = scalar_range(kind, k);
  std::vector<CartesianPoint> sites;
  std::vector<double> values;
  for (const auto& s : samples) {
    if (!(s.value >= lo - 1e-12 && s.value <= hi + 1e-12)) {
      throw ValidationError(std::string("interpolate_scalar: sample outside the ") + to_string(kind) + " range");
    }
    sites.push_back(barycentric_to_cartesian(s.at));
    values.push_back(s.value);
  }
  const SimplexLattice lat(h);
  ScalarField f{kind, lat.spacing(), lo, hi, {}};
  for (std::size_t r = 0; r < lat.size(); ++r) {
    const auto nd = lat.node(r);
    const auto xy = lat.cartesian(nd.i, nd.j);
    const double v = std::clamp(idw_at(xy, sites, values, 1, idw)[0], lo, hi);
    f.nodes.push_back({lat.simplex(nd), xy, v});
  }
  return f;
}

}  // namespace strategem

#endif  // STRATEGEM_FIELDS_HPP
