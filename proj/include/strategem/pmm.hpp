#ifndef STRATEGEM_PMM_HPP
#define STRATEGEM_PMM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/metrics.hpp"

namespace strategem {

/// Rounding slack for simplex membership of raw estimates.
inline constexpr double kSimplexTolerance = 1e-12;

/// Which raw estimates left [0,1].
struct SimplexViolation {
  bool p_m_out_of_range = false;
  bool p_r_negative = false;
  bool p_g_negative = false;

  bool any() const noexcept { return p_m_out_of_range || p_r_negative || p_g_negative; }
};

/// Per-question (P_M, P_R, P_G) decomposition.
///
/// `raw` always satisfies the closed-form relations exactly; `mix` is the
/// Euclidean projection of `raw` onto the simplex and equals `raw` when
/// `clamped` is false.
struct StrategyEstimate {
  std::string question_id;
  OptionPosition o_m;
  double a_om = 0.0;
  double a_other = 0.0;
  StrategyMix raw;
  StrategyMix mix;
  SimplexViolation violation;
  bool clamped = false;
};

/// Euclidean projection onto {x >= 0, sum x = 1} (sort-and-threshold).
inline std::array<double, 3> project_to_simplex(const std::array<double, 3>& v) {
  std::array<double, 3> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  return {std::max(v[0] - tau, 0.0), std::max(v[1] - tau, 0.0), std::max(v[2] - tau, 0.0)};
}

inline StrategyMix project_to_simplex(const StrategyMix& m) {
  const auto p = project_to_simplex(std::array<double, 3>{m.p_m, m.p_r, m.p_g});
  return {p[0], p[1], p[2]};
}

/// Invert the ideal-condition mixture (perfect reasoning, uniform guessing).
inline StrategyEstimate estimate_strategy(double a_om, double a_other, std::size_t k) {
  if (!(a_om >= 0.0 && a_om <= 1.0) || !(a_other >= 0.0 && a_other <= 1.0)) {
    throw ValidationError("estimate_strategy: accuracies must lie in [0,1]");
  }
  if (k < 2) throw ValidationError("estimate_strategy: k must be >= 2");
  const double base = 1.0 / static_cast<double>(k);
  const double span = 1.0 - base;

  StrategyEstimate e;
  e.a_om = a_om;
  e.a_other = a_other;
  e.raw.p_m = (a_om - a_other) / span;
  e.raw.p_r = (a_om - base) / span - e.raw.p_m;
  e.raw.p_g = 1.0 - e.raw.p_m - e.raw.p_r;

  // Values within rounding distance of the boundary are not violations.
  constexpr double tol = kSimplexTolerance;
  const auto outside = [](double x) { return x < -tol || x > 1.0 + tol; };
  e.violation.p_m_out_of_range = outside(e.raw.p_m);
  e.violation.p_r_negative = e.raw.p_r < -tol;
  e.violation.p_g_negative = e.raw.p_g < -tol;
  e.clamped = outside(e.raw.p_m) || outside(e.raw.p_r) || outside(e.raw.p_g);
  if (e.clamped) {
    e.mix = project_to_simplex(e.raw);
  } else {
    const auto snap = [](double x) { return std::clamp(x, 0.0, 1.0); };
    e.mix = {snap(e.raw.p_m), snap(e.raw.p_r), snap(e.raw.p_g)};
  }
  return e;
}

struct ExpectedAccuracies {
  double a_om = 0.0;
  double a_other = 0.0;
};

inline ExpectedAccuracies expected_accuracies(const StrategyMix& mix, std::size_t k) {
  const double base = 1.0 / static_cast<double>(k);
  return {mix.p_m + mix.p_r + mix.p_g * base, mix.p_m * base + mix.p_r + mix.p_g * base};
}

/// (A_om, A_other) from per-position counts; A_other pools the other positions.
inline ExpectedAccuracies observed_accuracies(const PositionAccuracy& acc, OptionPosition o_m) {
  const std::size_t k = acc.option_count();
  o_m.check(k);
  if (acc.counts[o_m.index()] == 0) {
    throw ValidationError("no trials with the correct answer at memorized position " + o_m.str() +
                          " for question '" + acc.question_id + "'");
  }
  std::uint64_t other_n = 0, other_correct = 0;
  for (std::size_t o = 0; o < k; ++o) {
    if (o == o_m.index()) continue;
    if (acc.counts[o] == 0) {
      throw ValidationError("position " + OptionPosition(o).str() + " has no trials for question '" +
                            acc.question_id + "'");
    }
    other_n += acc.counts[o];
    other_correct += acc.correct[o];
  }
  return {static_cast<double>(acc.correct[o_m.index()]) / static_cast<double>(acc.counts[o_m.index()]),
          static_cast<double>(other_correct) / static_cast<double>(other_n)};
}

inline StrategyEstimate estimate_question(const PositionAccuracy& acc, OptionPosition o_m) {
  const auto observed = observed_accuracies(acc, o_m);
  auto e = estimate_strategy(observed.a_om, observed.a_other, acc.option_count());
  e.question_id = acc.question_id;
  e.o_m = o_m;
  return e;
}

struct ValidationRecord {
  std::string question_id;
  double alpha_observed = 0.0;
  double alpha_expected = 0.0;
  double delta_alpha = 0.0;
};

/// Position-averaged observed accuracy against the one implied by the
/// (clamped) estimate.
inline ValidationRecord validate_question(const StrategyEstimate& estimate, const PositionAccuracy& acc) {
  const std::size_t k = acc.option_count();
  const auto observed = observed_accuracies(acc, estimate.o_m);
  const auto expected = expected_accuracies(estimate.mix, k);
  const double kd = static_cast<double>(k);
  ValidationRecord v;
  v.question_id = acc.question_id;
  v.alpha_observed = (observed.a_om + (kd - 1.0) * observed.a_other) / kd;
  v.alpha_expected = (expected.a_om + (kd - 1.0) * expected.a_other) / kd;
  v.delta_alpha = std::abs(v.alpha_observed - v.alpha_expected);
  return v;
}

enum class MemorizedPositionPolicy { OriginalPosition, ArgmaxAccuracy };

inline const char* to_string(MemorizedPositionPolicy p) {
  return p == MemorizedPositionPolicy::OriginalPosition ? "original_position" : "argmax_accuracy";
}

inline MemorizedPositionPolicy parse_policy(std::string_view s) {
  if (s == "original_position" || s == "original") return MemorizedPositionPolicy::OriginalPosition;
  if (s == "argmax_accuracy" || s == "argmax") return MemorizedPositionPolicy::ArgmaxAccuracy;
  throw ValidationError("unknown o_m policy '" + std::string(s) + "'");
}

/// Ties under ArgmaxAccuracy go to the lowest index.
inline OptionPosition select_memorized_position(const PositionAccuracy& acc, MemorizedPositionPolicy policy,
                                                OptionPosition original) {
  if (policy == MemorizedPositionPolicy::OriginalPosition) return original;
  if (!acc.complete()) {
    throw ValidationError("argmax o_m policy needs accuracy at every position for '" + acc.question_id + "'");
  }
  std::size_t best = 0;
  for (std::size_t o = 1; o < acc.option_count(); ++o) {
    if (*acc.alpha[o] > *acc.alpha[best]) best = o;
  }
  return OptionPosition(best);
}

// ---------------------------------------------------------------------------
// Theta-resolved estimates

struct CellEstimate {
  std::string question_id;
  double theta = 0.0;
  Protocol protocol = Protocol::Static;
  OptionPosition anchor;
  std::uint64_t n_om = 0;
  std::uint64_t n_other = 0;
  /// A side was filled in from the other anchors' cells at the same theta.
  bool pooled = false;
  bool low_confidence = false;
  std::optional<StrategyEstimate> estimate;
};

struct EnsemblePoint {
  double theta = 0.0;
  StrategyMix mean;
  StrategyMix sd;
  std::uint64_t n_questions = 0;
  double violation_rate = 0.0;
};

struct EnsembleStrategyCurve {
  Protocol protocol = Protocol::Static;
  OptionPosition anchor;
  std::vector<EnsemblePoint> points;
};

struct ThetaResolved {
  std::vector<CellEstimate> cells;  // question order, then theta
  EnsembleStrategyCurve curve;
};

struct ThetaResolvedOptions {
  std::uint64_t min_count = 20;
};

/// Per-(question, theta) strategy estimates for one (protocol, anchor) and
/// their ensemble means.
///
/// a_om / a_other condition the anchor's cell on the realized correct
/// position. A side with fewer than min_count trials is filled from the other
/// anchors' cells at the same (question, theta, protocol); at theta = 0 this
/// reproduces the balanced design. Cells still short are low-confidence and
/// left out of the ensemble.
inline ThetaResolved theta_resolved_estimates(std::span<const TrialLogRecord> trials, Protocol protocol,
                                              OptionPosition anchor, std::span<const double> theta_grid,
                                              const std::function<OptionPosition(const std::string&)>& o_m_of,
                                              std::size_t k, ThetaResolvedOptions options = {}) {
  struct Tally {
    std::uint64_t n = 0, correct = 0;
    void add(bool c) {
      ++n;
      if (c) ++correct;
    }
    double rate() const { return static_cast<double>(correct) / static_cast<double>(n); }
  };
  struct Side {
    Tally own_om, own_other, all_om, all_other;
  };
  std::vector<std::string> order;
  std::map<std::string, std::map<double, Side>> tallies;
  std::map<std::string, OptionPosition> o_m_cache;

  for (const auto& t : trials) {
    if (t.spec.protocol != protocol || !t.scored()) continue;
    const auto& qid = t.spec.question_id;
    auto [it, inserted] = o_m_cache.try_emplace(qid);
    if (inserted) {
      it->second = o_m_of(qid);
      order.push_back(qid);
    }
    const bool at_om = t.correct_position() == it->second;
    auto& side = tallies[qid][t.spec.theta];
    (at_om ? side.all_om : side.all_other).add(t.correct());
    if (t.spec.anchor_position == anchor) (at_om ? side.own_om : side.own_other).add(t.correct());
  }

  ThetaResolved out;
  out.curve.protocol = protocol;
  out.curve.anchor = anchor;
  for (const auto& qid : order) {
    for (double theta : theta_grid) {
      CellEstimate cell;
      cell.question_id = qid;
      cell.theta = theta;
      cell.protocol = protocol;
      cell.anchor = anchor;
      const auto qit = tallies.find(qid);
      const Side* side = nullptr;
      if (qit != tallies.end()) {
        if (auto sit = qit->second.find(theta); sit != qit->second.end()) side = &sit->second;
      }
      if (side == nullptr) {
        cell.low_confidence = true;
        out.cells.push_back(std::move(cell));
        continue;
      }
      Tally om = side->own_om, other = side->own_other;
      if (om.n < options.min_count) {
        om = side->all_om;
        cell.pooled = true;
      }
      if (other.n < options.min_count) {
        other = side->all_other;
        cell.pooled = true;
      }
      cell.n_om = om.n;
      cell.n_other = other.n;
      cell.low_confidence = om.n < options.min_count || other.n < options.min_count;
      if (om.n > 0 && other.n > 0) {
        auto e = estimate_strategy(om.rate(), other.rate(), k);
        e.question_id = qid;
        e.o_m = o_m_cache.at(qid);
        cell.estimate = e;
      }
      out.cells.push_back(std::move(cell));
    }
  }

  for (double theta : theta_grid) {
    EnsemblePoint pt;
    pt.theta = theta;
    std::vector<StrategyMix> mixes;
    std::uint64_t violations = 0;
    for (const auto& cell : out.cells) {
      if (cell.theta != theta || cell.low_confidence || !cell.estimate) continue;
      mixes.push_back(cell.estimate->mix);
      if (cell.estimate->clamped) ++violations;
    }
    pt.n_questions = mixes.size();
    if (!mixes.empty()) {
      const double n = static_cast<double>(mixes.size());
      for (const auto& m : mixes) {
        pt.mean.p_m += m.p_m / n;
        pt.mean.p_r += m.p_r / n;
        pt.mean.p_g += m.p_g / n;
      }
      for (const auto& m : mixes) {
        pt.sd.p_m += (m.p_m - pt.mean.p_m) * (m.p_m - pt.mean.p_m) / n;
        pt.sd.p_r += (m.p_r - pt.mean.p_r) * (m.p_r - pt.mean.p_r) / n;
        pt.sd.p_g += (m.p_g - pt.mean.p_g) * (m.p_g - pt.mean.p_g) / n;
      }
      pt.sd = {std::sqrt(pt.sd.p_m), std::sqrt(pt.sd.p_r), std::sqrt(pt.sd.p_g)};
      pt.violation_rate = static_cast<double>(violations) / n;
    }
    out.curve.points.push_back(pt);
  }
  return out;
}

}  // namespace strategem

#endif  // STRATEGEM_PMM_HPP
