#ifndef STRATEGEM_METRICS_HPP
#define STRATEGEM_METRICS_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "strategem/core.hpp"

namespace strategem {

/// Per-position accuracy alpha_o for one question at one theta.
struct PositionAccuracy {
  std::string question_id;
  double theta = 0.0;
  std::vector<std::optional<double>> alpha;  // undefined where count == 0
  std::vector<std::uint64_t> correct;
  std::vector<std::uint64_t> counts;

  std::size_t option_count() const noexcept { return alpha.size(); }
  bool complete() const noexcept {
    for (const auto& a : alpha) {
      if (!a) return false;
    }
    return true;
  }
};

/// alpha_o = #(correct at o and selected Correct) / #(correct at o).
/// Only Scored records count.
inline PositionAccuracy position_accuracy(std::span<const TrialLogRecord> trials, std::size_t k) {
  PositionAccuracy acc;
  acc.correct.assign(k, 0);
  acc.counts.assign(k, 0);
  acc.alpha.assign(k, std::nullopt);
  if (!trials.empty()) {
    acc.question_id = trials.front().spec.question_id;
    acc.theta = trials.front().spec.theta;
  }
  for (const auto& t : trials) {
    if (t.spec.question_id != acc.question_id || t.spec.theta != acc.theta) {
      throw ValidationError("position_accuracy: trials must share question_id and theta");
    }
    if (!t.scored()) continue;
    const std::size_t o = t.correct_position().index();
    if (o >= k) throw ValidationError("correct position outside k");
    ++acc.counts[o];
    if (t.correct()) ++acc.correct[o];
  }
  for (std::size_t o = 0; o < k; ++o) {
    if (acc.counts[o] > 0) {
      acc.alpha[o] = static_cast<double>(acc.correct[o]) / static_cast<double>(acc.counts[o]);
    }
  }
  return acc;
}

enum class DifficultyRegion {
  ConsistentReasoning,        // mu >= 0.5, sigma2 < 0.125
  PositionDependentSuccess,   // mu >= 0.5, sigma2 >= 0.125
  ConsistentlyChallenging,    // mu < 0.5, sigma2 < 0.125
  PositionDominatedConfusion  // mu < 0.5, sigma2 >= 0.125
};

inline const char* to_string(DifficultyRegion r) {
  switch (r) {
    case DifficultyRegion::ConsistentReasoning: return "consistent_reasoning";
    case DifficultyRegion::PositionDependentSuccess: return "position_dependent_success";
    case DifficultyRegion::ConsistentlyChallenging: return "consistently_challenging";
    case DifficultyRegion::PositionDominatedConfusion: return "position_dominated_confusion";
  }
  return "?";
}

inline constexpr double kRegionMuThreshold = 0.5;
inline constexpr double kRegionSigma2Threshold = 0.125;

struct DifficultyPoint {
  std::string question_id;
  double mu = 0.0;
  double sigma2 = 0.0;
  DifficultyRegion region = DifficultyRegion::ConsistentlyChallenging;
};

/// Boundary values belong to the upper region.
inline DifficultyRegion classify_region(double mu, double sigma2) {
  const bool high_mu = mu >= kRegionMuThreshold;
  const bool high_var = sigma2 >= kRegionSigma2Threshold;
  if (high_mu) return high_var ? DifficultyRegion::PositionDependentSuccess : DifficultyRegion::ConsistentReasoning;
  return high_var ? DifficultyRegion::PositionDominatedConfusion : DifficultyRegion::ConsistentlyChallenging;
}

/// (mu, sigma2) with sigma2 the population variance (divisor k).
inline DifficultyPoint difficulty_map(const PositionAccuracy& acc) {
  const std::size_t k = acc.option_count();
  if (k == 0) throw ValidationError("difficulty_map: no positions");
  double sum = 0.0;
  for (std::size_t o = 0; o < k; ++o) {
    if (!acc.alpha[o]) {
      throw ValidationError("difficulty_map: accuracy undefined at position " + OptionPosition(o).str() +
                            " for question '" + acc.question_id + "'");
    }
    sum += *acc.alpha[o];
  }
  const double mu = sum / static_cast<double>(k);
  double ss = 0.0;
  for (std::size_t o = 0; o < k; ++o) {
    const double d = *acc.alpha[o] - mu;
    ss += d * d;
  }
  const double sigma2 = ss / static_cast<double>(k);
  return {acc.question_id, mu, sigma2, classify_region(mu, sigma2)};
}

/// Row o_c: probability of selecting each position given the correct answer
/// was at o_c. The diagonal holds alpha_{o_c}, so rows sum to 1.
struct WrongAnswerMatrix {
  std::size_t k = 0;
  std::vector<std::vector<std::optional<double>>> rows;
  std::vector<std::uint64_t> row_totals;

  std::optional<double> wrong(OptionPosition chosen, OptionPosition correct) const {
    return rows.at(correct.index()).at(chosen.index());
  }
};

inline WrongAnswerMatrix wrong_answer_distribution(std::span<const TrialLogRecord> trials, std::size_t k) {
  std::vector<std::vector<std::uint64_t>> counts(k, std::vector<std::uint64_t>(k, 0));
  WrongAnswerMatrix m;
  m.k = k;
  m.row_totals.assign(k, 0);
  for (const auto& t : trials) {
    if (!t.scored()) continue;
    const auto c = t.correct_position().index();
    const auto s = t.outcome->selected_position.index();
    ++counts.at(c).at(s);
    ++m.row_totals[c];
  }
  m.rows.assign(k, std::vector<std::optional<double>>(k, std::nullopt));
  for (std::size_t c = 0; c < k; ++c) {
    if (m.row_totals[c] == 0) continue;
    for (std::size_t s = 0; s < k; ++s) {
      m.rows[c][s] = static_cast<double>(counts[c][s]) / static_cast<double>(m.row_totals[c]);
    }
  }
  return m;
}

struct SweepPoint {
  double theta = 0.0;
  double mean = 0.0;
  /// Pooled per-trial Bernoulli variance p(1-p).
  double var_trials = 0.0;
  /// Population variance of per-question cell accuracies.
  double var_questions = 0.0;
  /// sqrt(p(1-p)/n).
  double se = 0.0;
  std::uint64_t n = 0;
  std::uint64_t n_questions = 0;
};

struct SweepCurve {
  Protocol protocol = Protocol::Inclusive;
  OptionPosition anchor;
  std::vector<SweepPoint> points;
  /// Requested thetas with no scored trials.
  std::vector<double> gaps;
};

/// Mean accuracy per (protocol, anchor, theta) cell. If `theta_grid` is
/// non-empty, grid values with no scored trials are reported as gaps.
inline std::vector<SweepCurve> sweep_curves(std::span<const TrialLogRecord> trials,
                                            std::span<const double> theta_grid = {}) {
  struct Cell {
    std::uint64_t n = 0, correct = 0;
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_question;
  };
  std::map<std::tuple<Protocol, OptionPosition, double>, Cell> cells;
  std::map<std::pair<Protocol, OptionPosition>, bool> curves_seen;
  for (const auto& t : trials) {
    if (t.spec.protocol == Protocol::Static) continue;
    curves_seen[{t.spec.protocol, t.spec.anchor_position}] = true;
    if (!t.scored()) continue;
    auto& cell = cells[{t.spec.protocol, t.spec.anchor_position, t.spec.theta}];
    ++cell.n;
    auto& pq = cell.per_question[t.spec.question_id];
    ++pq.second;
    if (t.correct()) {
      ++cell.correct;
      ++pq.first;
    }
  }

  std::vector<SweepCurve> curves;
  for (const auto& [key, _] : curves_seen) {
    SweepCurve curve{key.first, key.second, {}, {}};
    for (const auto& [ck, cell] : cells) {
      if (std::get<0>(ck) != key.first || std::get<1>(ck) != key.second) continue;
      SweepPoint pt;
      pt.theta = std::get<2>(ck);
      pt.n = cell.n;
      pt.mean = static_cast<double>(cell.correct) / static_cast<double>(cell.n);
      pt.var_trials = pt.mean * (1.0 - pt.mean);
      pt.se = std::sqrt(pt.var_trials / static_cast<double>(cell.n));
      pt.n_questions = cell.per_question.size();
      double qsum = 0.0;
      std::vector<double> qacc;
      for (const auto& [qid, c] : cell.per_question) {
        qacc.push_back(static_cast<double>(c.first) / static_cast<double>(c.second));
        qsum += qacc.back();
      }
      const double qmean = qsum / static_cast<double>(qacc.size());
      double ss = 0.0;
      for (double a : qacc) ss += (a - qmean) * (a - qmean);
      pt.var_questions = ss / static_cast<double>(qacc.size());
      curve.points.push_back(pt);
    }
    for (double theta : theta_grid) {
      bool found = false;
      for (const auto& p : curve.points) found = found || p.theta == theta;
      if (!found) curve.gaps.push_back(theta);
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

struct DeltaMuCurve {
  OptionPosition anchor;
  std::vector<std::pair<double, double>> points;  // (theta, mu_inc - mu_exc)
};

inline DeltaMuCurve delta_mu(const SweepCurve& inclusive, const SweepCurve& exclusive) {
  if (inclusive.protocol != Protocol::Inclusive || exclusive.protocol != Protocol::Exclusive) {
    throw ValidationError("delta_mu expects an inclusive and an exclusive curve");
  }
  if (inclusive.anchor != exclusive.anchor) throw ValidationError("delta_mu: anchors differ");
  std::vector<double> missing;
  auto has = [](const SweepCurve& c, double theta) {
    for (const auto& p : c.points) {
      if (p.theta == theta) return true;
    }
    return false;
  };
  for (const auto& p : inclusive.points) {
    if (!has(exclusive, p.theta)) missing.push_back(p.theta);
  }
  for (const auto& p : exclusive.points) {
    if (!has(inclusive, p.theta)) missing.push_back(p.theta);
  }
  if (!missing.empty()) {
    std::string msg = "delta_mu: theta grids differ; missing thetas:";
    for (double t : missing) msg += " " + std::to_string(t);
    throw ValidationError(msg);
  }
  DeltaMuCurve out{inclusive.anchor, {}};
  for (std::size_t i = 0; i < inclusive.points.size(); ++i) {
    out.points.emplace_back(inclusive.points[i].theta, inclusive.points[i].mean - exclusive.points[i].mean);
  }
  return out;
}

}  // namespace strategem

#endif  // STRATEGEM_METRICS_HPP
