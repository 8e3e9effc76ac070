#ifndef STRATEGEM_ITC_HPP
#define STRATEGEM_ITC_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/metrics.hpp"
#include "strategem/pmm.hpp"
#include "strategem/rng.hpp"

namespace strategem {

namespace detail {

/// -p log2 p with the 0 log 0 = 0 convention.
inline double neg_plogp(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

}  // namespace detail

/// Shannon entropy (bits) of normalized counts; nullopt when the total is 0.
template <typename Count>
std::optional<double> selection_entropy(std::span<const Count> counts) {
  double total = 0.0;
  for (auto c : counts) {
    if (c < 0) throw ValidationError("selection_entropy: negative count");
    total += static_cast<double>(c);
  }
  if (!(total > 0.0)) return std::nullopt;
  double h = 0.0;
  for (auto c : counts) h += detail::neg_plogp(static_cast<double>(c) / total);
  return h;
}

inline std::optional<double> selection_entropy(std::initializer_list<std::uint64_t> counts) {
  return selection_entropy(std::span<const std::uint64_t>(counts.begin(), counts.size()));
}

/// Entropy of the ideal model that puts `accuracy` on the correct content and
/// spreads the rest evenly over the k - 1 distractors.
inline double ideal_entropy(double accuracy, std::size_t k) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw ValidationError("ideal_entropy: accuracy outside [0,1]");
  if (k < 2) throw ValidationError("ideal_entropy: k must be >= 2");
  const double rest = 1.0 - accuracy;
  const double km1 = static_cast<double>(k - 1);
  double h = detail::neg_plogp(accuracy);
  if (rest > 0.0) h -= rest * std::log2(rest / km1);
  return h;
}

/// Dense (A, H_ideal(A)) samples for plotting; steps + 1 points over [0,1].
inline std::vector<std::pair<double, double>> frontier_grid(std::size_t k, std::size_t steps = 1000) {
  std::vector<std::pair<double, double>> out;
  out.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double a = static_cast<double>(i) / static_cast<double>(steps);
    out.emplace_back(a, ideal_entropy(a, k));
  }
  return out;
}

/// How selections are turned into the distribution whose entropy is measured.
enum class EntropyMode {
  /// Distribution over content roles (Correct, Distractor 1..k-1), pooled over
  /// balanced placements. Default.
  ContentAligned,
  /// Per-position accuracy vector normalized to sum 1. Comparison only.
  PerPositionLiteral,
};

inline const char* to_string(EntropyMode m) {
  return m == EntropyMode::ContentAligned ? "content_aligned" : "per_position_literal";
}

inline EntropyMode parse_entropy_mode(std::string_view s) {
  if (s == "content_aligned" || s == "content") return EntropyMode::ContentAligned;
  if (s == "per_position_literal" || s == "per-position") return EntropyMode::PerPositionLiteral;
  throw ValidationError("unknown entropy mode '" + std::string(s) + "'");
}

struct EntropyAccuracyPoint {
  std::string question_id;
  double accuracy = 0.0;
  std::optional<double> entropy_bits;
  double ideal_entropy_bits = 0.0;
  /// ideal - observed; positive means under-dispersed.
  std::optional<double> calibration_gap;
  /// Counts per content role: index 0 Correct, i Distractor i.
  std::vector<std::uint64_t> selection_counts;
};

/// One point per question, in first-seen order. Requires every question's
/// planned trials to be spread evenly over correct positions.
inline std::vector<EntropyAccuracyPoint> entropy_accuracy_points(std::span<const TrialLogRecord> trials,
                                                                 std::size_t k,
                                                                 EntropyMode mode = EntropyMode::ContentAligned) {
  struct Acc {
    std::vector<std::uint64_t> planned;
    std::vector<std::uint64_t> role_counts;
    std::vector<std::uint64_t> pos_n, pos_correct;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> per_q;
  for (const auto& t : trials) {
    auto [it, inserted] = per_q.try_emplace(t.spec.question_id);
    if (inserted) {
      order.push_back(t.spec.question_id);
      it->second.planned.assign(k, 0);
      it->second.role_counts.assign(k, 0);
      it->second.pos_n.assign(k, 0);
      it->second.pos_correct.assign(k, 0);
    }
    auto& a = it->second;
    const auto c = t.correct_position().index();
    ++a.planned.at(c);
    if (!t.scored()) continue;
    ++a.role_counts.at(t.outcome->selected_role.code());
    ++a.pos_n[c];
    if (t.correct()) ++a.pos_correct[c];
  }

  std::vector<EntropyAccuracyPoint> out;
  for (const auto& qid : order) {
    const auto& a = per_q.at(qid);
    for (std::size_t o = 1; o < k; ++o) {
      if (a.planned[o] != a.planned[0]) {
        throw ValidationError("entropy_accuracy_points: unbalanced design for question '" + qid + "'");
      }
    }
    std::uint64_t total = 0;
    for (auto c : a.role_counts) total += c;
    if (total == 0) continue;

    EntropyAccuracyPoint pt;
    pt.question_id = qid;
    pt.selection_counts = a.role_counts;
    pt.accuracy = static_cast<double>(a.role_counts[0]) / static_cast<double>(total);
    pt.ideal_entropy_bits = ideal_entropy(pt.accuracy, k);
    if (mode == EntropyMode::ContentAligned) {
      pt.entropy_bits = selection_entropy(std::span<const std::uint64_t>(a.role_counts));
    } else {
      std::vector<double> alpha(k, 0.0);
      for (std::size_t o = 0; o < k; ++o) {
        if (a.pos_n[o] > 0) alpha[o] = static_cast<double>(a.pos_correct[o]) / static_cast<double>(a.pos_n[o]);
      }
      pt.entropy_bits = selection_entropy(std::span<const double>(alpha));
    }
    if (pt.entropy_bits) pt.calibration_gap = pt.ideal_entropy_bits - *pt.entropy_bits;
    out.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Correlations

/// Pearson r; nullopt if either column has zero variance or n < 2.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided permutation p-value for r(x, y): (1 + #{|r_perm| >= |r_obs|}) / (1 + permutations).
inline double permutation_p_value(std::span<const double> x, std::span<const double> y, double r_obs,
                                  std::uint32_t permutations, Rng rng) {
  std::vector<double> shuffled(y.begin(), y.end());
  std::uint32_t extreme = 0;
  const double threshold = std::abs(r_obs) - 1e-12;
  for (std::uint32_t i = 0; i < permutations; ++i) {
    rng.shuffle(shuffled.begin(), shuffled.end());
    const auto r = pearson(x, shuffled);
    if (r && std::abs(*r) >= threshold) ++extreme;
  }
  return (1.0 + extreme) / (1.0 + permutations);
}

struct CorrelationReport {
  static constexpr std::array<const char*, 2> kMetrics{"accuracy", "entropy"};
  static constexpr std::array<const char*, 3> kStrategies{"P_M", "P_R", "P_G"};

  std::array<std::array<std::optional<double>, 3>, 2> r{};
  std::array<std::array<std::optional<double>, 3>, 2> p_value{};
  std::size_t n = 0;
  std::uint32_t permutations = 0;
  std::uint64_t seed = 0;
};

struct CorrelationOptions {
  std::uint32_t permutations = 10000;
  std::uint64_t seed = 0;
};

/// Pearson r between (accuracy, entropy) and (P_M, P_R, P_G) over questions
/// present in both inputs, joined by question id. Strategy values are the
/// clamped estimates.
inline CorrelationReport strategy_metric_correlations(std::span<const StrategyEstimate> estimates,
                                                      std::span<const EntropyAccuracyPoint> points,
                                                      CorrelationOptions options = {}) {
  std::map<std::string, const StrategyEstimate*> by_id;
  for (const auto& e : estimates) by_id[e.question_id] = &e;
  std::array<std::vector<double>, 2> metric;
  std::array<std::vector<double>, 3> strategy;
  for (const auto& pt : points) {
    auto it = by_id.find(pt.question_id);
    if (it == by_id.end() || !pt.entropy_bits) continue;
    metric[0].push_back(pt.accuracy);
    metric[1].push_back(*pt.entropy_bits);
    strategy[0].push_back(it->second->mix.p_m);
    strategy[1].push_back(it->second->mix.p_r);
    strategy[2].push_back(it->second->mix.p_g);
  }
  CorrelationReport rep;
  rep.n = metric[0].size();
  rep.permutations = options.permutations;
  rep.seed = options.seed;
  if (rep.n < 3) throw ValidationError("strategy_metric_correlations: need at least 3 questions");
  const Rng root(options.seed);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      rep.r[i][j] = pearson(metric[i], strategy[j]);
      if (rep.r[i][j]) {
        rep.p_value[i][j] =
            permutation_p_value(metric[i], strategy[j], *rep.r[i][j], options.permutations, root.split(i * 3 + j));
      }
    }
  }
  return rep;
}

}  // namespace strategem

#endif  // STRATEGEM_ITC_HPP
