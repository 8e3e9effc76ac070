#ifndef STRATEGEM_RANDOMIZATION_HPP
#define STRATEGEM_RANDOMIZATION_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/hash.hpp"
#include "strategem/rng.hpp"

namespace strategem {

/// Result of the per-trial Bernoulli(theta) placement draw.
struct PlacementDraw {
  OptionPosition position;
  Branch branch = Branch::Fixed;
};

/// Draw where the correct answer goes for one trial.
///
/// With probability 1 - theta the anchor is kept. Otherwise the position is
/// uniform over all k slots (Inclusive) or the k - 1 slots other than the
/// anchor (Exclusive). Static ignores theta. The branch uniform is consumed
/// for every protocol so that protocols sharing a seed stay in lockstep.
inline PlacementDraw draw_placement(double theta, OptionPosition anchor, Protocol protocol,
                                    std::size_t k, Rng& rng) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("theta outside [0,1]");
  anchor.check(k);
  if (protocol == Protocol::Exclusive && k < 2) {
    throw ValidationError("exclusive protocol needs k >= 2");
  }
  const bool randomized = rng.uniform() < theta;
  if (protocol == Protocol::Static || !randomized) return {anchor, Branch::Fixed};
  if (protocol == Protocol::Inclusive) {
    return {OptionPosition(static_cast<std::size_t>(rng.below(k))), Branch::Randomized};
  }
  auto p = static_cast<std::size_t>(rng.below(k - 1));
  if (p >= anchor.index()) ++p;
  return {OptionPosition(p), Branch::Randomized};
}

inline OptionPosition draw_correct_position(double theta, OptionPosition anchor, Protocol protocol,
                                            std::size_t k, Rng& rng) {
  return draw_placement(theta, anchor, protocol, k, rng).position;
}

struct SweepConfig {
  std::vector<double> theta_grid = default_theta_grid();
  std::vector<Protocol> protocols{Protocol::Inclusive, Protocol::Exclusive};
  std::vector<OptionPosition> anchor_positions;  // empty: all k
  std::uint32_t trials_per_cell = 100;
  std::uint64_t master_seed = 0;

  static std::vector<double> default_theta_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    return grid;
  }

  void validate(std::size_t k) const {
    if (theta_grid.empty()) throw ValidationError("empty theta grid");
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
      if (!(theta_grid[i] >= 0.0 && theta_grid[i] <= 1.0)) {
        throw ValidationError("theta grid value outside [0,1]");
      }
      if (i > 0 && !(theta_grid[i] > theta_grid[i - 1])) {
        throw ValidationError("theta grid must be strictly increasing");
      }
    }
    if (protocols.empty()) throw ValidationError("no protocols selected");
    for (auto p : protocols) {
      if (p == Protocol::Static) throw ValidationError("sweeps use inclusive/exclusive protocols");
    }
    for (auto a : anchor_positions) a.check(k);
    if (trials_per_cell < 1) throw ValidationError("trials_per_cell must be >= 1");
  }
};

struct BalancedDesignConfig {
  std::uint32_t trials_per_position = 100;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (trials_per_position < 1) throw ValidationError("trials_per_position must be >= 1");
  }
};

namespace detail {

inline std::uint64_t theta_bits(double theta) { return std::bit_cast<std::uint64_t>(theta + 0.0); }

/// Seed shared by every protocol at the same cell coordinates.
inline std::uint64_t trial_seed(std::string_view design, std::uint64_t master, const std::string& qid,
                                double theta, OptionPosition anchor, std::uint32_t replicate) {
  Fnv1a h;
  h.field(design).field(qid).field(theta_bits(theta)).field(anchor.index()).field(replicate);
  return mix64(master ^ mix64(h.digest()));
}

inline std::string trial_id(std::string_view design, std::uint64_t master, const std::string& qid,
                            Protocol protocol, double theta, OptionPosition anchor,
                            std::uint32_t replicate) {
  Fnv1a h;
  h.field(design).field(master).field(qid).field(to_string(protocol)).field(theta_bits(theta))
      .field(anchor.index()).field(replicate);
  return to_hex(h.digest());
}

inline TrialSpec make_trial(std::string_view design, std::uint64_t master, const Question& q,
                            std::size_t k, Protocol protocol, double theta, OptionPosition anchor,
                            std::uint32_t replicate) {
  TrialSpec t;
  t.trial_id = trial_id(design, master, q.id, protocol, theta, anchor, replicate);
  t.question_id = q.id;
  t.theta = theta;
  t.protocol = protocol;
  t.anchor_position = anchor;
  t.rng_seed = trial_seed(design, master, q.id, theta, anchor, replicate);
  t.replicate = replicate;
  Rng rng(t.rng_seed);
  const auto draw = draw_placement(theta, anchor, protocol, k, rng);
  t.branch = draw.branch;
  t.arrangement = arrange(q, draw.position, rng);
  return t;
}

inline void check_unique_ids(const std::vector<TrialSpec>& plan) {
  std::unordered_set<std::string> ids;
  ids.reserve(plan.size());
  for (const auto& t : plan) {
    if (!ids.insert(t.trial_id).second) throw ValidationError("trial id collision: " + t.trial_id);
  }
}

}  // namespace detail

/// Theta sweep plan. Ordered by question (dataset order), protocol, theta,
/// anchor, then replicate.
inline std::vector<TrialSpec> build_sweep_plan(const Dataset& dataset, const SweepConfig& config) {
  dataset.validate();
  config.validate(dataset.k);

  std::vector<Protocol> protocols = config.protocols;
  std::sort(protocols.begin(), protocols.end());
  protocols.erase(std::unique(protocols.begin(), protocols.end()), protocols.end());
  std::vector<OptionPosition> anchors = config.anchor_positions;
  if (anchors.empty()) {
    for (std::size_t i = 0; i < dataset.k; ++i) anchors.emplace_back(i);
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  std::vector<TrialSpec> plan;
  plan.reserve(dataset.questions.size() * protocols.size() * config.theta_grid.size() *
               anchors.size() * config.trials_per_cell);
  for (const auto& q : dataset.questions) {
    for (auto protocol : protocols) {
      for (double theta : config.theta_grid) {
        for (auto anchor : anchors) {
          for (std::uint32_t r = 0; r < config.trials_per_cell; ++r) {
            plan.push_back(detail::make_trial("sweep", config.master_seed, q, dataset.k, protocol,
                                              theta, anchor, r));
          }
        }
      }
    }
  }
  detail::check_unique_ids(plan);
  return plan;
}

/// Every question with the correct answer at every position, trials_per_position
/// times each. Static protocol, theta 0, anchor = the forced position.
inline std::vector<TrialSpec> build_balanced_plan(const Dataset& dataset,
                                                  const BalancedDesignConfig& config) {
  dataset.validate();
  config.validate();
  std::vector<TrialSpec> plan;
  plan.reserve(dataset.questions.size() * dataset.k * config.trials_per_position);
  for (const auto& q : dataset.questions) {
    for (std::size_t o = 0; o < dataset.k; ++o) {
      for (std::uint32_t r = 0; r < config.trials_per_position; ++r) {
        plan.push_back(detail::make_trial("balanced", config.master_seed, q, dataset.k,
                                          Protocol::Static, 0.0, OptionPosition(o), r));
      }
    }
  }
  detail::check_unique_ids(plan);
  return plan;
}

}  // namespace strategem

#endif  // STRATEGEM_RANDOMIZATION_HPP
