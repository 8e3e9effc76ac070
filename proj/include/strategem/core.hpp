#ifndef STRATEGEM_CORE_HPP
#define STRATEGEM_CORE_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "strategem/error.hpp"
#include "strategem/rng.hpp"

namespace strategem {

/// Default option count (A-D).
inline constexpr std::size_t kDefaultOptionCount = 4;
/// Positions are labelled with single letters.
inline constexpr std::size_t kMaxOptionCount = 26;

/// A slot in the displayed option list; index 0 is "A".
class OptionPosition {
 public:
  constexpr OptionPosition() = default;
  constexpr explicit OptionPosition(std::size_t index) : index_(index) {}

  constexpr std::size_t index() const noexcept { return index_; }
  char label() const noexcept { return static_cast<char>('A' + index_); }
  std::string str() const { return std::string(1, label()); }

  /// Throws ValidationError unless index < k.
  void check(std::size_t k) const {
    if (index_ >= k) {
      throw ValidationError("option position " + std::to_string(index_) +
                            " out of range for k=" + std::to_string(k));
    }
  }

  static OptionPosition parse(std::string_view text) {
    if (text.size() == 1) {
      char c = text[0];
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
      if (c >= 'A' && c <= 'Z') return OptionPosition(static_cast<std::size_t>(c - 'A'));
    }
    throw ValidationError("invalid option position '" + std::string(text) + "'");
  }

  friend constexpr bool operator==(OptionPosition, OptionPosition) = default;
  friend constexpr auto operator<=>(OptionPosition, OptionPosition) = default;

 private:
  std::size_t index_ = 0;
};

/// What occupies a position: the correct content or the i-th distractor (1-based).
class ContentRole {
 public:
  constexpr ContentRole() = default;

  static constexpr ContentRole correct() { return ContentRole(0); }
  static constexpr ContentRole distractor(std::size_t i) { return ContentRole(i); }

  constexpr bool is_correct() const noexcept { return code_ == 0; }
  /// 1-based distractor index; 0 for the correct role.
  constexpr std::size_t distractor_index() const noexcept { return code_; }
  /// Dense index: 0 for correct, i for distractor i.
  constexpr std::size_t code() const noexcept { return code_; }

  std::string str() const { return is_correct() ? "C" : "D" + std::to_string(code_); }

  static ContentRole parse(std::string_view text) {
    if (text == "C") return correct();
    if (text.size() >= 2 && text[0] == 'D') {
      std::size_t value = 0;
      for (char c : text.substr(1)) {
        if (c < '0' || c > '9') throw ValidationError("invalid content role '" + std::string(text) + "'");
        value = value * 10 + static_cast<std::size_t>(c - '0');
      }
      if (value >= 1) return distractor(value);
    }
    throw ValidationError("invalid content role '" + std::string(text) + "'");
  }

  friend constexpr bool operator==(ContentRole, ContentRole) = default;
  friend constexpr auto operator<=>(ContentRole, ContentRole) = default;

 private:
  constexpr explicit ContentRole(std::size_t code) : code_(code) {}
  std::size_t code_ = 0;
};

struct Question {
  std::string id;
  std::string stem;
  std::string correct_content;
  std::vector<std::string> distractor_contents;
  OptionPosition original_correct_position{0};

  std::size_t option_count() const noexcept { return distractor_contents.size() + 1; }

  const std::string& content(ContentRole role) const {
    return role.is_correct() ? correct_content
                             : distractor_contents.at(role.distractor_index() - 1);
  }

  void validate(std::size_t k) const {
    if (id.empty()) throw ValidationError("question with empty id");
    if (distractor_contents.size() + 1 != k) {
      throw ValidationError("question '" + id + "' has " +
                            std::to_string(distractor_contents.size()) + " distractors, expected " +
                            std::to_string(k - 1));
    }
    std::unordered_set<std::string> seen{correct_content};
    for (const auto& d : distractor_contents) {
      if (!seen.insert(d).second) {
        throw ValidationError("question '" + id + "' has duplicate option content '" + d + "'");
      }
    }
    original_correct_position.check(k);
  }
};

/// Concrete placement of contents into positions.
struct Arrangement {
  std::string question_id;
  std::vector<ContentRole> placement;  // position -> role
  OptionPosition correct_position;

  std::size_t option_count() const noexcept { return placement.size(); }

  void validate() const {
    const std::size_t k = placement.size();
    if (k == 0 || k > kMaxOptionCount) throw ValidationError("arrangement has invalid option count");
    correct_position.check(k);
    std::vector<bool> seen(k, false);
    for (const auto& role : placement) {
      if (role.code() >= k || seen[role.code()]) {
        throw ValidationError("arrangement for '" + question_id + "' is not a permutation of roles");
      }
      seen[role.code()] = true;
    }
    if (!placement[correct_position.index()].is_correct()) {
      throw ValidationError("arrangement for '" + question_id +
                            "' does not place Correct at its correct_position");
    }
  }

  friend bool operator==(const Arrangement&, const Arrangement&) = default;
};

enum class Protocol { Inclusive, Exclusive, Static };
/// Which side of the Bernoulli(theta) split a trial landed on.
enum class Branch { Fixed, Randomized };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::Inclusive: return "inclusive";
    case Protocol::Exclusive: return "exclusive";
    case Protocol::Static: return "static";
  }
  return "?";
}

inline Protocol parse_protocol(std::string_view s) {
  if (s == "inclusive") return Protocol::Inclusive;
  if (s == "exclusive") return Protocol::Exclusive;
  if (s == "static") return Protocol::Static;
  throw ValidationError("unknown protocol '" + std::string(s) + "'");
}

inline const char* to_string(Branch b) { return b == Branch::Fixed ? "fixed" : "randomized"; }

inline Branch parse_branch(std::string_view s) {
  if (s == "fixed") return Branch::Fixed;
  if (s == "randomized") return Branch::Randomized;
  throw ValidationError("unknown branch '" + std::string(s) + "'");
}

/// One planned probe.
struct TrialSpec {
  std::string trial_id;
  std::string question_id;
  double theta = 0.0;
  Protocol protocol = Protocol::Static;
  OptionPosition anchor_position;
  Arrangement arrangement;
  std::uint64_t rng_seed = 0;
  Branch branch = Branch::Fixed;
  std::uint32_t replicate = 0;

  friend bool operator==(const TrialSpec&, const TrialSpec&) = default;
};

/// The respondent's selection for one trial.
struct TrialOutcome {
  std::string trial_id;
  OptionPosition selected_position;
  ContentRole selected_role;
  std::optional<std::string> raw_response;
  std::optional<std::uint64_t> latency_ms;

  friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

enum class TrialStatus { Scored, ParseFailure, TransportFailure };

inline const char* to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Scored: return "scored";
    case TrialStatus::ParseFailure: return "parse_failure";
    case TrialStatus::TransportFailure: return "transport_failure";
  }
  return "?";
}

inline TrialStatus parse_status(std::string_view s) {
  if (s == "scored") return TrialStatus::Scored;
  if (s == "parse_failure") return TrialStatus::ParseFailure;
  if (s == "transport_failure") return TrialStatus::TransportFailure;
  throw ValidationError("unknown trial status '" + std::string(s) + "'");
}

/// One line of a trial log: the plan entry joined with what happened.
struct TrialLogRecord {
  TrialSpec spec;
  TrialStatus status = TrialStatus::Scored;
  std::optional<TrialOutcome> outcome;  // present iff Scored
  std::optional<std::string> raw_response;  // kept for parse failures too
  std::string error;
  std::string manifest;

  bool scored() const noexcept { return status == TrialStatus::Scored && outcome.has_value(); }
  bool correct() const noexcept { return scored() && outcome->selected_role.is_correct(); }
  OptionPosition correct_position() const noexcept { return spec.arrangement.correct_position; }

  void validate() const {
    if (status == TrialStatus::Scored) {
      if (!outcome) throw ValidationError("scored record " + spec.trial_id + " lacks an outcome");
      if (outcome->trial_id != spec.trial_id) throw ValidationError("outcome/spec trial id mismatch");
      if (role_of_position(outcome->selected_position) != outcome->selected_role) {
        throw ValidationError("record " + spec.trial_id + " selected_role does not match placement");
      }
    } else if (error.empty()) {
      throw ValidationError("failure record " + spec.trial_id + " lacks an error string");
    }
  }

 private:
  ContentRole role_of_position(OptionPosition p) const { return spec.arrangement.placement.at(p.index()); }
};

/// Memorization / reasoning / guessing probabilities.
struct StrategyMix {
  double p_m = 0.0;
  double p_r = 0.0;
  double p_g = 0.0;

  double sum() const noexcept { return p_m + p_r + p_g; }
  bool on_simplex(double tol) const noexcept {
    return p_m >= -tol && p_r >= -tol && p_g >= -tol && std::abs(sum() - 1.0) <= tol;
  }
  friend bool operator==(const StrategyMix&, const StrategyMix&) = default;
};

/// Distribution over the k positions (or roles); normalized on construction.
class PositionDistribution {
 public:
  static constexpr double kTolerance = 1e-9;

  static PositionDistribution from_probs(std::vector<double> probs) {
    if (probs.empty()) throw ValidationError("empty distribution");
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0,1]");
      total += p;
    }
    if (std::abs(total - 1.0) > kTolerance) throw ValidationError("probabilities do not sum to 1");
    return PositionDistribution(std::move(probs));
  }

  template <typename Count>
  static PositionDistribution from_counts(std::span<const Count> counts) {
    double total = 0.0;
    for (auto c : counts) {
      if (c < 0) throw ValidationError("negative count");
      total += static_cast<double>(c);
    }
    if (counts.empty() || total <= 0.0) throw ValidationError("distribution from zero total count");
    std::vector<double> probs;
    probs.reserve(counts.size());
    for (auto c : counts) probs.push_back(static_cast<double>(c) / total);
    return PositionDistribution(std::move(probs));
  }

  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_.at(i); }

 private:
  explicit PositionDistribution(std::vector<double> p) : probs_(std::move(p)) {}
  std::vector<double> probs_;
};

/// A validated question set with a run-level option count k.
struct Dataset {
  std::size_t k = kDefaultOptionCount;
  std::vector<Question> questions;

  void validate() const {
    if (questions.empty()) throw ValidationError("empty dataset");
    if (k < 2 || k > kMaxOptionCount) throw ValidationError("option count k=" + std::to_string(k) + " unsupported");
    std::unordered_set<std::string> ids;
    for (const auto& q : questions) {
      q.validate(k);
      if (!ids.insert(q.id).second) throw ValidationError("duplicate question id '" + q.id + "'");
    }
  }

  const Question& find(std::string_view id) const {
    for (const auto& q : questions) {
      if (q.id == id) return q;
    }
    throw ValidationError("unknown question id '" + std::string(id) + "'");
  }
};

/// Place Correct at `correct_position` and shuffle the distractors over the rest.
inline Arrangement arrange(const Question& question, OptionPosition correct_position, Rng& rng) {
  const std::size_t k = question.option_count();
  correct_position.check(k);
  std::vector<ContentRole> distractors;
  distractors.reserve(k - 1);
  for (std::size_t i = 1; i < k; ++i) distractors.push_back(ContentRole::distractor(i));
  rng.shuffle(distractors.begin(), distractors.end());

  Arrangement arr{question.id, std::vector<ContentRole>(k), correct_position};
  std::size_t next = 0;
  for (std::size_t p = 0; p < k; ++p) {
    arr.placement[p] = (p == correct_position.index()) ? ContentRole::correct() : distractors[next++];
  }
  return arr;
}

inline ContentRole role_of(const Arrangement& arrangement, OptionPosition position) {
  return arrangement.placement.at(position.index());
}

/// Inverse of role_of.
inline OptionPosition position_of(const Arrangement& arrangement, ContentRole role) {
  for (std::size_t p = 0; p < arrangement.placement.size(); ++p) {
    if (arrangement.placement[p] == role) return OptionPosition(p);
  }
  throw ValidationError("role " + role.str() + " not present in arrangement");
}

}  // namespace strategem

#endif  // STRATEGEM_CORE_HPP
