#ifndef STRATEGEM_RESPONDENT_HPP
#define STRATEGEM_RESPONDENT_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/error.hpp"
#include "strategem/rng.hpp"

namespace strategem {

/// Black-box answering agent. Implementations must be callable concurrently.
///
/// respond() either returns an outcome whose selected_role matches the
/// arrangement, or throws RespondentError. It never falls back to a default.
class Respondent {
 public:
  virtual ~Respondent() = default;
  virtual TrialOutcome respond(const TrialSpec& trial, const Question& question) = 0;
  /// Upper bound on concurrent respond() calls.
  virtual std::size_t max_in_flight() const { return 1; }
};

/// A parse failure keeps the raw text so the log can retain it.
class ParseFailure : public RespondentError {
 public:
  ParseFailure(const std::string& what, std::string raw)
      : RespondentError(Kind::Parse, what), raw_(std::move(raw)) {}
  const std::string& raw_response() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// ---------------------------------------------------------------------------
// Prompt rendering and answer parsing

inline constexpr std::string_view kDirectLetterTemplate = "direct-letter-v1";

/// Stem followed by "A) ..." lines and a single-letter instruction.
inline std::string render_prompt(const Question& question, const Arrangement& arrangement,
                                 std::string_view template_id = kDirectLetterTemplate) {
  if (template_id != kDirectLetterTemplate) {
    throw ValidationError("unknown prompt template '" + std::string(template_id) + "'");
  }
  const std::size_t k = arrangement.option_count();
  std::string out = question.stem;
  out += "\n\n";
  for (std::size_t p = 0; p < k; ++p) {
    out += OptionPosition(p).label();
    out += ") ";
    out += question.content(arrangement.placement[p]);
    out += '\n';
  }
  out += "\nAnswer with a single letter (";
  for (std::size_t p = 0; p < k; ++p) {
    if (p > 0) out += (p + 1 == k) ? (k > 2 ? ", or " : " or ") : ", ";
    out += OptionPosition(p).label();
  }
  out += ") and nothing else.";
  return out;
}

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'' || c == '_';
}

inline std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

/// Extract the selected option letter from a free-text reply.
///
/// Candidates are standalone letters within the first k labels, matched
/// case-insensitively; a lowercase "a" followed by a word is the article and
/// is skipped. One distinct candidate wins. With several, the letter right
/// after the last "answer is" / "answer:" marker wins; otherwise the reply is
/// ambiguous and std::nullopt is returned.
inline std::optional<OptionPosition> parse_answer_letter(std::string_view text, std::size_t k) {
  struct Candidate {
    std::size_t offset;
    std::size_t index;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper < 'A' || static_cast<std::size_t>(upper - 'A') >= k) continue;
    if (i > 0 && detail::is_word_char(text[i - 1])) continue;
    if (i + 1 < text.size() && detail::is_word_char(text[i + 1])) continue;
    if (c == 'a') {
      std::size_t j = i + 1;
      while (j < text.size() && text[j] == ' ') ++j;
      if (j > i + 1 && j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) continue;
    }
    candidates.push_back({i, static_cast<std::size_t>(upper - 'A')});
  }
  if (candidates.empty()) return std::nullopt;

  bool all_same = true;
  for (const auto& cand : candidates) all_same = all_same && cand.index == candidates.front().index;
  if (all_same) return OptionPosition(candidates.front().index);

  // Final-answer marker: the nearest candidate after the last marker, scanning from the end.
  const std::string lower = detail::lower_ascii(text);
  std::size_t marker_end = std::string::npos;
  for (std::string_view marker : {"answer is", "answer:", "final answer", "answer -"}) {
    const auto pos = lower.rfind(marker);
    if (pos != std::string::npos) {
      const auto end = pos + marker.size();
      if (marker_end == std::string::npos || end > marker_end) marker_end = end;
    }
  }
  if (marker_end == std::string::npos) return std::nullopt;
  std::optional<Candidate> after;
  for (const auto& cand : candidates) {
    if (cand.offset >= marker_end) {
      if (after && after->index != cand.index) return std::nullopt;
      if (!after) after = cand;
    }
  }
  if (!after) return std::nullopt;
  return OptionPosition(after->index);
}

// ---------------------------------------------------------------------------
// Synthetic agents

enum class MemorizerVariant {
  /// Hits o_m when the answer is there, otherwise picks uniformly over all k.
  FallbackGuess,
  /// Always picks o_m.
  StrictMemorizer,
};

inline const char* to_string(MemorizerVariant v) {
  return v == MemorizerVariant::FallbackGuess ? "fallback_guess" : "strict_memorizer";
}

inline MemorizerVariant parse_variant(std::string_view s) {
  if (s == "fallback_guess") return MemorizerVariant::FallbackGuess;
  if (s == "strict_memorizer") return MemorizerVariant::StrictMemorizer;
  throw ValidationError("unknown memorizer variant '" + std::string(s) + "'");
}

/// Ground-truth strategy mixture for a synthetic respondent.
struct SyntheticAgentSpec {
  StrategyMix mix{0.0, 0.0, 1.0};
  OptionPosition o_m{0};
  MemorizerVariant variant = MemorizerVariant::FallbackGuess;
  double reasoning_success = 1.0;
  /// Non-uniform guessing weights over positions; empty means uniform.
  std::vector<double> guess_weights;
  /// When set, the mixture moves linearly from `mix` at theta=0 to this at theta=1.
  std::optional<StrategyMix> at_theta_1;

  void validate(std::size_t k) const {
    auto check_mix = [](const StrategyMix& m) {
      if (!(m.p_m >= 0 && m.p_r >= 0 && m.p_g >= 0) || std::abs(m.sum() - 1.0) > 1e-12) {
        throw ValidationError("synthetic agent strategy probabilities must lie on the simplex");
      }
    };
    check_mix(mix);
    if (at_theta_1) check_mix(*at_theta_1);
    o_m.check(k);
    if (!(reasoning_success >= 0.0 && reasoning_success <= 1.0)) {
      throw ValidationError("reasoning_success outside [0,1]");
    }
    if (!guess_weights.empty()) {
      if (guess_weights.size() != k) throw ValidationError("guess_weights must have k entries");
      double total = 0.0;
      for (double w : guess_weights) {
        if (!(w >= 0.0)) throw ValidationError("negative guess weight");
        total += w;
      }
      if (!(total > 0.0)) throw ValidationError("guess weights sum to zero");
    }
  }

  StrategyMix mix_at(double theta) const {
    if (!at_theta_1) return mix;
    const auto lerp = [theta](double a, double b) { return a + theta * (b - a); };
    return {lerp(mix.p_m, at_theta_1->p_m), lerp(mix.p_r, at_theta_1->p_r),
            lerp(mix.p_g, at_theta_1->p_g)};
  }
};

enum class Strategy { Memorize, Reason, Guess };

namespace detail {

inline OptionPosition uniform_position(std::size_t k, Rng& rng) {
  return OptionPosition(static_cast<std::size_t>(rng.below(k)));
}

inline OptionPosition weighted_position(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return OptionPosition(i);
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0) return OptionPosition(i);
  }
  return OptionPosition(0);
}

}  // namespace detail

/// One draw from the mixture. `theta` only matters for drifting agents.
inline TrialOutcome synthetic_respond(const SyntheticAgentSpec& spec, const Arrangement& arrangement,
                                      Rng& rng, double theta = 0.0) {
  const std::size_t k = arrangement.option_count();
  const StrategyMix mix = spec.mix_at(theta);
  const double u = rng.uniform();
  const Strategy strategy =
      u < mix.p_m ? Strategy::Memorize : (u < mix.p_m + mix.p_r ? Strategy::Reason : Strategy::Guess);

  const OptionPosition correct = arrangement.correct_position;
  OptionPosition selected;
  switch (strategy) {
    case Strategy::Memorize:
      if (spec.variant == MemorizerVariant::StrictMemorizer || correct == spec.o_m) {
        selected = spec.o_m;
      } else {
        selected = detail::uniform_position(k, rng);
      }
      break;
    case Strategy::Reason:
      if (rng.uniform() < spec.reasoning_success || k == 1) {
        selected = correct;
      } else {
        auto p = static_cast<std::size_t>(rng.below(k - 1));
        if (p >= correct.index()) ++p;
        selected = OptionPosition(p);
      }
      break;
    case Strategy::Guess:
      selected = spec.guess_weights.empty() ? detail::uniform_position(k, rng)
                                            : detail::weighted_position(spec.guess_weights, rng);
      break;
  }
  return TrialOutcome{"", selected, role_of(arrangement, selected), std::nullopt, std::nullopt};
}

/// A cohort of synthetic agents: one spec per question, with a fallback.
class SyntheticRespondent final : public Respondent {
 public:
  SyntheticRespondent() = default;
  explicit SyntheticRespondent(SyntheticAgentSpec default_spec) : default_(std::move(default_spec)) {}

  void set_default(SyntheticAgentSpec spec) { default_ = std::move(spec); }
  void set(const std::string& question_id, SyntheticAgentSpec spec) {
    per_question_[question_id] = std::move(spec);
  }

  const SyntheticAgentSpec& spec_for(const std::string& question_id) const {
    if (auto it = per_question_.find(question_id); it != per_question_.end()) return it->second;
    if (default_) return *default_;
    throw ValidationError("no synthetic agent configured for question '" + question_id + "'");
  }

  const std::optional<SyntheticAgentSpec>& default_spec() const noexcept { return default_; }
  const std::map<std::string, SyntheticAgentSpec>& per_question() const noexcept { return per_question_; }

  void validate(std::size_t k) const {
    if (default_) default_->validate(k);
    for (const auto& [id, spec] : per_question_) spec.validate(k);
  }

  /// The generator is derived from the trial seed, so results do not depend
  /// on scheduling.
  TrialOutcome respond(const TrialSpec& trial, const Question& /*question*/) override {
    Rng rng = Rng(trial.rng_seed).split("respond");
    TrialOutcome out = synthetic_respond(spec_for(trial.question_id), trial.arrangement, rng, trial.theta);
    out.trial_id = trial.trial_id;
    return out;
  }

  std::size_t max_in_flight() const override { return concurrency_; }
  void set_max_in_flight(std::size_t n) { concurrency_ = std::max<std::size_t>(1, n); }

 private:
  std::size_t concurrency_ = 1;
  std::optional<SyntheticAgentSpec> default_;
  std::map<std::string, SyntheticAgentSpec> per_question_;
};

}  // namespace strategem

#endif  // STRATEGEM_RESPONDENT_HPP
