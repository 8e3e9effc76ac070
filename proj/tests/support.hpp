#pragma once

#include <string>
#include <vector>

#include "strategem/core.hpp"

namespace strategem::fixtures {

inline Question make_question(const std::string& id, std::size_t k, std::size_t original = 0) {
  Question q;
  q.id = id;
  q.stem = "Question " + id + "?";
  q.correct_content = id + "-right";
  for (std::size_t i = 1; i < k; ++i) q.distractor_contents.push_back(id + "-wrong" + std::to_string(i));
  q.original_correct_position = OptionPosition(original);
  return q;
}

inline Dataset make_dataset(std::size_t n, std::size_t k, const std::string& prefix = "q") {
  Dataset ds;
  ds.k = k;
  for (std::size_t i = 0; i < n; ++i) ds.questions.push_back(make_question(prefix + std::to_string(i), k, i % k));
  return ds;
}

/// Arrangement with Correct at `correct` and distractors D1.. in order elsewhere.
inline Arrangement ordered_arrangement(const std::string& qid, std::size_t k, std::size_t correct) {
  Arrangement a{qid, std::vector<ContentRole>(k), OptionPosition(correct)};
  std::size_t d = 1;
  for (std::size_t p = 0; p < k; ++p) a.placement[p] = p == correct ? ContentRole::correct() : ContentRole::distractor(d++);
  return a;
}

inline TrialLogRecord scored(const std::string& qid, std::size_t k, std::size_t correct, std::size_t selected,
                             double theta = 0.0, Protocol protocol = Protocol::Static, std::size_t anchor = 0,
                             std::uint32_t replicate = 0) {
  TrialLogRecord r;
  r.spec.question_id = qid;
  r.spec.trial_id = qid + "/" + std::to_string(correct) + "/" + std::to_string(selected) + "/" + std::to_string(replicate);
  r.spec.theta = theta;
  r.spec.protocol = protocol;
  r.spec.anchor_position = OptionPosition(anchor);
  r.spec.replicate = replicate;
  r.spec.arrangement = ordered_arrangement(qid, k, correct);
  r.status = TrialStatus::Scored;
  r.outcome = TrialOutcome{r.spec.trial_id, OptionPosition(selected), r.spec.arrangement.placement[selected],
                           std::nullopt, std::nullopt};
  return r;
}

/// `n` records at each correct position; the first `hits[o]` are correct and the rest pick the next slot.
inline std::vector<TrialLogRecord> balanced_records(const std::string& qid, std::size_t k, std::size_t n,
                                                    const std::vector<std::size_t>& hits) {
  std::vector<TrialLogRecord> out;
  for (std::size_t o = 0; o < k; ++o) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t sel = i < hits[o] ? o : (o + 1) % k;
      out.push_back(scored(qid, k, o, sel, 0.0, Protocol::Static, o, static_cast<std::uint32_t>(i)));
    }
  }
  return out;
}

}  // namespace strategem::fixtures
