#ifndef STRATEGEM_PIPELINE_HPP
#define STRATEGEM_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/fields.hpp"
#include "strategem/http_respondent.hpp"
#include "strategem/io.hpp"
#include "strategem/itc.hpp"
#include "strategem/metrics.hpp"
#include "strategem/pmm.hpp"
#include "strategem/randomization.hpp"
#include "strategem/respondent.hpp"

namespace strategem {

// ---------------------------------------------------------------------------
// Plans

inline std::vector<TrialSpec> build_plan(const Dataset& ds, const RunManifest& m) {
  if (dataset_fingerprint(ds) != m.dataset_fingerprint) {
    throw ValidationError("dataset does not match the manifest fingerprint " + m.dataset_fingerprint);
  }
  if (m.design == Design::Sweep) {
    auto cfg = m.sweep;
    cfg.master_seed = m.master_seed;
    return build_sweep_plan(ds, cfg);
  }
  auto cfg = m.balanced;
  cfg.master_seed = m.master_seed;
  return build_balanced_plan(ds, cfg);
}

inline std::string plan_jsonl(const std::vector<TrialSpec>& plan, const std::string& manifest_hash) {
  std::string out;
  for (const auto& t : plan) {
    json j = to_json(t);
    j["manifest"] = manifest_hash;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<TrialSpec> load_plan(const std::filesystem::path& path, const std::string& manifest_hash) {
  const auto content = parse_jsonl(read_file(path), path.string(), false);
  std::vector<TrialSpec> plan;
  plan.reserve(content.lines.size());
  for (const auto& j : content.lines) {
    if (detail::field_as<std::string>(j, "manifest", path.string()) != manifest_hash) {
      throw ValidationError(path.string() + ": plan entry references a different manifest");
    }
    plan.push_back(trial_spec_from_json(j, path.string()));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Execution

struct RunOptions {
  /// 0 uses the respondent's max_in_flight.
  std::size_t workers = 0;
  /// Stop after this many new records. Used to simulate interruption.
  std::optional<std::size_t> limit;
};

struct RunReport {
  std::size_t planned = 0;
  std::size_t resumed_from = 0;
  std::size_t executed = 0;
  std::map<TrialStatus, std::size_t> status_counts;
  bool complete() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, c] : status_counts) n += c;
    return n == planned;
  }
  std::size_t count(TrialStatus s) const {
    auto it = status_counts.find(s);
    return it == status_counts.end() ? 0 : it->second;
  }
};

inline TrialLogRecord execute_trial(const TrialSpec& spec, const Question& q, Respondent& respondent,
                                    const std::string& manifest_hash) {
  TrialLogRecord rec;
  rec.spec = spec;
  rec.manifest = manifest_hash;
  try {
    auto out = respondent.respond(spec, q);
    out.trial_id = spec.trial_id;
    rec.status = TrialStatus::Scored;
    rec.raw_response = out.raw_response;
    rec.outcome = std::move(out);
  } catch (const ParseFailure& e) {
    rec.status = TrialStatus::ParseFailure;
    rec.raw_response = e.raw_response();
    rec.error = std::string("parse: ") + e.what();
  } catch (const RespondentError& e) {
    rec.status = TrialStatus::TransportFailure;
    rec.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  rec.validate();
  return rec;
}

/// Execute the plan, appending one JSONL record per trial to `log_path` in plan
/// order. An existing log must be a prefix of the plan; a torn trailing line is
/// discarded and the run resumes after the last complete record. Respondent
/// errors become failure records; anything else aborts after the workers stop.
inline RunReport run_plan(const std::vector<TrialSpec>& plan, const Dataset& ds, Respondent& respondent,
                          const std::filesystem::path& log_path, const std::string& manifest_hash,
                          RunOptions options = {}) {
  RunReport report;
  report.planned = plan.size();

  std::size_t start = 0;
  if (std::filesystem::exists(log_path)) {
    const auto text = read_file(log_path);
    const auto content = parse_jsonl(text, log_path.string(), true);
    if (content.lines.size() > plan.size()) throw ValidationError("log has more records than the plan");
    for (std::size_t i = 0; i < content.lines.size(); ++i) {
      const auto rec = log_record_from_json(content.lines[i], log_path.string());
      if (rec.spec.trial_id != plan[i].trial_id) {
        throw ValidationError("plan/log id mismatch at record " + std::to_string(i) + ": log has " +
                              rec.spec.trial_id + ", plan has " + plan[i].trial_id);
      }
      if (rec.manifest != manifest_hash) throw ValidationError("log record " + rec.spec.trial_id + " has another manifest");
      ++report.status_counts[rec.status];
    }
    if (content.complete_bytes != text.size()) std::filesystem::resize_file(log_path, content.complete_bytes);
    start = content.lines.size();
  } else if (log_path.has_parent_path()) {
    std::filesystem::create_directories(log_path.parent_path());
  }
  report.resumed_from = start;

  std::size_t end = plan.size();
  if (options.limit) end = std::min(end, start + *options.limit);
  if (start >= end) return report;

  std::unordered_map<std::string, const Question*> questions;
  for (const auto& q : ds.questions) questions[q.id] = &q;
  for (std::size_t i = start; i < end; ++i) {
    if (!questions.count(plan[i].question_id)) {
      throw ValidationError("plan references unknown question '" + plan[i].question_id + "'");
    }
  }

  std::ofstream out(log_path, std::ios::binary | std::ios::app);
  if (!out) throw ValidationError("cannot append to '" + log_path.string() + "'");

  std::mutex mu;
  std::map<std::size_t, TrialLogRecord> pending;  // reorder buffer
  std::size_t next_commit = start;
  std::atomic<std::size_t> next_task{start};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;

  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next_task.fetch_add(1);
      if (i >= end) return;
      try {
        auto rec = execute_trial(plan[i], *questions.at(plan[i].question_id), respondent, manifest_hash);
        std::lock_guard lock(mu);
        pending.emplace(i, std::move(rec));
        while (!pending.empty() && pending.begin()->first == next_commit) {
          auto& r = pending.begin()->second;
          out << to_json(r).dump() << '\n';
          ++report.status_counts[r.status];
          ++report.executed;
          pending.erase(pending.begin());
          ++next_commit;
        }
        out.flush();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };

  std::size_t workers = options.workers ? options.workers : respondent.max_in_flight();
  workers = std::clamp<std::size_t>(workers, 1, end - start);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return report;
}

/// Build the respondent described by a manifest.
struct RespondentHandle {
  std::unique_ptr<Respondent> respondent;
  std::unique_ptr<ResponseCache> cache;
};

inline json http_respondent_json(const HttpRespondentConfig& c) {
  return {{"kind", "http"},
          {"base_url", c.base_url},
          {"model", c.model_name},
          {"temperature", c.temperature},
          {"max_in_flight", c.max_in_flight},
          {"max_attempts", c.retry.max_attempts},
          {"backoff_ms", c.retry.backoff_ms},
          {"timeout_ms", c.timeout_ms},
          {"prompt_template", c.prompt_template_id}};
}

inline HttpRespondentConfig http_config_from_json(const json& j) {
  HttpRespondentConfig c;
  const std::string at = "manifest.respondent";
  c.base_url = detail::field_as<std::string>(j, "base_url", at);
  c.model_name = detail::field_as<std::string>(j, "model", at);
  c.temperature = detail::field_as<double>(j, "temperature", at);
  c.max_in_flight = detail::field_as<std::size_t>(j, "max_in_flight", at);
  c.retry.max_attempts = detail::field_as<std::uint32_t>(j, "max_attempts", at);
  c.retry.backoff_ms = detail::field_as<std::vector<std::uint32_t>>(j, "backoff_ms", at);
  c.timeout_ms = detail::field_as<std::uint32_t>(j, "timeout_ms", at);
  c.prompt_template_id = detail::field_as<std::string>(j, "prompt_template", at);
  c.validate();
  return c;
}

inline json synthetic_respondent_json(const SyntheticRespondent& r) {
  return {{"kind", "synthetic"}, {"agents", to_json(r)}};
}

/// `base_url_override` replaces the recorded URL (where the service lives is
/// not part of the experiment's identity).
inline RespondentHandle make_respondent(const RunManifest& m, const std::filesystem::path& cache_path,
                                        std::optional<std::string> base_url_override = {},
                                        std::size_t synthetic_workers = 1) {
  RespondentHandle h;
  const auto kind = detail::field_as<std::string>(m.respondent, "kind", "manifest.respondent");
  if (kind == "synthetic") {
    auto r = std::make_unique<SyntheticRespondent>(synthetic_from_json(m.respondent.at("agents"), m.k));
    r->set_max_in_flight(synthetic_workers);
    h.respondent = std::move(r);
  } else if (kind == "http") {
    auto cfg = http_config_from_json(m.respondent);
    if (base_url_override) cfg.base_url = *base_url_override;
    h.cache = std::make_unique<ResponseCache>(cache_path);
    h.respondent = std::make_unique<HttpRespondent>(cfg, h.cache.get());
  } else {
    throw ValidationError("unknown respondent kind '" + kind + "'");
  }
  return h;
}

inline std::vector<TrialLogRecord> load_log(const std::filesystem::path& path, bool tolerate_torn_tail = false) {
  const auto content = parse_jsonl(read_file(path), path.string(), tolerate_torn_tail);
  std::vector<TrialLogRecord> out;
  out.reserve(content.lines.size());
  for (const auto& j : content.lines) out.push_back(log_record_from_json(j, path.string()));
  return out;
}

// ---------------------------------------------------------------------------
// Analysis

struct AnalyzeOptions {
  bool allow_partial = false;
  double field_spacing = 0.05;
  std::uint32_t permutations = 10000;
  /// Average trajectories over questions before differencing.
  bool ensemble_flow = false;
  ProjectionOptions projection;
};

/// Intermediate results shared by the report and field writers.
struct Analysis {
  RunManifest manifest;
  std::string manifest_hash;
  const Dataset* dataset = nullptr;
  std::vector<TrialLogRecord> records;  // plan order
  std::size_t planned = 0;
  std::size_t missing = 0;

  std::vector<TrialLogRecord> base;  // balanced-equivalent subset
  std::vector<PositionAccuracy> positions;
  std::vector<std::pair<Protocol, PositionAccuracy>> grouped_positions;
  std::vector<StrategyEstimate> estimates;
  std::vector<ValidationRecord> validation;
  std::vector<EntropyAccuracyPoint> entropy;
  std::vector<SweepCurve> curves;
  std::vector<ThetaResolved> resolved;
  std::vector<std::string> notes;
};

namespace detail {

inline std::string protocol_anchor(Protocol p, OptionPosition a) { return std::string(to_string(p)) + "/" + a.str(); }

}  // namespace detail

inline Analysis prepare_analysis(const Dataset& ds, const RunManifest& manifest, std::vector<TrialLogRecord> records,
                                 const AnalyzeOptions& opt) {
  Analysis a;
  a.manifest = manifest;
  a.manifest_hash = manifest.hash();
  a.dataset = &ds;
  const auto plan = build_plan(ds, manifest);
  a.planned = plan.size();
  std::unordered_map<std::string, std::size_t> plan_index;
  plan_index.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) plan_index.emplace(plan[i].trial_id, i);

  std::vector<std::optional<TrialLogRecord>> slots(plan.size());
  for (auto& r : records) {
    if (r.manifest != a.manifest_hash) {
      throw ValidationError("log record " + r.spec.trial_id + " references unknown manifest " + r.manifest);
    }
    auto it = plan_index.find(r.spec.trial_id);
    if (it == plan_index.end()) throw ValidationError("log record " + r.spec.trial_id + " is not in the plan");
    if (!(r.spec == plan[it->second])) throw ValidationError("log record " + r.spec.trial_id + " differs from its plan entry");
    auto& slot = slots[it->second];
    if (slot) {
      if (to_json(*slot) != to_json(r)) throw ValidationError("conflicting duplicate records for " + r.spec.trial_id);
      continue;
    }
    slot = std::move(r);
  }
  for (auto& s : slots) {
    if (s) {
      a.records.push_back(std::move(*s));
    } else {
      ++a.missing;
    }
  }
  if (a.missing > 0 && !opt.allow_partial) {
    throw ValidationError("log is partial: " + std::to_string(a.missing) + " of " + std::to_string(a.planned) +
                          " trials missing (pass --allow-partial to analyze anyway)");
  }

  const std::size_t k = ds.k;
  // Balanced-equivalent subset: the whole balanced design, or theta = 0 of one
  // sweep protocol (both protocols coincide there).
  if (manifest.design == Design::Balanced) {
    a.base = a.records;
  } else {
    auto protocols = manifest.sweep.protocols;
    std::sort(protocols.begin(), protocols.end());
    const bool has_zero = std::find(manifest.sweep.theta_grid.begin(), manifest.sweep.theta_grid.end(), 0.0) !=
                          manifest.sweep.theta_grid.end();
    if (has_zero) {
      for (const auto& r : a.records) {
        if (r.spec.theta == 0.0 && r.spec.protocol == protocols.front()) a.base.push_back(r);
      }
    } else {
      a.notes.push_back("strategy: theta grid has no 0, no balanced-equivalent subset");
    }
  }

  // Positions per (question, protocol, theta).
  std::map<std::string, std::map<std::pair<Protocol, double>, std::vector<TrialLogRecord>>> groups;
  for (const auto& r : a.records) groups[r.spec.question_id][{r.spec.protocol, r.spec.theta}].push_back(r);
  std::map<std::string, std::vector<TrialLogRecord>> base_by_q;
  for (const auto& r : a.base) base_by_q[r.spec.question_id].push_back(r);

  std::size_t skipped = 0;
  for (const auto& q : ds.questions) {
    if (auto it = groups.find(q.id); it != groups.end()) {
      for (const auto& [key, recs] : it->second) a.grouped_positions.emplace_back(key.first, position_accuracy(recs, k));
    }
    auto bit = base_by_q.find(q.id);
    if (bit == base_by_q.end()) continue;
    auto acc = position_accuracy(bit->second, k);
    a.positions.push_back(acc);
    try {
      const auto o_m = select_memorized_position(acc, manifest.o_m_policy, q.original_correct_position);
      auto e = estimate_question(acc, o_m);
      a.validation.push_back(validate_question(e, acc));
      a.estimates.push_back(std::move(e));
    } catch (const ValidationError&) {
      ++skipped;
    }
  }
  if (skipped) a.notes.push_back("strategy: " + std::to_string(skipped) + " question(s) lacked trials at some position");

  if (!a.base.empty()) {
    try {
      a.entropy = entropy_accuracy_points(a.base, k, manifest.entropy_mode);
    } catch (const ValidationError& e) {
      a.notes.push_back(std::string("entropy: ") + e.what());
    }
  }

  if (manifest.design == Design::Sweep) {
    a.curves = sweep_curves(a.records, manifest.sweep.theta_grid);
    std::map<std::string, OptionPosition> o_m;
    for (const auto& e : a.estimates) o_m[e.question_id] = e.o_m;
    auto o_m_of = [&](const std::string& qid) {
      if (auto it = o_m.find(qid); it != o_m.end()) return it->second;
      return ds.find(qid).original_correct_position;
    };
    std::vector<OptionPosition> anchors = manifest.sweep.anchor_positions;
    if (anchors.empty()) {
      for (std::size_t i = 0; i < k; ++i) anchors.emplace_back(i);
    }
    std::sort(anchors.begin(), anchors.end());
    auto protocols = manifest.sweep.protocols;
    std::sort(protocols.begin(), protocols.end());
    for (auto p : protocols) {
      for (auto anchor : anchors) {
        a.resolved.push_back(theta_resolved_estimates(a.records, p, anchor, manifest.sweep.theta_grid, o_m_of, k));
      }
    }
  }
  return a;
}

using Bundle = std::map<std::string, std::string>;

inline void add_field_files(Bundle& files, const Analysis& a, const AnalyzeOptions& opt, json& summary_fields) {
  const std::string& h = a.manifest_hash;
  const std::size_t k = a.dataset->k;

  // Scalar fields over the simplex from per-question estimates.
  std::map<std::string, StrategyMix> mix;
  for (const auto& e : a.estimates) mix[e.question_id] = e.mix;
  std::vector<ScalarSample> acc_samples, ent_samples;
  for (const auto& pt : a.entropy) {
    auto it = mix.find(pt.question_id);
    if (it == mix.end()) continue;
    const auto at = SimplexPoint::from(it->second);
    acc_samples.push_back({at, pt.accuracy});
    if (pt.entropy_bits) ent_samples.push_back({at, std::clamp(*pt.entropy_bits, 0.0, std::log2(double(k)))});
  }
  auto scalar_csv = [&](const std::vector<ScalarSample>& samples, ScalarKind kind) {
    CsvWriter csv(h, {"p_m", "p_r", "p_g", "x", "y", to_string(kind)});
    if (!samples.empty()) {
      const auto f = interpolate_scalar(samples, kind, opt.field_spacing, k);
      for (const auto& nd : f.nodes) csv.row({nd.at.p_m, nd.at.p_r, nd.at.p_g, nd.xy.x, nd.xy.y, nd.value});
    }
    return csv.str();
  };
  files["accuracy_field.csv"] = scalar_csv(acc_samples, ScalarKind::Accuracy);
  files["entropy_field.csv"] = scalar_csv(ent_samples, ScalarKind::Entropy);
  summary_fields["scalar_sites"] = acc_samples.size();
  summary_fields["spacing"] = opt.field_spacing;

  // Trajectories and flow, sweep designs only.
  CsvWriter traj_csv(h, {"question_id", "protocol", "anchor", "theta", "p_m", "p_r", "p_g", "x", "y"});
  json flows = json::object();
  std::map<Protocol, std::vector<Trajectory>> by_protocol;
  for (const auto& res : a.resolved) {
    std::vector<Trajectory> trajs;
    try {
      trajs = trajectories(res.cells);
    } catch (const ValidationError&) {
      continue;
    }
    for (auto& t : trajs) {
      for (const auto& [theta, p] : t.points) {
        const auto xy = barycentric_to_cartesian(p);
        traj_csv.row({t.question_id, std::string(to_string(t.protocol)), t.anchor.str(), theta, p.p_m, p.p_r, p.p_g,
                      xy.x, xy.y});
      }
      by_protocol[t.protocol].push_back(std::move(t));
    }
  }
  files["trajectories.csv"] = traj_csv.str();

  for (auto& [protocol, trajs] : by_protocol) {
    const std::string name = std::string("flow_") + to_string(protocol) + ".csv";
    json info;
    CsvWriter csv(h, {"p_m", "p_r", "p_g", "x", "y", "boundary", "d_m", "d_r", "d_g", "w_m", "w_r", "w_g", "vx",
                      "vy", "wx", "wy", "divergence_residual"});
    // Keep only polylines on a uniform grid.
    std::vector<Trajectory> usable;
    for (const auto& t : trajs) {
      bool uniform = t.points.size() >= 2;
      for (std::size_t i = 2; uniform && i < t.points.size(); ++i) {
        uniform = std::abs((t.points[i].first - t.points[i - 1].first) - (t.points[1].first - t.points[0].first)) <= 1e-9;
      }
      if (uniform) usable.push_back(t);
    }
    if (opt.ensemble_flow && !usable.empty()) {
      std::map<std::pair<OptionPosition, double>, std::pair<SimplexPoint, std::size_t>> sums;
      for (const auto& t : usable) {
        for (const auto& [theta, p] : t.points) {
          auto& s = sums[{t.anchor, theta}];
          s.first.p_m += p.p_m;
          s.first.p_r += p.p_r;
          s.first.p_g += p.p_g;
          ++s.second;
        }
      }
      std::map<OptionPosition, Trajectory> ens;
      for (const auto& [key, s] : sums) {
        auto& t = ens[key.first];
        t.question_id = "ensemble/" + key.first.str();
        t.protocol = protocol;
        t.anchor = key.first;
        const double n = static_cast<double>(s.second);
        t.points.emplace_back(key.second, SimplexPoint{s.first.p_m / n, s.first.p_r / n, s.first.p_g / n});
      }
      usable.clear();
      for (auto& [_, t] : ens) usable.push_back(std::move(t));
    }
    try {
      const auto samples = finite_difference_flow(usable);
      const auto field = interpolate_flow(samples, opt.field_spacing, opt.projection);
      for (const auto& nd : field.nodes) {
        const auto v = tangent_to_cartesian(nd.interpolated);
        const auto w = tangent_to_cartesian(nd.projected);
        csv.row({nd.at.p_m, nd.at.p_r, nd.at.p_g, nd.xy.x, nd.xy.y, nd.boundary, nd.interpolated.d_m,
                 nd.interpolated.d_r, nd.interpolated.d_g, nd.projected.d_m, nd.projected.d_r, nd.projected.d_g, v.x,
                 v.y, w.x, w.y, nd.divergence_residual});
      }
      info = {{"sites", samples.size()},
              {"method", FlowField::kMethod},
              {"solver_iterations", field.projection.iterations},
              {"solver_residual", field.projection.poisson_residual},
              {"converged", field.projection.converged},
              {"max_interior_divergence", field.max_interior_residual()}};
    } catch (const ValidationError& e) {
      info = {{"unavailable", e.what()}};
    }
    files[name] = csv.str();
    flows[to_string(protocol)] = info;
  }
  summary_fields["flow"] = flows;
}

inline Bundle report_bundle(const Analysis& a, const AnalyzeOptions& opt) {
  Bundle files;
  const std::string& h = a.manifest_hash;
  const std::size_t k = a.dataset->k;

  {
    CsvWriter csv(h, {"question_id", "protocol", "theta", "position", "n", "correct", "alpha"});
    for (const auto& [protocol, acc] : a.grouped_positions) {
      for (std::size_t o = 0; o < k; ++o) {
        csv.row({acc.question_id, std::string(to_string(protocol)), acc.theta, OptionPosition(o).str(),
                 std::uint64_t{acc.counts[o]}, std::uint64_t{acc.correct[o]}, acc.alpha[o]});
      }
    }
    files["positions.csv"] = csv.str();
  }

  std::map<std::string, std::size_t> region_counts;
  {
    CsvWriter csv(h, {"question_id", "protocol", "theta", "mu", "sigma2", "region"});
    for (const auto& [protocol, acc] : a.grouped_positions) {
      if (!acc.complete()) continue;
      const auto d = difficulty_map(acc);
      csv.row({d.question_id, std::string(to_string(protocol)), acc.theta, d.mu, d.sigma2, std::string(to_string(d.region))});
    }
    for (const auto& acc : a.positions) {
      if (acc.complete()) ++region_counts[to_string(difficulty_map(acc).region)];
    }
    files["difficulty.csv"] = csv.str();
  }

  {
    const auto m = wrong_answer_distribution(a.base, k);
    CsvWriter csv(h, {"correct_position", "selected_position", "probability", "row_total"});
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t s = 0; s < k; ++s) {
        csv.row({OptionPosition(c).str(), OptionPosition(s).str(), m.rows[c][s], std::uint64_t{m.row_totals[c]}});
      }
    }
    files["wrong_matrix.csv"] = csv.str();
  }

  json gaps = json::array();
  {
    CsvWriter csv(h, {"protocol", "anchor", "theta", "mean", "se", "var_trials", "var_questions", "n", "n_questions"});
    CsvWriter dcsv(h, {"anchor", "theta", "delta_mu"});
    std::map<OptionPosition, const SweepCurve*> inc, exc;
    for (const auto& c : a.curves) {
      for (const auto& p : c.points) {
        csv.row({std::string(to_string(c.protocol)), c.anchor.str(), p.theta, p.mean, p.se, p.var_trials, p.var_questions,
                 std::uint64_t{p.n}, std::uint64_t{p.n_questions}});
      }
      for (double g : c.gaps) gaps.push_back({{"curve", detail::protocol_anchor(c.protocol, c.anchor)}, {"theta", g}});
      (c.protocol == Protocol::Inclusive ? inc : exc)[c.anchor] = &c;
    }
    for (const auto& [anchor, ic] : inc) {
      auto it = exc.find(anchor);
      if (it == exc.end()) continue;
      try {
        for (const auto& [theta, d] : delta_mu(*ic, *it->second).points) dcsv.row({anchor.str(), theta, d});
      } catch (const ValidationError&) {
      }
    }
    files["sweeps.csv"] = csv.str();
    files["delta_mu.csv"] = dcsv.str();
  }

  std::size_t violations = 0;
  StrategyMix mean_mix;
  {
    CsvWriter csv(h, {"question_id", "o_m", "a_om", "a_other", "raw_p_m", "raw_p_r", "raw_p_g", "p_m", "p_r", "p_g",
                      "p_m_out_of_range", "p_r_negative", "p_g_negative", "clamped", "alpha_observed",
                      "alpha_expected", "delta_alpha"});
    for (std::size_t i = 0; i < a.estimates.size(); ++i) {
      const auto& e = a.estimates[i];
      const auto& v = a.validation[i];
      csv.row({e.question_id, e.o_m.str(), e.a_om, e.a_other, e.raw.p_m, e.raw.p_r, e.raw.p_g, e.mix.p_m, e.mix.p_r,
               e.mix.p_g, e.violation.p_m_out_of_range, e.violation.p_r_negative, e.violation.p_g_negative, e.clamped,
               v.alpha_observed, v.alpha_expected, v.delta_alpha});
      if (e.clamped) ++violations;
      const double n = static_cast<double>(a.estimates.size());
      mean_mix.p_m += e.mix.p_m / n;
      mean_mix.p_r += e.mix.p_r / n;
      mean_mix.p_g += e.mix.p_g / n;
    }
    files["strategy.csv"] = csv.str();
  }

  {
    CsvWriter csv(h, {"protocol", "anchor", "theta", "mean_p_m", "mean_p_r", "mean_p_g", "sd_p_m", "sd_p_r", "sd_p_g",
                      "n_questions", "violation_rate"});
    for (const auto& res : a.resolved) {
      for (const auto& p : res.curve.points) {
        const bool empty = p.n_questions == 0;
        auto val = [&](double x) { return empty ? std::optional<double>{} : std::optional<double>{x}; };
        csv.row({std::string(to_string(res.curve.protocol)), res.curve.anchor.str(), p.theta, val(p.mean.p_m),
                 val(p.mean.p_r), val(p.mean.p_g), val(p.sd.p_m), val(p.sd.p_r), val(p.sd.p_g),
                 std::uint64_t{p.n_questions}, val(p.violation_rate)});
      }
    }
    files["ensemble.csv"] = csv.str();
  }

  std::optional<double> mean_gap;
  {
    std::vector<std::string> header{"question_id", "accuracy", "entropy_bits", "ideal_entropy_bits", "calibration_gap"};
    for (std::size_t i = 0; i < k; ++i) header.push_back("count_" + (i == 0 ? std::string("C") : ContentRole::distractor(i).str()));
    CsvWriter csv(h, header);
    double gap_sum = 0.0;
    std::size_t gap_n = 0;
    for (const auto& pt : a.entropy) {
      std::vector<CsvWriter::Cell> row{pt.question_id, pt.accuracy, pt.entropy_bits, pt.ideal_entropy_bits,
                                       pt.calibration_gap};
      for (auto c : pt.selection_counts) row.emplace_back(std::uint64_t{c});
      csv.row(row);
      if (pt.calibration_gap) {
        gap_sum += *pt.calibration_gap;
        ++gap_n;
      }
    }
    if (gap_n) mean_gap = gap_sum / static_cast<double>(gap_n);
    files["entropy.csv"] = csv.str();
  }

  {
    json j{{"manifest", h}, {"permutations", opt.permutations}};
    try {
      const auto rep = strategy_metric_correlations(a.estimates, a.entropy,
                                                    {opt.permutations, derive_seed(a.manifest.master_seed, "correlations")});
      json cells = json::array();
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t s = 0; s < 3; ++s) {
          cells.push_back({{"metric", CorrelationReport::kMetrics[i]},
                           {"strategy", CorrelationReport::kStrategies[s]},
                           {"r", optional_json(rep.r[i][s])},
                           {"p_value", optional_json(rep.p_value[i][s])}});
        }
      }
      j["n"] = rep.n;
      j["seed"] = rep.seed;
      j["correlations"] = cells;
    } catch (const ValidationError& e) {
      j["unavailable"] = e.what();
    }
    files["correlations.json"] = j.dump(2) + "\n";
  }

  {
    CsvWriter csv(h, {"k", "accuracy", "ideal_entropy_bits"});
    std::set<std::size_t> ks{k, 2, 3, 4, 5, 6};
    for (auto kk : ks) {
      for (const auto& [acc, ent] : frontier_grid(kk, 200)) csv.row({std::uint64_t{kk}, acc, ent});
    }
    files["frontier.csv"] = csv.str();
  }

  json fields = json::object();
  add_field_files(files, a, opt, fields);

  std::map<TrialStatus, std::size_t> counts;
  std::uint64_t scored = 0, correct = 0;
  for (const auto& r : a.records) {
    ++counts[r.status];
    if (r.scored()) {
      ++scored;
      if (r.correct()) ++correct;
    }
  }
  const double n_records = static_cast<double>(a.records.size());
  auto rate = [&](TrialStatus s) { return a.records.empty() ? 0.0 : static_cast<double>(counts[s]) / n_records; };
  json status = json::object();
  for (auto s : {TrialStatus::Scored, TrialStatus::ParseFailure, TrialStatus::TransportFailure}) status[to_string(s)] = counts[s];
  json summary{
      {"manifest_version", a.manifest.manifest_version},
      {"manifest", h},
      {"k", k},
      {"design", to_string(a.manifest.design)},
      {"questions", a.dataset->questions.size()},
      {"planned_trials", a.planned},
      {"logged_trials", a.records.size()},
      {"partial", a.missing > 0},
      {"status_counts", status},
      {"parse_failure_rate", rate(TrialStatus::ParseFailure)},
      {"transport_failure_rate", rate(TrialStatus::TransportFailure)},
      {"accuracy", scored ? json(static_cast<double>(correct) / static_cast<double>(scored)) : json(nullptr)},
      {"strategy_questions", a.estimates.size()},
      {"mean_strategy", a.estimates.empty() ? json(nullptr) : to_json(mean_mix)},
      {"violation_rate", a.estimates.empty() ? json(nullptr)
                                             : json(static_cast<double>(violations) / static_cast<double>(a.estimates.size()))},
      {"mean_calibration_gap", optional_json(mean_gap)},
      {"regions", region_counts},
      {"sweep_gaps", gaps},
      {"fields", fields},
      {"notes", a.notes}};
  files["summary.json"] = summary.dump(2) + "\n";
  return files;
}

inline Bundle analyze(const Dataset& ds, const RunManifest& manifest, std::vector<TrialLogRecord> records,
                      const AnalyzeOptions& opt = {}) {
  return report_bundle(prepare_analysis(ds, manifest, std::move(records), opt), opt);
}

inline void write_bundle(const Bundle& files, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : files) write_file(dir / name, content);
}

}  // namespace strategem

#endif  // STRATEGEM_PIPELINE_HPP
