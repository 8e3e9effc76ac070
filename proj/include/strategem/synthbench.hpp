#ifndef STRATEGEM_SYNTHBENCH_HPP
#define STRATEGEM_SYNTHBENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "strategem/fields.hpp"
#include "strategem/io.hpp"
#include "strategem/itc.hpp"
#include "strategem/metrics.hpp"
#include "strategem/pipeline.hpp"
#include "strategem/pmm.hpp"
#include "strategem/randomization.hpp"
#include "strategem/respondent.hpp"

namespace strategem::bench {

inline constexpr std::uint64_t kSeed = 20241017;

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  json measured = json::object();
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;

  json to_json() const {
    return {{"id", id},           {"name", name},       {"passed", passed},          {"measured", measured},
            {"detail", detail},   {"seconds", seconds}, {"budget_seconds", budget_seconds}};
  }
};

/// Questions "q001".."qNNN" with placeholder contents.
inline Dataset synthetic_dataset(std::size_t n, std::size_t k = kDefaultOptionCount, std::string prefix = "q") {
  Dataset ds;
  ds.k = k;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%03zu", prefix.c_str(), i + 1);
    Question q;
    q.id = id;
    q.stem = std::string("Synthetic question ") + id;
    q.correct_content = std::string(id) + " correct";
    for (std::size_t d = 1; d < k; ++d) q.distractor_contents.push_back(std::string(id) + " distractor " + std::to_string(d));
    ds.questions.push_back(std::move(q));
  }
  return ds;
}

/// Uniform draw from the strategy simplex.
inline StrategyMix uniform_mix(Rng& rng) {
  double e[3];
  for (auto& x : e) x = -std::log1p(-rng.uniform());
  const double s = e[0] + e[1] + e[2];
  return {e[0] / s, e[1] / s, 1.0 - e[0] / s - e[1] / s};
}

inline std::vector<TrialLogRecord> simulate(const std::vector<TrialSpec>& plan, const Dataset& ds, Respondent& r) {
  std::map<std::string, const Question*> qs;
  for (const auto& q : ds.questions) qs[q.id] = &q;
  std::vector<TrialLogRecord> out;
  out.reserve(plan.size());
  for (const auto& t : plan) out.push_back(execute_trial(t, *qs.at(t.question_id), r, ""));
  return out;
}

inline std::map<std::string, std::vector<TrialLogRecord>> by_question(const std::vector<TrialLogRecord>& recs) {
  std::map<std::string, std::vector<TrialLogRecord>> out;
  for (const auto& r : recs) out[r.spec.question_id].push_back(r);
  return out;
}

namespace detail {

template <typename F>
CriterionResult timed(int id, std::string name, double budget, F&& body) {
  CriterionResult res;
  res.id = id;
  res.name = std::move(name);
  res.budget_seconds = budget;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(res);
  } catch (const std::exception& e) {
    res.passed = false;
    res.detail = std::string("exception: ") + e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.measured["seconds"] = res.seconds;
  if (res.seconds > budget) {
    res.passed = false;
    res.detail += (res.detail.empty() ? "" : "; ") + std::string("runtime over budget");
  }
  return res;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// 1 -------------------------------------------------------------------------
inline CriterionResult estimator_worked_example() {
  return detail::timed(1, "estimator worked example", 1e-3, [](CriterionResult& res) {
    const auto e = estimate_strategy(0.8, 0.45, 4);
    const double exact[3] = {0.35 / 0.75, 0.55 / 0.75 - 0.35 / 0.75, 1.0 - 0.55 / 0.75};
    const double reported[3] = {0.47, 0.26, 0.27};
    const double got[3] = {e.mix.p_m, e.mix.p_r, e.mix.p_g};
    double err_exact = 0.0, err_reported = 0.0;
    for (int i = 0; i < 3; ++i) {
      err_exact = std::max(err_exact, std::abs(got[i] - exact[i]));
      err_reported = std::max(err_reported, std::abs(got[i] - reported[i]));
    }
    res.measured = {{"p_m", got[0]}, {"p_r", got[1]}, {"p_g", got[2]}, {"max_error_vs_exact", err_exact},
                    {"max_error_vs_two_decimals", err_reported}};
    res.passed = err_exact <= 1e-3 && err_reported <= 0.01 && !e.clamped;
  });
}

// 2 -------------------------------------------------------------------------
inline CriterionResult algebraic_round_trip() {
  return detail::timed(2, "algebraic round-trip", 1.0, [](CriterionResult& res) {
    std::size_t points = 0, violations = 0;
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i) {
      for (int j = 0; i + j <= 20; ++j) {
        const StrategyMix m{i / 20.0, j / 20.0, (20 - i - j) / 20.0};
        const auto acc = expected_accuracies(m, 4);
        const auto e = estimate_strategy(acc.a_om, acc.a_other, 4);
        ++points;
        if (e.clamped || e.violation.any()) ++violations;
        worst = std::max({worst, std::abs(e.mix.p_m - m.p_m), std::abs(e.mix.p_r - m.p_r), std::abs(e.mix.p_g - m.p_g)});
      }
    }
    res.measured = {{"points", points}, {"violations", violations}, {"max_abs_error", worst}};
    res.passed = points == 231 && violations == 0 && worst <= 1e-12;
  });
}

// 3 -------------------------------------------------------------------------
inline CriterionResult statistical_identifiability() {
  return detail::timed(3, "statistical identifiability", 30.0, [](CriterionResult& res) {
    const auto ds = synthetic_dataset(1);
    const StrategyMix truth{0.47, 0.26, 0.27};
    SyntheticRespondent agent(SyntheticAgentSpec{truth, OptionPosition(0), MemorizerVariant::FallbackGuess, 1.0, {}, {}});
    const auto plan = build_balanced_plan(ds, {10000, kSeed});
    const auto recs = simulate(plan, ds, agent);
    const auto acc = position_accuracy(recs, ds.k);
    const auto e = estimate_question(acc, OptionPosition(0));
    const double err = std::max({std::abs(e.mix.p_m - truth.p_m), std::abs(e.mix.p_r - truth.p_r),
                                 std::abs(e.mix.p_g - truth.p_g)});
    res.measured = {{"p_m", e.mix.p_m}, {"p_r", e.mix.p_r}, {"p_g", e.mix.p_g}, {"max_abs_error", err},
                    {"a_om", e.a_om},   {"a_other", e.a_other}, {"trials", recs.size()}};
    res.passed = err <= 0.02 && std::abs(e.a_om - 0.8) <= 0.01 && std::abs(e.a_other - 0.45) <= 0.01;
  });
}

// 4 -------------------------------------------------------------------------
inline CriterionResult frontier_analytics() {
  return detail::timed(4, "frontier analytics", 1e-3, [](CriterionResult& res) {
    const double h_quarter = ideal_entropy(0.25, 4), h_one = ideal_entropy(1.0, 4), h_zero = ideal_entropy(0.0, 4);
    res.measured = {{"H_ideal(0.25)", h_quarter}, {"H_ideal(1)", h_one}, {"H_ideal(0)", h_zero}};
    res.passed = std::abs(h_quarter - 2.0) <= 1e-9 && std::abs(h_one) <= 1e-9 &&
                 std::abs(h_zero - std::log2(3.0)) <= 1e-9 && std::abs(h_zero - 1.5849625) <= 1e-7;
  });
}

// 5 -------------------------------------------------------------------------
inline CriterionResult ideal_model_calibration() {
  return detail::timed(5, "ideal-model calibration", 60.0, [](CriterionResult& res) {
    const auto ds = synthetic_dataset(1);
    const auto plan = build_balanced_plan(ds, {10000, derive_seed(kSeed, "calibration")});
    bool ok = true;
    json rows = json::array();
    for (double c : {0.25, 0.4, 0.6, 0.8, 1.0}) {
      SyntheticRespondent agent(SyntheticAgentSpec{{0.0, 1.0, 0.0}, OptionPosition(0), MemorizerVariant::FallbackGuess, c, {}, {}});
      const auto recs = simulate(plan, ds, agent);
      const auto pts = entropy_accuracy_points(recs, ds.k, EntropyMode::ContentAligned);
      const auto& pt = pts.at(0);
      const double dev = std::abs(*pt.entropy_bits - ideal_entropy(c, ds.k));
      const double gap = *pt.calibration_gap;
      rows.push_back({{"c", c}, {"accuracy", pt.accuracy}, {"H_empirical", *pt.entropy_bits},
                      {"H_ideal", ideal_entropy(c, ds.k)}, {"abs_deviation", dev}, {"calibration_gap", gap}});
      ok = ok && dev <= 0.01 && std::abs(gap) <= 0.01 && recs.size() == 40000;
    }
    res.measured["levels"] = rows;
    res.passed = ok;
  });
}

// 6 -------------------------------------------------------------------------
inline CriterionResult sweep_convergence() {
  return detail::timed(6, "sweep convergence", 120.0, [](CriterionResult& res) {
    // Mixed cohort, both protocols.
    const auto ds = synthetic_dataset(12);
    SyntheticRespondent cohort;
    Rng mixes(derive_seed(kSeed, "sweep-cohort"));
    for (std::size_t i = 0; i < ds.questions.size(); ++i) {
      cohort.set(ds.questions[i].id, SyntheticAgentSpec{uniform_mix(mixes), OptionPosition(i % ds.k),
                                                         MemorizerVariant::FallbackGuess, 1.0, {}, {}});
    }
    SweepConfig cfg;
    cfg.trials_per_cell = 200;
    cfg.master_seed = derive_seed(kSeed, "sweep");
    const auto recs = simulate(build_sweep_plan(ds, cfg), ds, cohort);
    const auto curves = sweep_curves(recs, cfg.theta_grid);

    std::vector<const SweepPoint*> at_one;
    std::map<OptionPosition, const SweepCurve*> inc, exc;
    for (const auto& c : curves) {
      (c.protocol == Protocol::Inclusive ? inc : exc)[c.anchor] = &c;
      if (c.protocol != Protocol::Inclusive) continue;
      for (const auto& p : c.points) {
        if (p.theta == 1.0) at_one.push_back(&p);
      }
    }
    double worst_z = 0.0;
    for (std::size_t a = 0; a < at_one.size(); ++a) {
      for (std::size_t b = a + 1; b < at_one.size(); ++b) {
        const double se = std::sqrt(at_one[a]->se * at_one[a]->se + at_one[b]->se * at_one[b]->se);
        worst_z = std::max(worst_z, std::abs(at_one[a]->mean - at_one[b]->mean) / se);
      }
    }
    bool delta_zero = inc.size() == ds.k && exc.size() == ds.k;
    json d0 = json::object();
    for (const auto& [anchor, ic] : inc) {
      const auto d = delta_mu(*ic, *exc.at(anchor));
      d0[anchor.str()] = d.points.front().second;
      delta_zero = delta_zero && d.points.front().first == 0.0 && d.points.front().second == 0.0;
    }

    // Pure memorizer at A under the exclusive protocol.
    const auto mem_ds = synthetic_dataset(10, ds.k, "m");
    SyntheticRespondent memorizer(SyntheticAgentSpec{{1.0, 0.0, 0.0}, OptionPosition(0), MemorizerVariant::FallbackGuess, 1.0, {}, {}});
    SweepConfig mem_cfg;
    mem_cfg.protocols = {Protocol::Exclusive};
    mem_cfg.anchor_positions = {OptionPosition(0)};
    mem_cfg.trials_per_cell = 400;
    mem_cfg.master_seed = derive_seed(kSeed, "memorizer");
    const auto mem_recs = simulate(build_sweep_plan(mem_ds, mem_cfg), mem_ds, memorizer);
    const auto mem_curves = sweep_curves(mem_recs, mem_cfg.theta_grid);
    bool closed_form = mem_curves.size() == 1 && mem_curves[0].points.size() == mem_cfg.theta_grid.size();
    double worst_mem_z = 0.0;
    json mem_rows = json::array();
    if (closed_form) {
      for (const auto& p : mem_curves[0].points) {
        const double expect = (1.0 - p.theta) + p.theta / 4.0;
        const double sigma = std::sqrt(expect * (1.0 - expect) / static_cast<double>(p.n));
        const double dev = std::abs(p.mean - expect);
        const bool ok = sigma > 0.0 ? dev <= 3.0 * sigma : dev == 0.0;
        if (sigma > 0.0) worst_mem_z = std::max(worst_mem_z, dev / sigma);
        closed_form = closed_form && ok;
        mem_rows.push_back({{"theta", p.theta}, {"mean", p.mean}, {"closed_form", expect}, {"sigma", sigma}});
      }
    }
    res.measured = {{"inclusive_theta1_max_pairwise_z", worst_z},
                    {"delta_mu_at_0", d0},
                    {"memorizer_exclusive_max_z", worst_mem_z},
                    {"memorizer_curve", mem_rows}};
    res.passed = at_one.size() == ds.k && worst_z <= 3.0 && delta_zero && closed_form;
  });
}

// 7 -------------------------------------------------------------------------
inline CriterionResult misfit_diagnostics() {
  return detail::timed(7, "misfit diagnostics", 60.0, [](CriterionResult& res) {
    const auto ds = synthetic_dataset(100);
    Rng mixes(derive_seed(kSeed, "misfit-cohort"));
    std::vector<StrategyMix> cohort;
    for (std::size_t i = 0; i < ds.questions.size(); ++i) {
      const double p_m = 0.9 + 0.1 * mixes.uniform();
      const double split = mixes.uniform();
      cohort.push_back({p_m, (1.0 - p_m) * split, (1.0 - p_m) * (1.0 - split)});
    }
    const auto plan = build_balanced_plan(ds, {400, derive_seed(kSeed, "misfit")});

    // Flag rate from the full design; delta_alpha from a split-half fit
    // (even replicates estimate, odd replicates validate).
    struct Outcome {
      double flag_rate = 0.0;
      std::vector<double> delta;
      std::vector<double> alpha;
    };
    auto evaluate = [&](MemorizerVariant variant) {
      SyntheticRespondent agents;
      for (std::size_t i = 0; i < ds.questions.size(); ++i) {
        agents.set(ds.questions[i].id, SyntheticAgentSpec{cohort[i], OptionPosition(0), variant, 1.0, {}, {}});
      }
      Outcome out;
      std::size_t flagged = 0;
      for (const auto& [qid, recs] : by_question(simulate(plan, ds, agents))) {
        std::vector<TrialLogRecord> fit, hold;
        for (const auto& r : recs) (r.spec.replicate % 2 == 0 ? fit : hold).push_back(r);
        const auto full = estimate_question(position_accuracy(recs, ds.k), OptionPosition(0));
        if (full.violation.p_m_out_of_range && full.raw.p_m > 1.0) ++flagged;
        const auto e = estimate_question(position_accuracy(fit, ds.k), OptionPosition(0));
        const auto v = validate_question(e, position_accuracy(hold, ds.k));
        out.delta.push_back(v.delta_alpha);
        out.alpha.push_back(v.alpha_observed);
      }
      out.flag_rate = static_cast<double>(flagged) / static_cast<double>(ds.questions.size());
      return out;
    };
    const auto strict = evaluate(MemorizerVariant::StrictMemorizer);
    const auto fallback = evaluate(MemorizerVariant::FallbackGuess);
    const double med_strict = detail::median(strict.delta);
    const double med_fallback = detail::median(fallback.delta);
    res.measured = {{"strict_flag_rate", strict.flag_rate},
                    {"fallback_flag_rate", fallback.flag_rate},
                    {"median_delta_alpha_strict", med_strict},
                    {"median_delta_alpha_fallback", med_fallback},
                    {"median_alpha_observed_strict", detail::median(strict.alpha)},
                    {"median_alpha_observed_fallback", detail::median(fallback.alpha)}};
    res.passed = strict.flag_rate >= 0.99 && med_strict > 5.0 * med_fallback;
  });
}

// 8 -------------------------------------------------------------------------
inline CriterionResult correlation_sign_pattern() {
  return detail::timed(8, "correlation sign pattern", 120.0, [](CriterionResult& res) {
    const auto ds = synthetic_dataset(200);
    SyntheticRespondent agents;
    Rng mixes(derive_seed(kSeed, "correlation-cohort"));
    for (const auto& q : ds.questions) {
      agents.set(q.id, SyntheticAgentSpec{uniform_mix(mixes), OptionPosition(0), MemorizerVariant::FallbackGuess, 1.0, {}, {}});
    }
    const auto recs = simulate(build_balanced_plan(ds, {100, derive_seed(kSeed, "correlation")}), ds, agents);
    std::vector<StrategyEstimate> estimates;
    for (const auto& [qid, qr] : by_question(recs)) {
      auto e = estimate_question(position_accuracy(qr, ds.k), OptionPosition(0));
      estimates.push_back(e);
    }
    const auto points = entropy_accuracy_points(recs, ds.k, EntropyMode::ContentAligned);
    const auto rep = strategy_metric_correlations(estimates, points, {10000, derive_seed(kSeed, "permutations")});
    const double r_acc_r = *rep.r[0][1], r_acc_g = *rep.r[0][2], r_ent_r = *rep.r[1][1];
    const double p_acc_r = *rep.p_value[0][1], p_acc_g = *rep.p_value[0][2], p_ent_r = *rep.p_value[1][1];
    res.measured = {{"n", rep.n},
                    {"r_accuracy_PR", r_acc_r}, {"p_accuracy_PR", p_acc_r},
                    {"r_accuracy_PG", r_acc_g}, {"p_accuracy_PG", p_acc_g},
                    {"r_entropy_PR", r_ent_r},  {"p_entropy_PR", p_ent_r}};
    res.passed = rep.n == 200 && r_acc_r > 0.5 && r_acc_g < -0.3 && r_ent_r < -0.3 && p_acc_r < 0.01 &&
                 p_acc_g < 0.01 && p_ent_r < 0.01;
  });
}

// 9 -------------------------------------------------------------------------
inline CriterionResult flow_field_projection() {
  return detail::timed(9, "flow-field projection", 60.0, [](CriterionResult& res) {
    const SimplexLattice lat(0.02);
    const double cx = 0.5, cy = kSqrt3Over2 / 3.0;
    std::vector<CartesianPoint> rot(lat.size()), src(lat.size()), mixed(lat.size());
    for (std::size_t r = 0; r < lat.size(); ++r) {
      const auto nd = lat.node(r);
      const auto p = lat.cartesian(nd.i, nd.j);
      const double x = p.x - cx, y = p.y - cy;
      rot[r] = {-y, x};
      src[r] = {x, y};
      mixed[r] = {rot[r].x + src[r].x, rot[r].y + src[r].y};
    }
    auto rms = [&](const std::vector<CartesianPoint>& a, const std::vector<CartesianPoint>& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].x - b[i].x) * (a[i].x - b[i].x) + (a[i].y - b[i].y) * (a[i].y - b[i].y);
      return std::sqrt(s / static_cast<double>(a.size()));
    };
    auto max_interior_div = [&](const ProjectionResult& pr) {
      double m = 0.0;
      for (std::size_t r = 0; r < lat.size(); ++r) {
        if (!lat.is_boundary(lat.node(r))) m = std::max(m, std::abs(pr.divergence_residual[r]));
      }
      return m;
    };
    const std::vector<CartesianPoint> zero(lat.size());
    const auto pr_rot = project_divergence_free(lat, rot);
    const auto pr_src = project_divergence_free(lat, src);
    const auto pr_mix = project_divergence_free(lat, mixed);
    const double e_rot = rms(pr_rot.solenoidal, rot), e_src = rms(pr_src.solenoidal, zero),
                 e_mix = rms(pr_mix.solenoidal, rot);
    const double div = std::max({max_interior_div(pr_rot), max_interior_div(pr_src), max_interior_div(pr_mix)});
    res.measured = {{"rotation_rms", e_rot}, {"source_rms", e_src}, {"mixed_rms", e_mix},
                    {"max_interior_divergence", div}, {"nodes", lat.size()}};
    res.passed = e_rot <= 1e-6 && e_src <= 1e-6 && e_mix <= 1e-4 && div <= 1e-6 && pr_rot.converged &&
                 pr_src.converged && pr_mix.converged;
  });
}

// 10 ------------------------------------------------------------------------
/// Fixture experiment used by the determinism check.
struct PipelineFixture {
  Dataset dataset;
  RunManifest manifest;
  std::vector<TrialSpec> plan;

  static PipelineFixture make(std::uint64_t seed) {
    PipelineFixture f;
    f.dataset = synthetic_dataset(6);
    SyntheticRespondent agents;
    Rng mixes(derive_seed(seed, "fixture-cohort"));
    for (std::size_t i = 0; i < f.dataset.questions.size(); ++i) {
      agents.set(f.dataset.questions[i].id, SyntheticAgentSpec{uniform_mix(mixes), OptionPosition(i % 4),
                                                               MemorizerVariant::FallbackGuess, 1.0, {}, {}});
    }
    f.manifest.dataset_fingerprint = dataset_fingerprint(f.dataset);
    f.manifest.k = f.dataset.k;
    f.manifest.design = Design::Sweep;
    f.manifest.sweep.theta_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    f.manifest.sweep.trials_per_cell = 10;
    f.manifest.master_seed = seed;
    f.manifest.sweep.master_seed = seed;
    f.manifest.respondent = synthetic_respondent_json(agents);
    f.plan = build_plan(f.dataset, f.manifest);
    return f;
  }
};

inline std::string bundle_digest(const Bundle& b) {
  Fnv1a h;
  for (const auto& [name, content] : b) h.field(name).field(content);
  return to_hex(h.digest());
}

inline CriterionResult pipeline_determinism(const std::filesystem::path& scratch) {
  return detail::timed(10, "pipeline determinism and resumability", 120.0, [&](CriterionResult& res) {
    namespace fs = std::filesystem;
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    const auto a = PipelineFixture::make(kSeed);
    const auto b = PipelineFixture::make(kSeed);
    const auto hash = a.manifest.hash();
    const bool plan_identical = hash == b.manifest.hash() && plan_jsonl(a.plan, hash) == plan_jsonl(b.plan, b.manifest.hash());

    auto run_to = [&](const fs::path& log, std::optional<std::size_t> limit, std::size_t workers) {
      auto h = make_respondent(a.manifest, scratch / "cache.jsonl", {}, workers);
      return run_plan(a.plan, a.dataset, *h.respondent, log, hash, {workers, limit});
    };
    const auto reference = scratch / "reference.jsonl";
    const auto full = run_to(reference, {}, 4);
    const auto reference_bytes = read_file(reference);

    // Interrupt at assorted points, sometimes leaving a torn line, then resume.
    const std::size_t n = a.plan.size();
    std::vector<std::vector<std::size_t>> schedules{{0}, {1}, {n / 2}, {n - 1}, {37, 400, 1111}, {n / 3, 1, 2}};
    bool resumed_identical = true;
    std::size_t case_no = 0;
    for (const auto& cuts : schedules) {
      const auto log = scratch / ("resume_" + std::to_string(case_no++) + ".jsonl");
      for (std::size_t c = 0; c < cuts.size(); ++c) {
        run_to(log, cuts[c], 1 + c % 3);
        if (c % 2 == 0) {
          std::ofstream torn(log, std::ios::app | std::ios::binary);
          torn << R"({"trial_id":"torn)";
        }
      }
      run_to(log, {}, 3);
      resumed_identical = resumed_identical && read_file(log) == reference_bytes;
    }

    AnalyzeOptions opt;
    opt.permutations = 500;
    auto records = load_log(reference);
    const auto bundle1 = analyze(a.dataset, a.manifest, records, opt);
    const auto bundle2 = analyze(b.dataset, b.manifest, load_log(reference), opt);
    Rng shuffler(derive_seed(kSeed, "shuffle"));
    shuffler.shuffle(records.begin(), records.end());
    const auto bundle3 = analyze(a.dataset, a.manifest, records, opt);
    const bool bundle_identical = bundle1 == bundle2 && bundle1 == bundle3;

    res.measured = {{"trials", n},
                    {"scored", full.count(TrialStatus::Scored)},
                    {"plan_identical", plan_identical},
                    {"resume_schedules", schedules.size()},
                    {"resumed_identical", resumed_identical},
                    {"bundle_files", bundle1.size()},
                    {"bundle_digest", bundle_digest(bundle1)},
                    {"bundle_identical", bundle_identical}};
    res.passed = plan_identical && full.complete() && full.count(TrialStatus::Scored) == n && resumed_identical &&
                 bundle_identical;
  });
}

// ---------------------------------------------------------------------------

inline const std::map<std::string, std::vector<int>>& profiles() {
  static const std::map<std::string, std::vector<int>> p{
      {"estimator", {1, 2}},       {"identifiability", {3}}, {"frontier", {4, 5}}, {"sweep-convergence", {6}},
      {"misfit", {7}},             {"correlation", {8}},     {"flow", {9}},        {"determinism", {10}},
      {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}}};
  return p;
}

inline CriterionResult run_criterion(int id, const std::filesystem::path& scratch) {
  switch (id) {
    case 1: return estimator_worked_example();
    case 2: return algebraic_round_trip();
    case 3: return statistical_identifiability();
    case 4: return frontier_analytics();
    case 5: return ideal_model_calibration();
    case 6: return sweep_convergence();
    case 7: return misfit_diagnostics();
    case 8: return correlation_sign_pattern();
    case 9: return flow_field_projection();
    case 10: return pipeline_determinism(scratch);
  }
  throw ValidationError("unknown criterion " + std::to_string(id));
}

inline std::vector<CriterionResult> run_profile(const std::string& name, const std::filesystem::path& scratch,
                                                const std::function<void(const CriterionResult&)>& on_result = {}) {
  auto it = profiles().find(name);
  if (it == profiles().end()) throw ValidationError("unknown synthbench profile '" + name + "'");
  std::vector<CriterionResult> out;
  for (int id : it->second) {
    out.push_back(run_criterion(id, scratch / ("criterion_" + std::to_string(id))));
    if (on_result) on_result(out.back());
  }
  return out;
}

}  // namespace strategem::bench

#endif  // STRATEGEM_SYNTHBENCH_HPP
