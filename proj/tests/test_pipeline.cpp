#include <gtest/gtest.h>

#include <filesystem>

#include "strategem/pipeline.hpp"
#include "support.hpp"

using namespace strategem;
namespace fs = std::filesystem;

namespace {

class Scratch {
 public:
  explicit Scratch(const std::string& name) : dir_(fs::temp_directory_path() / ("strategem_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  fs::path operator/(const std::string& f) const { return dir_ / f; }

 private:
  fs::path dir_;
};

struct Experiment {
  Dataset ds = fixtures::make_dataset(4, 4);
  RunManifest manifest;
  SyntheticRespondent agents;
  std::vector<TrialSpec> plan;
  std::string hash;

  explicit Experiment(Design design = Design::Sweep, std::uint32_t n = 8) {
    manifest.dataset_fingerprint = dataset_fingerprint(ds);
    manifest.k = ds.k;
    manifest.design = design;
    manifest.master_seed = 77;
    manifest.sweep.theta_grid = {0.0, 0.5, 1.0};
    manifest.sweep.trials_per_cell = n;
    manifest.balanced.trials_per_position = n;
    const std::vector<StrategyMix> mixes{{0.4, 0.4, 0.2}, {0.1, 0.1, 0.8}, {0.7, 0.2, 0.1}, {0.0, 0.9, 0.1}};
    for (std::size_t i = 0; i < ds.questions.size(); ++i) {
      const auto& q = ds.questions[i];
      agents.set(q.id, {mixes[i], q.original_correct_position, MemorizerVariant::FallbackGuess, i == 0 ? 0.9 : 1.0,
                        {}, {}});
    }
    manifest.respondent = synthetic_respondent_json(agents);
    plan = build_plan(ds, manifest);
    hash = manifest.hash();
  }
};

/// Throws a fixed error kind for every trial whose replicate matches.
class FlakyRespondent : public Respondent {
 public:
  explicit FlakyRespondent(SyntheticRespondent inner) : inner_(std::move(inner)) {}
  TrialOutcome respond(const TrialSpec& t, const Question& q) override {
    if (t.replicate == 1) throw RespondentError(RespondentError::Kind::RateLimited, "HTTP 429 after 3 attempt(s)");
    if (t.replicate == 2) throw ParseFailure("no unambiguous option letter in reply", "maybe?");
    if (t.replicate == 3 && bomb_) throw std::runtime_error("disk on fire");
    return inner_.respond(t, q);
  }
  std::size_t max_in_flight() const override { return 4; }
  bool bomb_ = false;

 private:
  SyntheticRespondent inner_;
};

}  // namespace

TEST(Plan, JsonlRoundTripAndManifestBinding) {
  Experiment e;
  Scratch dir("plan");
  write_file(dir / "plan.jsonl", plan_jsonl(e.plan, e.hash));
  EXPECT_EQ(load_plan(dir / "plan.jsonl", e.hash), e.plan);
  EXPECT_THROW(load_plan(dir / "plan.jsonl", "other"), ValidationError);
  auto wrong = e.ds;
  wrong.questions[0].correct_content = "changed";
  EXPECT_THROW(build_plan(wrong, e.manifest), ValidationError);
}

TEST(RunPlan, LogIsIndependentOfWorkerCount) {
  Experiment e;
  Scratch dir("workers");
  run_plan(e.plan, e.ds, e.agents, dir / "a.jsonl", e.hash, {1, {}});
  const auto report = run_plan(e.plan, e.ds, e.agents, dir / "b.jsonl", e.hash, {6, {}});
  EXPECT_TRUE(report.complete());
  EXPECT_EQ(report.count(TrialStatus::Scored), e.plan.size());
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
  const auto log = load_log(dir / "a.jsonl");
  ASSERT_EQ(log.size(), e.plan.size());
  for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(log[i].spec, e.plan[i]);
}

TEST(RunPlan, ResumesAfterInterruptionAndTornTail) {
  Experiment e;
  Scratch dir("resume");
  run_plan(e.plan, e.ds, e.agents, dir / "ref.jsonl", e.hash);
  const auto log = dir / "log.jsonl";
  auto r1 = run_plan(e.plan, e.ds, e.agents, log, e.hash, {3, 100});
  EXPECT_EQ(r1.executed, 100u);
  EXPECT_FALSE(r1.complete());
  { std::ofstream(log, std::ios::app) << "{\"trial_id\": \"half"; }
  auto r2 = run_plan(e.plan, e.ds, e.agents, log, e.hash, {2, 250});
  EXPECT_EQ(r2.resumed_from, 100u);
  auto r3 = run_plan(e.plan, e.ds, e.agents, log, e.hash);
  EXPECT_EQ(r3.resumed_from, 350u);
  EXPECT_TRUE(r3.complete());
  EXPECT_EQ(read_file(log), read_file(dir / "ref.jsonl"));
  const auto again = run_plan(e.plan, e.ds, e.agents, log, e.hash);
  EXPECT_EQ(again.executed, 0u);
}

TEST(RunPlan, RefusesLogsThatAreNotAPlanPrefix) {
  Experiment e;
  Scratch dir("mismatch");
  const auto log = dir / "log.jsonl";
  run_plan(e.plan, e.ds, e.agents, log, e.hash, {1, 10});
  auto shuffled = e.plan;
  std::swap(shuffled[3], shuffled[4]);
  EXPECT_THROW(run_plan(shuffled, e.ds, e.agents, log, e.hash), ValidationError);
  EXPECT_THROW(run_plan(e.plan, e.ds, e.agents, log, "other-manifest"), ValidationError);
  write_file(dir / "bad.jsonl", "{\"x\":1}\nnot json\n");
  EXPECT_THROW(run_plan(e.plan, e.ds, e.agents, dir / "bad.jsonl", e.hash), ValidationError);
}

TEST(RunPlan, RespondentErrorsBecomeFailureRecords) {
  Experiment e;
  Scratch dir("flaky");
  FlakyRespondent flaky(e.agents);
  const auto report = run_plan(e.plan, e.ds, flaky, dir / "log.jsonl", e.hash);
  const auto per_replicate = e.plan.size() / e.manifest.sweep.trials_per_cell;
  EXPECT_EQ(report.count(TrialStatus::TransportFailure), per_replicate);
  EXPECT_EQ(report.count(TrialStatus::ParseFailure), per_replicate);
  const auto log = load_log(dir / "log.jsonl");
  for (const auto& r : log) {
    if (r.spec.replicate == 1) {
      EXPECT_EQ(r.status, TrialStatus::TransportFailure);
      EXPECT_EQ(r.error.rfind("rate_limited: ", 0), 0u) << r.error;
    } else if (r.spec.replicate == 2) {
      EXPECT_EQ(r.status, TrialStatus::ParseFailure);
      EXPECT_EQ(r.raw_response, std::optional<std::string>("maybe?"));
    }
  }
}

TEST(RunPlan, UnexpectedErrorsAbortButLeaveAValidPrefix) {
  Experiment e;
  Scratch dir("abort");
  FlakyRespondent flaky(e.agents);
  flaky.bomb_ = true;
  EXPECT_THROW(run_plan(e.plan, e.ds, flaky, dir / "log.jsonl", e.hash), std::runtime_error);
  const auto partial = load_log(dir / "log.jsonl");
  EXPECT_LT(partial.size(), e.plan.size());
  for (std::size_t i = 0; i < partial.size(); ++i) EXPECT_EQ(partial[i].spec.trial_id, e.plan[i].trial_id);
  flaky.bomb_ = false;
  EXPECT_TRUE(run_plan(e.plan, e.ds, flaky, dir / "log.jsonl", e.hash).complete());
}

TEST(MakeRespondent, RebuildsSyntheticAgentsFromManifest) {
  Experiment e;
  auto h = make_respondent(e.manifest, "", {}, 3);
  EXPECT_EQ(h.respondent->max_in_flight(), 3u);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& t = e.plan[i];
    EXPECT_EQ(h.respondent->respond(t, e.ds.find(t.question_id)), e.agents.respond(t, e.ds.find(t.question_id)));
  }
  auto m = e.manifest;
  m.respondent = {{"kind", "carrier-pigeon"}};
  EXPECT_THROW(make_respondent(m, ""), ValidationError);
  HttpRespondentConfig c;
  c.model_name = "m";
  EXPECT_EQ(http_config_from_json(http_respondent_json(c)).model_name, "m");
}

TEST(Analyze, BundleIsDeterministicAndOrderInsensitive) {
  Experiment e;
  Scratch dir("analyze");
  run_plan(e.plan, e.ds, e.agents, dir / "log.jsonl", e.hash, {4, {}});
  auto recs = load_log(dir / "log.jsonl");
  AnalyzeOptions opt;
  opt.permutations = 200;
  opt.field_spacing = 0.1;
  const auto a = analyze(e.ds, e.manifest, recs, opt);
  std::reverse(recs.begin(), recs.end());
  const auto b = analyze(e.ds, e.manifest, recs, opt);
  EXPECT_EQ(a, b);
  for (const char* name : {"positions.csv", "difficulty.csv", "wrong_matrix.csv", "sweeps.csv", "delta_mu.csv",
                           "strategy.csv", "ensemble.csv", "entropy.csv", "correlations.json", "frontier.csv",
                           "summary.json"}) {
    ASSERT_TRUE(a.count(name)) << name;
  }
  for (const auto& [name, content] : a) {
    if (name.ends_with(".csv")) {
      EXPECT_EQ(content.rfind("# manifest: " + e.hash + "\n", 0), 0u) << name;
    }
  }
}

TEST(Analyze, RejectsForeignPartialAndAlteredRecords) {
  Experiment e;
  Scratch dir("reject");
  run_plan(e.plan, e.ds, e.agents, dir / "log.jsonl", e.hash, {1, 200});
  auto recs = load_log(dir / "log.jsonl");
  AnalyzeOptions opt;
  opt.permutations = 50;
  EXPECT_THROW(prepare_analysis(e.ds, e.manifest, recs, opt), ValidationError);
  opt.allow_partial = true;
  const auto a = prepare_analysis(e.ds, e.manifest, recs, opt);
  EXPECT_EQ(a.missing, e.plan.size() - 200);
  auto foreign = recs;
  foreign[0].manifest = "deadbeef";
  EXPECT_THROW(prepare_analysis(e.ds, e.manifest, foreign, opt), ValidationError);
  auto altered = recs;
  altered[0].spec.theta = 0.25;
  EXPECT_THROW(prepare_analysis(e.ds, e.manifest, altered, opt), ValidationError);
  auto dup = recs;
  dup.push_back(recs[5]);
  EXPECT_NO_THROW(prepare_analysis(e.ds, e.manifest, dup, opt));
}

TEST(Analyze, BalancedDesignRecoversAgentMixes) {
  Experiment e(Design::Balanced, 3000);
  Scratch dir("balanced");
  run_plan(e.plan, e.ds, e.agents, dir / "log.jsonl", e.hash, {4, {}});
  AnalyzeOptions opt;
  opt.permutations = 10;
  const auto a = prepare_analysis(e.ds, e.manifest, load_log(dir / "log.jsonl"), opt);
  ASSERT_EQ(a.estimates.size(), 4u);
  for (const auto& est : a.estimates) {
    const auto& spec = e.agents.spec_for(est.question_id);
    ASSERT_EQ(est.o_m, e.ds.find(est.question_id).original_correct_position);
    // Reasoning success below 1 maps into the mix as P_R c with the remainder read as guessing.
    const double kd = 4.0;
    const double c = spec.reasoning_success;
    const double a_om = spec.mix.p_m + spec.mix.p_r * c + spec.mix.p_g / kd;
    const double a_other = spec.mix.p_m / kd + spec.mix.p_r * c + spec.mix.p_g / kd;
    const double p_m = (a_om - a_other) / (1 - 1 / kd);
    const double p_r = (a_om - 1 / kd) / (1 - 1 / kd) - p_m;
    EXPECT_NEAR(est.raw.p_m, p_m, 0.05) << est.question_id;
    EXPECT_NEAR(est.raw.p_r, p_r, 0.05) << est.question_id;
  }
}
