#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "strategem/pipeline.hpp"
#include "strategem/synthbench.hpp"

namespace strategem::cli {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  std::optional<std::size_t> k;
  fs::path out_dir = ".";
  fs::path manifest;

  fs::path manifest_path() const { return manifest.empty() ? out_dir / "manifest.json" : manifest; }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_theta(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw ValidationError("--thetas: '" + s + "' is not a number");
  return v;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// plan

struct PlanArgs {
  fs::path dataset;
  std::string design = "sweep";
  std::string thetas;
  std::string protocols = "inclusive,exclusive";
  std::string anchors;
  std::uint32_t trials = 100;
  std::string respondent;
  std::string model = "gpt-4o-mini";
  std::string base_url = "https://api.openai.com/v1";
  double temperature = 0.0;
  std::size_t max_in_flight = 4;
  std::uint32_t max_attempts = 3;
  std::uint32_t timeout_ms = 60000;
  std::string o_m_policy = "original";
  std::string entropy_mode = "content";
};

int cmd_plan(const Globals& g, const PlanArgs& a) {
  const auto ds = load_dataset(a.dataset, g.k);
  RunManifest m;
  m.dataset_fingerprint = dataset_fingerprint(ds);
  m.k = ds.k;
  m.design = parse_design(a.design);
  m.master_seed = g.seed;
  m.o_m_policy = parse_policy(a.o_m_policy);
  m.entropy_mode = parse_entropy_mode(a.entropy_mode);
  m.created_at = utc_now();
  if (m.design == Design::Sweep) {
    if (!a.thetas.empty()) {
      m.sweep.theta_grid.clear();
      for (const auto& t : split_list(a.thetas)) m.sweep.theta_grid.push_back(parse_theta(t));
    }
    m.sweep.protocols.clear();
    for (const auto& p : split_list(a.protocols)) m.sweep.protocols.push_back(parse_protocol(p));
    for (const auto& x : split_list(a.anchors)) m.sweep.anchor_positions.push_back(OptionPosition::parse(x));
    m.sweep.trials_per_cell = a.trials;
    m.sweep.master_seed = g.seed;
  } else {
    m.balanced.trials_per_position = a.trials;
    m.balanced.master_seed = g.seed;
  }

  if (a.respondent.rfind("synthetic:", 0) == 0) {
    const fs::path spec = a.respondent.substr(10);
    const auto agents = synthetic_from_json(parse_json(read_file(spec), spec.string()), ds.k, spec.string());
    for (const auto& q : ds.questions) (void)agents.spec_for(q.id);
    m.respondent = synthetic_respondent_json(agents);
  } else if (a.respondent == "http") {
    HttpRespondentConfig c;
    c.base_url = a.base_url;
    c.model_name = a.model;
    c.temperature = a.temperature;
    c.max_in_flight = a.max_in_flight;
    c.retry.max_attempts = a.max_attempts;
    c.timeout_ms = a.timeout_ms;
    c.validate();
    m.respondent = http_respondent_json(c);
  } else {
    throw ValidationError("--respondent must be synthetic:<agents-file> or http");
  }

  const auto plan = build_plan(ds, m);
  const auto hash = m.hash();
  fs::create_directories(g.out_dir);
  write_file(g.out_dir / "dataset.json", to_json(ds).dump(2) + "\n");
  write_file(g.manifest_path(), m.to_json().dump(2) + "\n");
  write_file(g.out_dir / "plan.jsonl", plan_jsonl(plan, hash));
  std::cout << "planned " << plan.size() << " trials (" << to_string(m.design) << ", k=" << ds.k << ", "
            << ds.questions.size() << " questions)\nmanifest " << hash << "\n";
  return 0;
}

// run

struct RunArgs {
  std::optional<std::size_t> limit;
  std::size_t workers = 0;
  std::optional<std::string> base_url;
};

struct Loaded {
  RunManifest manifest;
  Dataset dataset;
};

Loaded load_experiment(const Globals& g) {
  Loaded l{load_manifest(g.manifest_path()), load_dataset(g.out_dir / "dataset.json", g.k)};
  if (dataset_fingerprint(l.dataset) != l.manifest.dataset_fingerprint) {
    throw ValidationError("dataset.json does not match the manifest fingerprint");
  }
  return l;
}

int cmd_run(const Globals& g, const RunArgs& a) {
  const auto [m, ds] = load_experiment(g);
  const auto hash = m.hash();
  const auto plan = load_plan(g.out_dir / "plan.jsonl", hash);
  if (plan != build_plan(ds, m)) throw ValidationError("plan.jsonl does not match the plan implied by the manifest");

  auto handle = make_respondent(m, g.out_dir / "cache.jsonl", a.base_url, a.workers ? a.workers : 1);
  const auto report = run_plan(plan, ds, *handle.respondent, g.out_dir / "log.jsonl", hash, {a.workers, a.limit});
  std::cout << "resumed at " << report.resumed_from << ", executed " << report.executed << " of " << report.planned
            << " trials\n";
  for (auto s : {TrialStatus::Scored, TrialStatus::ParseFailure, TrialStatus::TransportFailure}) {
    std::cout << "  " << to_string(s) << ": " << report.count(s) << "\n";
  }
  if (!report.complete()) std::cout << "log incomplete; run again to resume\n";
  return report.count(TrialStatus::TransportFailure) > 0 ? static_cast<int>(ExitCode::Respondent) : 0;
}

// analyze, fields

struct AnalyzeArgs {
  std::vector<std::string> logs;
  bool allow_partial = false;
  std::uint32_t permutations = 10000;
  double spacing = 0.05;
  bool ensemble = false;
  bool multicolor = false;
  unsigned threads = 1;
  fs::path report_dir;
};

std::vector<TrialLogRecord> load_logs(const Globals& g, const AnalyzeArgs& a) {
  std::vector<std::string> paths = a.logs;
  if (paths.empty()) paths.push_back((g.out_dir / "log.jsonl").string());
  std::vector<TrialLogRecord> all;
  for (const auto& p : paths) {
    auto recs = load_log(p, a.allow_partial);
    all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return all;
}

AnalyzeOptions analyze_options(const AnalyzeArgs& a) {
  AnalyzeOptions o;
  o.allow_partial = a.allow_partial;
  o.permutations = a.permutations;
  o.field_spacing = a.spacing;
  o.ensemble_flow = a.ensemble;
  o.projection.ordering = a.multicolor ? SweepOrdering::Multicolor : SweepOrdering::Lexicographic;
  o.projection.threads = a.threads;
  return o;
}

int cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  const auto [m, ds] = load_experiment(g);
  const auto bundle = analyze(ds, m, load_logs(g, a), analyze_options(a));
  const auto dir = a.report_dir.empty() ? g.out_dir / "report" : a.report_dir;
  write_bundle(bundle, dir);
  std::cout << "wrote " << bundle.size() << " files to " << dir.string() << "\n";
  return 0;
}

int cmd_fields(const Globals& g, const AnalyzeArgs& a) {
  const auto [m, ds] = load_experiment(g);
  const auto opt = analyze_options(a);
  const auto analysis = prepare_analysis(ds, m, load_logs(g, a), opt);
  Bundle files;
  json info = json::object();
  add_field_files(files, analysis, opt, info);
  info["manifest"] = analysis.manifest_hash;
  files["fields.json"] = info.dump(2) + "\n";
  const auto dir = a.report_dir.empty() ? g.out_dir / "fields" : a.report_dir;
  write_bundle(files, dir);
  std::cout << "wrote " << files.size() << " files to " << dir.string() << "\n";
  return 0;
}

// synthbench

int cmd_synthbench(const Globals& g, const std::string& profile, bool as_json) {
  json report = json::array();
  bool ok = true;
  bench::run_profile(profile, g.out_dir / "synthbench", [&](const bench::CriterionResult& r) {
    ok = ok && r.passed;
    report.push_back(r.to_json());
    if (!as_json) {
      std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.id << "  " << r.name << "  " << r.measured.dump()
                << (r.detail.empty() ? "" : "  (" + r.detail + ")") << std::endl;
    }
  });
  if (as_json) std::cout << json{{"profile", profile}, {"passed", ok}, {"criteria", report}}.dump(2) << "\n";
  return ok ? 0 : static_cast<int>(ExitCode::Acceptance);
}

// validate

std::string detect_kind(const fs::path& path, const std::string& text) {
  if (path.extension() == ".jsonl") {
    const auto c = parse_jsonl(text, path.string(), false);
    return !c.lines.empty() && c.lines.front().contains("status") ? "log" : "plan";
  }
  if (path.extension() == ".csv") return "csv";
  const auto j = parse_json(text, path.string());
  if (j.is_array()) return "dataset";
  if (j.contains("manifest_version")) return "manifest";
  if (j.contains("default") || j.contains("questions")) return "agents";
  throw ValidationError(path.string() + ": cannot tell what kind of artifact this is (use --kind)");
}

int cmd_validate(const Globals& g, const fs::path& path, std::string kind) {
  const auto text = read_file(path);
  const auto where = path.string();
  if (kind == "auto") kind = detect_kind(path, text);
  std::string what;
  if (kind == "dataset") {
    const auto ds = dataset_from_json(parse_json(text, where), where, g.k);
    what = std::to_string(ds.questions.size()) + " questions, k=" + std::to_string(ds.k);
  } else if (kind == "manifest") {
    what = "hash " + RunManifest::from_json(parse_json(text, where), where).hash();
  } else if (kind == "agents") {
    const auto r = synthetic_from_json(parse_json(text, where), g.k.value_or(kDefaultOptionCount), where);
    what = std::to_string(r.per_question().size()) + " per-question agents" + (r.default_spec() ? " plus default" : "");
  } else if (kind == "plan" || kind == "log") {
    const auto c = parse_jsonl(text, where, false);
    std::set<std::string> manifests, ids;
    for (const auto& j : c.lines) {
      const auto id = kind == "plan" ? trial_spec_from_json(j, where).trial_id : log_record_from_json(j, where).spec.trial_id;
      if (!ids.insert(id).second) throw ValidationError(where + ": duplicate trial id " + id);
      manifests.insert(detail::field_as<std::string>(j, "manifest", where));
    }
    if (manifests.size() > 1) throw ValidationError(where + ": records reference more than one manifest");
    what = std::to_string(c.lines.size()) + " records";
  } else if (kind == "csv") {
    if (text.rfind("# manifest: ", 0) != 0) throw ValidationError(where + ": missing manifest comment line");
    what = "report table";
  } else {
    throw ValidationError("unknown artifact kind '" + kind + "'");
  }
  std::cout << "ok: " << kind << " " << where << " (" << what << ")\n";
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Positional-randomization probes and strategy decomposition for multiple-choice respondents"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Globals g;
  std::size_t k_value = 0;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  auto* k_opt = app.add_option("--k", k_value, "Expected option count")->check(CLI::Range(2, 26));
  app.add_option("--out-dir", g.out_dir, "Experiment directory")->capture_default_str();
  app.add_option("--manifest", g.manifest, "Manifest path (default <out-dir>/manifest.json)");
  app.fallthrough();

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "Write manifest, dataset copy and trial plan");
  plan->add_option("--dataset", pa.dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--design", pa.design, "sweep or balanced")
      ->check(CLI::IsMember({"sweep", "balanced"}))
      ->capture_default_str();
  plan->add_option("--thetas", pa.thetas, "Comma-separated theta grid (default 0,0.1,...,1)");
  plan->add_option("--protocols", pa.protocols, "Comma-separated sweep protocols")->capture_default_str();
  plan->add_option("--anchors", pa.anchors, "Comma-separated anchor positions (default all)");
  plan->add_option("--trials", pa.trials, "Trials per sweep cell or per balanced position")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  plan->add_option("--respondent", pa.respondent, "synthetic:<agents-file> or http")->required();
  plan->add_option("--model", pa.model, "Chat model name")->capture_default_str();
  plan->add_option("--base-url", pa.base_url, "Chat-completions base URL")->capture_default_str();
  plan->add_option("--temperature", pa.temperature, "Sampling temperature")->capture_default_str();
  plan->add_option("--max-in-flight", pa.max_in_flight, "Concurrent requests")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  plan->add_option("--max-attempts", pa.max_attempts, "Attempts per request")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  plan->add_option("--timeout-ms", pa.timeout_ms, "Request timeout")->capture_default_str();
  plan->add_option("--o-m-policy", pa.o_m_policy, "original or argmax")->capture_default_str();
  plan->add_option("--entropy-mode", pa.entropy_mode, "content or per-position")->capture_default_str();

  RunArgs ra;
  std::size_t limit = 0;
  std::string run_base_url;
  auto* run_cmd = app.add_subcommand("run", "Execute or resume the plan");
  auto* limit_opt = run_cmd->add_option("--limit", limit, "Stop after this many new trials");
  run_cmd->add_option("--workers", ra.workers, "Concurrent trials (default: respondent limit)");
  auto* url_opt = run_cmd->add_option("--base-url", run_base_url, "Override the recorded base URL");

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze", "Build the report bundle from trial logs");
  auto* fields_cmd = app.add_subcommand("fields", "Write simplex trajectories, flow and scalar fields");
  for (auto* sub : {analyze_cmd, fields_cmd}) {
    sub->add_option("--log", aa.logs, "Trial log(s) (default <out-dir>/log.jsonl)");
    sub->add_flag("--allow-partial", aa.allow_partial, "Analyze an incomplete log");
    sub->add_option("--field-spacing", aa.spacing, "Lattice spacing")->capture_default_str();
    sub->add_flag("--ensemble", aa.ensemble, "Average trajectories over questions before differencing");
    sub->add_flag("--multicolor", aa.multicolor, "Three-colour ordering in the Poisson solve");
    sub->add_option("--threads", aa.threads, "Threads for the multicolour solve")->capture_default_str();
    sub->add_option("--report-dir", aa.report_dir, "Output directory");
  }
  analyze_cmd->add_option("--permutations", aa.permutations, "Permutations for correlation p-values")
      ->capture_default_str();

  std::string profile = "all";
  bool as_json = false;
  auto* bench_cmd = app.add_subcommand("synthbench", "Run a bundled acceptance scenario");
  bench_cmd->add_option("--profile", profile, "Scenario name")
      ->check(CLI::IsMember({"estimator", "identifiability", "frontier", "sweep-convergence", "misfit",
                             "correlation", "flow", "determinism", "all"}))
      ->capture_default_str();
  bench_cmd->add_flag("--json", as_json, "Print a JSON report");

  fs::path target;
  std::string kind = "auto";
  auto* validate_cmd = app.add_subcommand("validate", "Schema-check an artifact");
  validate_cmd->add_option("path", target, "Artifact to check")->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--kind", kind, "dataset, manifest, agents, plan, log, csv or auto")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Validation);
  }
  if (*k_opt) g.k = k_value;
  if (*limit_opt) ra.limit = limit;
  if (*url_opt) ra.base_url = run_base_url;

  try {
    if (*plan) return cmd_plan(g, pa);
    if (*run_cmd) return cmd_run(g, ra);
    if (*analyze_cmd) return cmd_analyze(g, aa);
    if (*fields_cmd) return cmd_fields(g, aa);
    if (*bench_cmd) return cmd_synthbench(g, profile, as_json);
    if (*validate_cmd) return cmd_validate(g, target, kind);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Validation);
  }
  return static_cast<int>(ExitCode::Validation);
}

}  // namespace strategem::cli
