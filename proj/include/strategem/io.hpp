#ifndef STRATEGEM_IO_HPP
#define STRATEGEM_IO_HPP

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/hash.hpp"
#include "strategem/itc.hpp"
#include "strategem/pmm.hpp"
#include "strategem/randomization.hpp"
#include "strategem/respondent.hpp"

namespace strategem {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

/// Parsed JSONL lines. `complete_bytes` is the length of the prefix made of
/// whole, parseable lines; anything after it is a torn tail.
struct JsonlContent {
  std::vector<json> lines;
  std::size_t complete_bytes = 0;
  bool torn_tail = false;
};

inline JsonlContent parse_jsonl(std::string_view text, const std::string& where, bool tolerate_torn_tail) {
  JsonlContent out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    const auto line = text.substr(pos, (terminated ? nl : text.size()) - pos);
    const std::size_t next = terminated ? nl + 1 : text.size();
    if (line.empty()) {
      pos = next;
      out.complete_bytes = pos;
      continue;
    }
    json j;
    bool ok = terminated;
    if (ok) {
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        if (!tolerate_torn_tail || next != text.size()) {
          throw ValidationError(where + ":" + std::to_string(line_no) + ": " + e.what());
        }
        ok = false;
      }
    }
    if (!ok) {
      if (!tolerate_torn_tail) throw ValidationError(where + ":" + std::to_string(line_no) + ": unterminated line");
      out.torn_tail = true;
      break;
    }
    out.lines.push_back(std::move(j));
    pos = next;
    out.complete_bytes = pos;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// CSV with a leading "# manifest: <hash>" comment line.
class CsvWriter {
 public:
  using Cell = std::variant<std::string, double, std::uint64_t, std::int64_t, std::optional<double>, bool>;

  CsvWriter(std::string manifest_hash, std::vector<std::string> header) {
    out_ << "# manifest: " << manifest_hash << '\n';
    row_strings(header);
  }

  CsvWriter& row(std::initializer_list<Cell> cells) { return row(std::vector<Cell>(cells)); }

  CsvWriter& row(const std::vector<Cell>& cells) {
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const auto& c : cells) text.push_back(render(c));
    row_strings(text);
    return *this;
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  static std::string render(const Cell& c) {
    struct Visitor {
      std::string operator()(const std::string& s) const { return quote(s); }
      std::string operator()(double d) const { return format_double(d); }
      std::string operator()(std::uint64_t u) const { return std::to_string(u); }
      std::string operator()(std::int64_t i) const { return std::to_string(i); }
      std::string operator()(const std::optional<double>& d) const { return d ? format_double(*d) : "null"; }
      std::string operator()(bool b) const { return b ? "true" : "false"; }
    };
    return std::visit(Visitor{}, c);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ostringstream out_;
};

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Dataset

namespace detail {

template <typename T>
T field_as(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Dataset JSON: an array of
///   {"id", "question", "correct", "distractors": [...], "original_position": "A"}
/// original_position is optional and defaults to A.
inline Dataset dataset_from_json(const json& doc, const std::string& where = "dataset",
                                 std::optional<std::size_t> expected_k = {}) {
  if (!doc.is_array()) throw ValidationError(where + ": expected a JSON array of questions");
  if (doc.empty()) throw ValidationError(where + ": empty dataset");
  Dataset ds;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const std::string at = where + "[" + std::to_string(i) + "]";
    Question q;
    q.id = detail::field_as<std::string>(e, "id", at);
    const std::string named = at + " ('" + q.id + "')";
    q.stem = detail::field_as<std::string>(e, "question", named);
    q.correct_content = detail::field_as<std::string>(e, "correct", named);
    q.distractor_contents = detail::field_as<std::vector<std::string>>(e, "distractors", named);
    if (e.contains("original_position")) {
      q.original_correct_position = OptionPosition::parse(detail::field_as<std::string>(e, "original_position", named));
    }
    if (i == 0) {
      ds.k = q.option_count();
    } else if (q.option_count() != ds.k) {
      throw ValidationError(named + ": has " + std::to_string(q.distractor_contents.size()) +
                            " distractors but earlier entries have " + std::to_string(ds.k - 1));
    }
    ds.questions.push_back(std::move(q));
  }
  if (expected_k && *expected_k != ds.k) {
    throw ValidationError(where + ": option count " + std::to_string(ds.k) + " does not match --k " +
                          std::to_string(*expected_k));
  }
  ds.validate();
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, std::optional<std::size_t> expected_k = {}) {
  return dataset_from_json(parse_json(read_file(path), path.string()), path.string(), expected_k);
}

inline json to_json(const Dataset& ds) {
  json arr = json::array();
  for (const auto& q : ds.questions) {
    arr.push_back({{"id", q.id},
                   {"question", q.stem},
                   {"correct", q.correct_content},
                   {"distractors", q.distractor_contents},
                   {"original_position", q.original_correct_position.str()}});
  }
  return arr;
}

inline std::string dataset_fingerprint(const Dataset& ds) { return to_hex(fnv1a64(to_json(ds).dump())); }

// ---------------------------------------------------------------------------
// Trials and log records

inline json to_json(const TrialSpec& t) {
  json placement = json::array();
  for (const auto& r : t.arrangement.placement) placement.push_back(r.str());
  return {{"trial_id", t.trial_id},
          {"question_id", t.question_id},
          {"theta", t.theta},
          {"protocol", to_string(t.protocol)},
          {"anchor", t.anchor_position.str()},
          {"placement", placement},
          {"correct_position", t.arrangement.correct_position.str()},
          {"rng_seed", t.rng_seed},
          {"branch", to_string(t.branch)},
          {"replicate", t.replicate}};
}

inline TrialSpec trial_spec_from_json(const json& j, const std::string& where = "trial") {
  TrialSpec t;
  t.trial_id = detail::field_as<std::string>(j, "trial_id", where);
  const std::string at = where + " " + t.trial_id;
  t.question_id = detail::field_as<std::string>(j, "question_id", at);
  t.theta = detail::field_as<double>(j, "theta", at);
  t.protocol = parse_protocol(detail::field_as<std::string>(j, "protocol", at));
  t.anchor_position = OptionPosition::parse(detail::field_as<std::string>(j, "anchor", at));
  t.arrangement.question_id = t.question_id;
  for (const auto& r : detail::field_as<std::vector<std::string>>(j, "placement", at)) {
    t.arrangement.placement.push_back(ContentRole::parse(r));
  }
  t.arrangement.correct_position = OptionPosition::parse(detail::field_as<std::string>(j, "correct_position", at));
  t.rng_seed = detail::field_as<std::uint64_t>(j, "rng_seed", at);
  t.branch = parse_branch(detail::field_as<std::string>(j, "branch", at));
  t.replicate = detail::field_as<std::uint32_t>(j, "replicate", at);
  t.arrangement.validate();
  t.anchor_position.check(t.arrangement.option_count());
  return t;
}

inline json to_json(const TrialLogRecord& r) {
  json j = to_json(r.spec);
  j["status"] = to_string(r.status);
  j["manifest"] = r.manifest;
  if (r.outcome) {
    j["selected_position"] = r.outcome->selected_position.str();
    j["selected_role"] = r.outcome->selected_role.str();
    if (r.outcome->latency_ms) j["latency_ms"] = *r.outcome->latency_ms;
  }
  if (r.raw_response) {
    j["raw_response"] = *r.raw_response;
  } else if (r.outcome && r.outcome->raw_response) {
    j["raw_response"] = *r.outcome->raw_response;
  }
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline TrialLogRecord log_record_from_json(const json& j, const std::string& where = "log") {
  TrialLogRecord r;
  r.spec = trial_spec_from_json(j, where);
  const std::string at = where + " " + r.spec.trial_id;
  r.status = parse_status(detail::field_as<std::string>(j, "status", at));
  r.manifest = detail::field_as<std::string>(j, "manifest", at);
  if (j.contains("raw_response")) r.raw_response = detail::field_as<std::string>(j, "raw_response", at);
  if (j.contains("error")) r.error = detail::field_as<std::string>(j, "error", at);
  if (r.status == TrialStatus::Scored) {
    TrialOutcome o;
    o.trial_id = r.spec.trial_id;
    o.selected_position = OptionPosition::parse(detail::field_as<std::string>(j, "selected_position", at));
    o.selected_position.check(r.spec.arrangement.option_count());
    o.selected_role = ContentRole::parse(detail::field_as<std::string>(j, "selected_role", at));
    o.raw_response = r.raw_response;
    if (j.contains("latency_ms")) o.latency_ms = detail::field_as<std::uint64_t>(j, "latency_ms", at);
    r.outcome = o;
  }
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic agent specs

inline json to_json(const StrategyMix& m) { return {{"p_m", m.p_m}, {"p_r", m.p_r}, {"p_g", m.p_g}}; }

inline StrategyMix mix_from_json(const json& j, const std::string& where) {
  return {detail::field_as<double>(j, "p_m", where), detail::field_as<double>(j, "p_r", where),
          detail::field_as<double>(j, "p_g", where)};
}

inline json to_json(const SyntheticAgentSpec& s) {
  json j = to_json(s.mix);
  j["o_m"] = s.o_m.str();
  j["variant"] = to_string(s.variant);
  j["reasoning_success"] = s.reasoning_success;
  if (!s.guess_weights.empty()) j["guess_weights"] = s.guess_weights;
  if (s.at_theta_1) j["at_theta_1"] = to_json(*s.at_theta_1);
  return j;
}

inline SyntheticAgentSpec agent_from_json(const json& j, const std::string& where) {
  SyntheticAgentSpec s;
  s.mix = mix_from_json(j, where);
  if (j.contains("o_m")) s.o_m = OptionPosition::parse(detail::field_as<std::string>(j, "o_m", where));
  if (j.contains("variant")) s.variant = parse_variant(detail::field_as<std::string>(j, "variant", where));
  if (j.contains("reasoning_success")) s.reasoning_success = detail::field_as<double>(j, "reasoning_success", where);
  if (j.contains("guess_weights")) s.guess_weights = detail::field_as<std::vector<double>>(j, "guess_weights", where);
  if (j.contains("at_theta_1")) s.at_theta_1 = mix_from_json(j.at("at_theta_1"), where + ".at_theta_1");
  return s;
}

/// {"default": agent, "questions": {"<id>": agent, ...}}; either part may be omitted.
inline json to_json(const SyntheticRespondent& r) {
  json j = json::object();
  if (r.default_spec()) j["default"] = to_json(*r.default_spec());
  if (!r.per_question().empty()) {
    json q = json::object();
    for (const auto& [id, spec] : r.per_question()) q[id] = to_json(spec);
    j["questions"] = q;
  }
  return j;
}

inline SyntheticRespondent synthetic_from_json(const json& j, std::size_t k, const std::string& where = "agents") {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  SyntheticRespondent r;
  if (j.contains("default")) r.set_default(agent_from_json(j.at("default"), where + ".default"));
  if (j.contains("questions")) {
    for (const auto& [id, spec] : j.at("questions").items()) {
      r.set(id, agent_from_json(spec, where + ".questions." + id));
    }
  }
  if (!r.default_spec() && r.per_question().empty()) throw ValidationError(where + ": no agents defined");
  r.validate(k);
  return r;
}

// ---------------------------------------------------------------------------
// Manifest

enum class Design { Sweep, Balanced };

inline const char* to_string(Design d) { return d == Design::Sweep ? "sweep" : "balanced"; }

inline Design parse_design(std::string_view s) {
  if (s == "sweep") return Design::Sweep;
  if (s == "balanced") return Design::Balanced;
  throw ValidationError("unknown design '" + std::string(s) + "'");
}

/// Immutable description of one experiment. Everything needed to rebuild the
/// plan and the respondent lives here; created_at is informational and left
/// out of the hash.
struct RunManifest {
  int manifest_version = kManifestVersion;
  std::string dataset_fingerprint;
  std::size_t k = kDefaultOptionCount;
  Design design = Design::Balanced;
  SweepConfig sweep;
  BalancedDesignConfig balanced;
  json respondent = json::object();
  MemorizedPositionPolicy o_m_policy = MemorizedPositionPolicy::OriginalPosition;
  EntropyMode entropy_mode = EntropyMode::ContentAligned;
  std::uint64_t master_seed = 0;
  std::string tool_version = kToolVersion;
  std::string created_at;

  json body() const {
    json design_cfg;
    if (design == Design::Sweep) {
      json protocols = json::array();
      for (auto p : sweep.protocols) protocols.push_back(to_string(p));
      json anchors = json::array();
      for (auto a : sweep.anchor_positions) anchors.push_back(a.str());
      design_cfg = {{"theta_grid", sweep.theta_grid},
                    {"protocols", protocols},
                    {"anchor_positions", anchors},
                    {"trials_per_cell", sweep.trials_per_cell}};
    } else {
      design_cfg = {{"trials_per_position", balanced.trials_per_position}};
    }
    return {{"manifest_version", manifest_version},
            {"dataset_fingerprint", dataset_fingerprint},
            {"k", k},
            {"design", to_string(design)},
            {"design_config", design_cfg},
            {"respondent", respondent},
            {"o_m_policy", to_string(o_m_policy)},
            {"entropy_mode", to_string(entropy_mode)},
            {"master_seed", master_seed},
            {"tool_version", tool_version}};
  }

  std::string hash() const { return to_hex(fnv1a64(body().dump())); }

  json to_json() const {
    json j = body();
    j["hash"] = hash();
    j["created_at"] = created_at;
    return j;
  }

  static RunManifest from_json(const json& j, const std::string& where = "manifest") {
    RunManifest m;
    m.manifest_version = detail::field_as<int>(j, "manifest_version", where);
    if (m.manifest_version != kManifestVersion) {
      throw ValidationError(where + ": unsupported manifest_version " + std::to_string(m.manifest_version));
    }
    m.dataset_fingerprint = detail::field_as<std::string>(j, "dataset_fingerprint", where);
    m.k = detail::field_as<std::size_t>(j, "k", where);
    m.design = parse_design(detail::field_as<std::string>(j, "design", where));
    const auto& cfg = j.at("design_config");
    if (m.design == Design::Sweep) {
      m.sweep.theta_grid = detail::field_as<std::vector<double>>(cfg, "theta_grid", where);
      m.sweep.protocols.clear();
      for (const auto& p : detail::field_as<std::vector<std::string>>(cfg, "protocols", where)) {
        m.sweep.protocols.push_back(parse_protocol(p));
      }
      for (const auto& a : detail::field_as<std::vector<std::string>>(cfg, "anchor_positions", where)) {
        m.sweep.anchor_positions.push_back(OptionPosition::parse(a));
      }
      m.sweep.trials_per_cell = detail::field_as<std::uint32_t>(cfg, "trials_per_cell", where);
    } else {
      m.balanced.trials_per_position = detail::field_as<std::uint32_t>(cfg, "trials_per_position", where);
    }
    m.respondent = j.at("respondent");
    m.o_m_policy = parse_policy(detail::field_as<std::string>(j, "o_m_policy", where));
    m.entropy_mode = parse_entropy_mode(detail::field_as<std::string>(j, "entropy_mode", where));
    m.master_seed = detail::field_as<std::uint64_t>(j, "master_seed", where);
    m.sweep.master_seed = m.master_seed;
    m.balanced.master_seed = m.master_seed;
    m.tool_version = detail::field_as<std::string>(j, "tool_version", where);
    if (j.contains("created_at")) m.created_at = detail::field_as<std::string>(j, "created_at", where);
    if (j.contains("hash") && j.at("hash").get<std::string>() != m.hash()) {
      throw ValidationError(where + ": stored hash does not match manifest content");
    }
    return m;
  }
};

inline RunManifest load_manifest(const std::filesystem::path& path) {
  return RunManifest::from_json(parse_json(read_file(path), path.string()), path.string());
}

}  // namespace strategem

#endif  // STRATEGEM_IO_HPP
