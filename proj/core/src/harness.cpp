#include "coalesce/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <system_error>

#include "coalesce/chain_json.hpp"
#include "coalesce/errors.hpp"
#include "json_count.hpp"

namespace coalesce {
namespace {

using nlohmann::json;

constexpr double kOptional = std::numeric_limits<double>::quiet_NaN();

const std::map<std::string, ExperimentKind>& kind_names() {
  static const std::map<std::string, ExperimentKind> names{
      {"meanfield", ExperimentKind::Meanfield},   {"kn_exact", ExperimentKind::KnExact},
      {"counterexample", ExperimentKind::Counterexample}, {"envelope", ExperimentKind::Envelope},
      {"duality", ExperimentKind::Duality},       {"correlation", ExperimentKind::Correlation},
      {"diagnostics", ExperimentKind::Diagnostics}};
  return names;
}

// Tolerance keys per kind; NaN marks an optional check that is off by default.
std::map<std::string, double> default_tolerances(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Meanfield:
      return {{"ratio_min", 1.8}, {"ratio_max", 2.2}, {"w1_max", 0.15}, {"mean_gap_slack", 1e-9},
              {"reference_mean_se", kOptional}};
    case ExperimentKind::Counterexample:
      return {{"separation_se", 3.0}, {"mean_gap_slack", 1e-9}};
    case ExperimentKind::KnExact:
      return {{"exact", 1e-8}};
    case ExperimentKind::Envelope:
      return {{"alpha_max", 0.2}, {"beta_max", 0.2}, {"quantile_deviation", 0.1}, {"mean_ratio_deviation", 0.2}};
    case ExperimentKind::Duality:
      return {};
    case ExperimentKind::Correlation:
      return {{"transitive_violation", 1e-9}};
    case ExperimentKind::Diagnostics:
      return {{"bound_violation", 1e-9}, {"balance_residual", 1e-10}};
  }
  return {};
}

std::set<std::string> allowed_keys(ExperimentKind k) {
  std::set<std::string> keys{"kind",  "graph",        "chain",        "replications",         "seed",
                             "workers", "output_dir", "tolerances", "state_budget", "max_walltime_seconds",
                             "max_events"};
  const auto add = [&](std::initializer_list<const char*> extra) {
    for (const char* e : extra) keys.insert(e);
  };
  switch (k) {
    case ExperimentKind::Meanfield: add({"initial", "walkers", "n_ref", "columns"}); break;
    case ExperimentKind::Counterexample: add({"initial", "walkers", "n_ref", "columns", "expect_separation"}); break;
    case ExperimentKind::KnExact: add({"sizes"}); break;
    case ExperimentKind::Envelope: add({"k", "epsilon", "grid_points", "start"}); break;
    case ExperimentKind::Duality: add({"mu", "shuffles", "level"}); break;
    case ExperimentKind::Correlation: add({"k", "epsilons", "mode", "bound", "samples"}); break;
    case ExperimentKind::Diagnostics: add({"c0", "c1", "model", "horizons"}); break;
  }
  return keys;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config field \"" + key + "\" " + what);
}

std::uint64_t as_uint(const json& v, const std::string& key) {
  if (!detail::is_count(v)) bad(key, "must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(key, "must be finite");
  return d;
}

std::string as_string(const json& v, const std::string& key, std::initializer_list<const char*> choices) {
  if (!v.is_string()) bad(key, "must be a string");
  const auto s = v.get<std::string>();
  for (const char* c : choices) {
    if (s == c) return s;
  }
  std::string list;
  for (const char* c : choices) list += std::string(list.empty() ? "" : ", ") + c;
  bad(key, "must be one of: " + list);
}

template <typename T, typename F>
std::vector<T> as_array(const json& v, const std::string& key, F&& item) {
  if (!v.is_array() || v.empty()) bad(key, "must be a nonempty array");
  std::vector<T> out;
  for (const auto& e : v) out.push_back(item(e, key));
  return out;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [name, kind] : kind_names()) {
    if (kind == k) return name;
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  const auto it = kind_names().find(name);
  if (it == kind_names().end()) throw ConfigError("unknown experiment kind \"" + name + "\"");
  return it->second;
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (!doc.contains("kind")) throw ConfigError("config field \"kind\" is required");
  ExperimentConfig cfg;
  cfg.kind = experiment_kind_from_string(as_string(doc["kind"], "kind",
                                                   {"meanfield", "kn_exact", "counterexample", "envelope",
                                                    "duality", "correlation", "diagnostics"}));
  const auto allowed = allowed_keys(cfg.kind);
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError("unknown field \"" + key + "\" for kind " + to_string(cfg.kind));
  }

  const bool needs_chain = cfg.kind != ExperimentKind::KnExact;
  if (doc.contains("graph") && doc.contains("chain")) throw ConfigError("give either \"graph\" or \"chain\", not both");
  if (doc.contains("graph")) cfg.graph = graph_spec_from_json(doc["graph"]);
  if (doc.contains("chain")) {
    if (!doc["chain"].is_string()) bad("chain", "must be a path string");
    std::filesystem::path p = doc["chain"].get<std::string>();
    cfg.chain_path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
  if (needs_chain && !cfg.graph && !cfg.chain_path) throw ConfigError("config needs \"graph\" or \"chain\"");

  if (doc.contains("replications")) cfg.replications = as_uint(doc["replications"], "replications");
  if (cfg.replications == 0) bad("replications", "must be >= 1");
  if (doc.contains("seed")) cfg.seed = as_uint(doc["seed"], "seed");
  if (doc.contains("workers")) cfg.workers = as_uint(doc["workers"], "workers");
  if (cfg.workers == 0) bad("workers", "must be >= 1");
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) bad("output_dir", "must be a path string");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("state_budget")) cfg.state_budget = as_uint(doc["state_budget"], "state_budget");
  if (doc.contains("max_walltime_seconds")) {
    cfg.max_walltime_seconds = as_double(doc["max_walltime_seconds"], "max_walltime_seconds");
    if (cfg.max_walltime_seconds < 0.0) bad("max_walltime_seconds", "must be >= 0");
  }
  if (doc.contains("max_events")) cfg.max_events = as_uint(doc["max_events"], "max_events");

  // Tolerances: known keys only; defaults fill the rest.
  auto tol = default_tolerances(cfg.kind);
  if (doc.contains("tolerances")) {
    if (!doc["tolerances"].is_object()) bad("tolerances", "must be an object");
    for (const auto& [key, value] : doc["tolerances"].items()) {
      if (!tol.count(key)) throw ConfigError("unknown tolerance \"" + key + "\" for kind " + to_string(cfg.kind));
      tol[key] = as_double(value, "tolerances." + key);
    }
  }
  for (const auto& [key, value] : tol) {
    if (!std::isnan(value)) cfg.tolerances[key] = value;
  }

  if (doc.contains("initial")) cfg.initial = as_string(doc["initial"], "initial", {"all_vertices", "stationary_iid"});
  if (doc.contains("walkers")) cfg.walkers = as_uint(doc["walkers"], "walkers");
  if (cfg.initial == "stationary_iid" && cfg.walkers == 0) bad("walkers", "must be >= 1 for stationary_iid starts");
  if (doc.contains("n_ref")) {
    cfg.n_ref = as_uint(doc["n_ref"], "n_ref");
    if (*cfg.n_ref < 2) bad("n_ref", "must be >= 2");
  }
  if (doc.contains("columns")) {
    cfg.columns = as_array<std::size_t>(doc["columns"], "columns", as_uint);
    for (auto c : cfg.columns) {
      if (c < 2) bad("columns", "entries must be >= 2");
    }
  }
  if (doc.contains("expect_separation")) {
    if (!doc["expect_separation"].is_boolean()) bad("expect_separation", "must be a boolean");
    cfg.expect_separation = doc["expect_separation"].get<bool>();
  }
  if (doc.contains("sizes")) {
    cfg.sizes = as_array<std::size_t>(doc["sizes"], "sizes", as_uint);
    for (auto n : cfg.sizes) {
      if (n < 2) bad("sizes", "entries must be >= 2");
    }
  }
  if (doc.contains("k")) {
    if (cfg.kind == ExperimentKind::Envelope) {
      cfg.walker_counts = as_array<std::size_t>(doc["k"], "k", as_uint);
      for (auto k : cfg.walker_counts) {
        if (k < 2) bad("k", "entries must be >= 2");
      }
    } else {
      cfg.walker_counts = {as_uint(doc["k"], "k")};
      if (cfg.walker_counts[0] < 3) bad("k", "must be >= 3");
    }
  } else if (cfg.kind == ExperimentKind::Correlation) {
    cfg.walker_counts = {3};
  }
  if (doc.contains("epsilon")) cfg.epsilon = as_double(doc["epsilon"], "epsilon");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) bad("epsilon", "must lie in (0, 1)");
  if (doc.contains("grid_points")) cfg.grid_points = as_uint(doc["grid_points"], "grid_points");
  if (cfg.grid_points < 2) bad("grid_points", "must be >= 2");
  if (doc.contains("start")) cfg.start = as_string(doc["start"], "start", {"stationary", "diagonal"});
  if (doc.contains("epsilons")) {
    cfg.epsilons = as_array<double>(doc["epsilons"], "epsilons", as_double);
    for (double e : cfg.epsilons) {
      if (!(e > 0.0)) bad("epsilons", "entries must be positive");
    }
  }
  if (doc.contains("mode")) cfg.mode = as_string(doc["mode"], "mode", {"auto", "exact", "monte_carlo"});
  if (doc.contains("bound")) cfg.bound = as_string(doc["bound"], "bound", {"transitive", "general"});
  if (doc.contains("samples")) cfg.samples = as_uint(doc["samples"], "samples");
  if (doc.contains("mu")) {
    cfg.mu = as_array<double>(doc["mu"], "mu", as_double);
    double total = 0.0;
    for (double p : cfg.mu) {
      if (p < 0.0) bad("mu", "entries must be >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) bad("mu", "must sum to 1");
  }
  if (doc.contains("shuffles")) cfg.shuffles = as_uint(doc["shuffles"], "shuffles");
  if (cfg.shuffles == 0) bad("shuffles", "must be >= 1");
  if (doc.contains("level")) cfg.level = as_double(doc["level"], "level");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) bad("level", "must lie in (0, 1)");
  if (doc.contains("c0")) cfg.c0 = as_double(doc["c0"], "c0");
  if (doc.contains("c1")) cfg.c1 = as_double(doc["c1"], "c1");
  if (doc.contains("model")) cfg.model = as_string(doc["model"], "model", {"general", "transitive_reversible"});
  if (doc.contains("horizons")) {
    cfg.horizons = as_array<double>(doc["horizons"], "horizons", as_double);
    for (double h : cfg.horizons) {
      if (h < 0.0) bad("horizons", "entries must be >= 0");
    }
  }
  cfg.document = doc;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

RateGenerator config_chain(const ExperimentConfig& cfg) {
  try {
    if (cfg.graph) return walk_generator(build_graph(*cfg.graph));
    if (cfg.chain_path) return load_generator(*cfg.chain_path);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("chain: ") + e.what());
  }
  throw ConfigError("config names no chain");
}

// ---------------------------------------------------------------------------

bool compare(double value, const std::string& comparator, double threshold) {
  if (!std::isfinite(value) || std::isnan(threshold)) return false;  // stored as strings; never pass
  if (comparator == "<=") return value <= threshold;
  if (comparator == "<") return value < threshold;
  if (comparator == ">=") return value >= threshold;
  if (comparator == ">") return value > threshold;
  throw std::invalid_argument("compare: unknown comparator " + comparator);
}

Check make_check(std::string name, double value, std::string comparator, double threshold) {
  Check c{std::move(name), value, std::move(comparator), threshold, false};
  c.pass = compare(c.value, c.comparator, c.threshold);
  return c;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool ExperimentReport::pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

json ExperimentReport::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks) {
    checks_json.push_back({{"name", c.name},
                           {"value", std::isfinite(c.value) ? json(c.value) : json(format_double(c.value))},
                           {"comparator", c.comparator},
                           {"threshold", c.threshold},
                           {"pass", c.pass}});
  }
  json files = json::array();
  for (const auto& t : tables) files.push_back(t.file);
  return {{"kind", coalesce::to_string(kind)}, {"config", config},   {"metrics", metrics}, {"checks", checks_json},
          {"pass", pass()},                    {"metadata", metadata}, {"files", files}};
}

bool audit_report(const json& report) {
  if (!report.contains("checks") || !report["checks"].is_array()) return false;
  bool all = true;
  for (const auto& c : report["checks"]) {
    // Non-finite values are stored as strings and can never pass.
    const bool finite = c.at("value").is_number();
    const double value = finite ? c.at("value").get<double>() : std::numeric_limits<double>::quiet_NaN();
    const bool expected = finite && compare(value, c.at("comparator").get<std::string>(), c.at("threshold").get<double>());
    if (expected != c.at("pass").get<bool>()) return false;
    all = all && expected;
  }
  return report.at("pass").get<bool>() == all;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::Meanfield: return run_meanfield(cfg);
    case ExperimentKind::KnExact: return run_kn_exact(cfg);
    case ExperimentKind::Counterexample: return run_counterexample(cfg);
    case ExperimentKind::Envelope: return run_envelope(cfg);
    case ExperimentKind::Duality: return run_duality(cfg);
    case ExperimentKind::Correlation: return run_correlation(cfg);
    case ExperimentKind::Diagnostics: return run_diagnostics(cfg);
  }
  throw ConfigError("unknown experiment kind");
}

// ---------------------------------------------------------------------------

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string render(const CsvTable& t) {
  std::string s;
  for (std::size_t i = 0; i < t.header.size(); ++i) s += (i ? "," : "") + t.header[i];
  s += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + row[i];
    s += '\n';
  }
  return s;
}

}  // namespace

void emit_plotdata(const ExperimentReport& report, const std::filesystem::path& dir) {
  for (const auto& t : report.tables) {
    if (t.rows.empty()) throw std::invalid_argument("emit_plotdata: table " + t.file + " is empty");
    for (const auto& row : t.rows) {
      if (row.size() != t.header.size()) throw std::invalid_argument("emit_plotdata: ragged table " + t.file);
    }
  }
  std::filesystem::create_directories(dir);
  for (const auto& t : report.tables) write_atomically(dir / t.file, render(t));
}

void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir) {
  emit_plotdata(report, dir);
  write_atomically(dir / "report.json", report.to_json().dump(2) + "\n");
}

}  // namespace coalesce
