#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coalesce/chain.hpp"
#include "coalesce/graph.hpp"

namespace coalesce {

enum class ExperimentKind { Meanfield, KnExact, Counterexample, Envelope, Duality, Correlation, Diagnostics };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// Validated experiment description. Kind-specific fields are ignored by
/// other kinds but rejected at parse time when not allowed for the kind.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Meanfield;
  std::optional<GraphSpec> graph;
  std::optional<std::filesystem::path> chain_path;  // generator JSON, relative to the config file
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path output_dir = "out";
  std::size_t state_budget = kDefaultStateBudget;
  double max_walltime_seconds = 0.0;  // per run; 0 disables
  std::uint64_t max_events = 0;       // per run; 0 disables
  /// Every tolerance the kind uses, defaults filled in.
  std::map<std::string, double> tolerances;

  // meanfield, counterexample
  std::string initial = "all_vertices";  // or "stationary_iid"
  std::size_t walkers = 0;               // stationary_iid only
  std::optional<std::size_t> n_ref;      // default: walker count
  std::vector<std::size_t> columns;      // extra C_p levels in samples.csv
  bool expect_separation = true;         // counterexample

  // kn_exact
  std::vector<std::size_t> sizes{3, 4, 10};

  // envelope, correlation
  std::vector<std::size_t> walker_counts{2, 3};
  double epsilon = 0.05;
  std::size_t grid_points = 200;
  std::string start = "stationary";  // or "diagonal"

  // correlation
  std::vector<double> epsilons{0.02, 0.05, 0.1};
  std::string mode = "auto";        // "exact", "monte_carlo"
  std::string bound = "transitive";  // or "general"
  std::size_t samples = 100000;

  // duality
  std::vector<double> mu{0.5, 0.5};
  std::size_t shuffles = 1000;
  double level = 0.01;

  // diagnostics
  double c0 = 1.0;
  double c1 = 1.0;
  std::string model = "general";  // or "transitive_reversible"
  std::vector<double> horizons{0.1, 0.5, 1.0, 2.0, 5.0};

  /// The validated document, echoed into report.json.
  nlohmann::json document;
};

/// Parses and validates a config; unknown or misplaced fields throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// The chain named by the config: a graph walk or a generator file.
RateGenerator config_chain(const ExperimentConfig& cfg);

struct Check {
  std::string name;
  double value = 0.0;
  std::string comparator;  // one of <=, <, >=, >
  double threshold = 0.0;
  bool pass = false;
};

bool compare(double value, const std::string& comparator, double threshold);
Check make_check(std::string name, double value, std::string comparator, double threshold);

/// Table written with %.17g doubles; cells are preformatted.
struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_double(double v);

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::Meanfield;
  nlohmann::json config;
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<Check> checks;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CsvTable> tables;

  bool pass() const;
  nlohmann::json to_json() const;
};

/// Recomputes every flag of a serialized report from its values and thresholds.
bool audit_report(const nlohmann::json& report);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

ExperimentReport run_meanfield(const ExperimentConfig& cfg);
ExperimentReport run_kn_exact(const ExperimentConfig& cfg);
ExperimentReport run_counterexample(const ExperimentConfig& cfg);
ExperimentReport run_envelope(const ExperimentConfig& cfg);
ExperimentReport run_duality(const ExperimentConfig& cfg);
ExperimentReport run_correlation(const ExperimentConfig& cfg);
ExperimentReport run_diagnostics(const ExperimentConfig& cfg);

/// Writes the report's tables into dir. Every table is checked before any
/// file is written; each file is written to a temporary and renamed.
void emit_plotdata(const ExperimentReport& report, const std::filesystem::path& dir);
/// Writes report.json and the tables.
void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir);

/// 0 all checks pass, 1 some check fails, 2 config or budget error.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

}  // namespace coalesce
