// crw: runs one configured experiment and writes report.json plus CSV tables.
//
//   crw meanfield --config cfg.json [--out dir] [--workers n] [--seed s]
//
// Exit status: 0 every check passed, 1 some check failed, 2 config or budget error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "coalesce/errors.hpp"
#include "coalesce/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
};

nlohmann::json read_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw coalesce::ConfigError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw coalesce::ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

int run(const std::string& kind, const Options& opt) {
  const std::filesystem::path path(opt.config);
  auto doc = read_document(path);
  if (!doc.is_object()) throw coalesce::ConfigError("config must be a JSON object");
  // The subcommand names the kind; a config that names another kind is an error.
  if (doc.contains("kind") && doc["kind"] != kind) {
    throw coalesce::ConfigError("config kind " + doc["kind"].dump() + " does not match subcommand " + kind);
  }
  doc["kind"] = kind;
  if (opt.out) doc["output_dir"] = *opt.out;
  if (opt.workers) doc["workers"] = *opt.workers;
  if (opt.seed) doc["seed"] = *opt.seed;

  const auto cfg = coalesce::parse_config(doc, path.parent_path());
  const auto report = coalesce::run_experiment(cfg);
  coalesce::write_outputs(report, cfg.output_dir);

  for (const auto& c : report.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << ' ' << c.comparator << ' '
              << c.threshold << '\n';
  }
  std::cout << (report.pass() ? "PASS" : "FAIL") << ' ' << kind << " -> " << (cfg.output_dir / "report.json").string()
            << '\n';
  return report.pass() ? coalesce::kExitPass : coalesce::kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coalescing random walk and voter model experiments"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  for (const char* kind : {"meanfield", "counterexample", "envelope", "duality", "correlation", "diagnostics",
                           "kn_exact"}) {
    auto* sub = app.add_subcommand(kind, std::string("run a ") + kind + " experiment");
    sub->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (overrides output_dir)");
    sub->add_option("--workers", opt.workers, "worker threads (overrides workers)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", opt.seed, "base seed (overrides seed)");
    sub->callback([&chosen, kind] { chosen = kind; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return coalesce::kExitConfig;
  }

  try {
    return run(chosen, opt);
  } catch (const coalesce::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const coalesce::BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << '\n';
  } catch (const coalesce::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return coalesce::kExitConfig;
}
