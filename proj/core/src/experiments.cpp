#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "coalesce/coalescing.hpp"
#include "coalesce/errors.hpp"
#include "coalesce/harness.hpp"
#include "coalesce/hitting.hpp"
#include "coalesce/meanfield.hpp"
#include "coalesce/parallel.hpp"
#include "coalesce/wasserstein.hpp"

#ifndef COALESCE_VERSION
#define COALESCE_VERSION "unknown"
#endif

namespace coalesce {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kCdfPoints = 400;

ExperimentReport start_report(const ExperimentConfig& cfg) {
  ExperimentReport r;
  r.kind = cfg.kind;
  r.config = cfg.document;
  r.metadata = {{"seed", cfg.seed},
                {"workers", cfg.workers},
                {"replications", cfg.replications},
                {"version", COALESCE_VERSION}};
  return r;
}

void finish(ExperimentReport& r, Clock::time_point t0) {
  r.metadata["walltime_seconds"] = std::chrono::duration<double>(Clock::now() - t0).count();
}

double tol(const ExperimentConfig& cfg, const std::string& key) { return cfg.tolerances.at(key); }

std::string chain_label(const ExperimentConfig& cfg) {
  return cfg.graph ? cfg.graph->label() : cfg.chain_path->string();
}

std::string u64(std::uint64_t v) { return std::to_string(v); }

// Short form for check names; table cells use format_double.
std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

json diagnostics_json(const ChainDiagnostics& d) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  return {{"q_max", d.q_max},
          {"q_max_single", d.q_max_single},
          {"pi_max", d.pi_max},
          {"t_mix", d.t_mix},
          {"alpha_q", d.alpha_q},
          {"meeting_mean", opt(d.meeting_mean)},
          {"ratio", opt(d.ratio)},
          {"err", std::isfinite(d.err.value_or(0.0)) ? opt(d.err) : json("inf")}};
}

DiagnosticsOptions diagnostics_options(const ExperimentConfig& cfg) {
  DiagnosticsOptions o;
  o.c0 = cfg.c0;
  o.c1 = cfg.c1;
  o.model = cfg.model == "transitive_reversible" ? ErrorModel::TransitiveReversible : ErrorModel::General;
  return o;
}

// (t, F_a(t), F_b(t)) on a uniform grid over [0, t_max].
template <typename Fa, typename Fb>
CsvTable cdf_table(std::string file, std::vector<std::string> header, double t_max, Fa&& fa, Fb&& fb) {
  CsvTable t{std::move(file), std::move(header), {}};
  if (!(t_max > 0.0)) t_max = 1.0;
  for (std::size_t j = 0; j < kCdfPoints; ++j) {
    const double x = t_max * static_cast<double>(j) / static_cast<double>(kCdfPoints - 1);
    t.rows.push_back({format_double(x), format_double(fa(x)), format_double(fb(x))});
  }
  return t;
}

double empirical_cdf(const EmpiricalSample& s, double t) {
  const auto v = s.values();
  return static_cast<double>(std::upper_bound(v.begin(), v.end(), t) - v.begin()) / static_cast<double>(v.size());
}

// --- Coalescence experiments -------------------------------------------------

ExperimentReport coalescence_experiment(const ExperimentConfig& cfg, bool counterexample) {
  const auto t0 = Clock::now();
  auto report = start_report(cfg);
  const auto q = config_chain(cfg);
  const auto pi = stationary_distribution(q);
  const double m = meeting_mean(q, cfg.state_budget);
  const auto mixing = mixing_time(q, pi, 0.25);
  const auto diag = chain_diagnostics(q, pi, mixing, m, diagnostics_options(cfg));

  RunConfig rc;
  rc.mode = cfg.initial == "stationary_iid" ? InitialMode::StationaryIid : InitialMode::AllVertices;
  rc.walkers = cfg.walkers;
  rc.replications = cfg.replications;
  rc.seed = cfg.seed;
  rc.max_walltime_seconds = cfg.max_walltime_seconds;
  rc.max_events = cfg.max_events;
  const std::size_t k = rc.mode == InitialMode::AllVertices ? q.size() : cfg.walkers;
  for (auto c : cfg.columns) {
    if (c > k) throw ConfigError("config field \"columns\" has a level above the walker count");
  }
  const std::size_t n_ref = cfg.n_ref.value_or(std::max<std::size_t>(k, 2));
  if (cfg.replications < 2) throw ConfigError("config field \"replications\" must be >= 2 for this experiment");

  const auto sample = sample_full_coalescence(q, rc, cfg.workers, cfg.columns);
  std::vector<double> ratio(sample.final_time);
  for (double& x : ratio) x /= m;
  const EmpiricalSample scaled(ratio, cfg.seed, "C/m");
  const auto ms = mean_and_se(scaled);
  const HypoExpRef ref(n_ref);
  const auto cmp = compare_to_reference(scaled, ref, counterexample ? std::nullopt : std::optional(tol(cfg, "w1_max")));
  const double reference_z = ms.standard_error > 0.0 ? std::abs(ms.mean - ref.mean()) / ms.standard_error : INFINITY;
  // Separation from the limit 2: sampling error combined with the finite-size gap 2 / n_ref.
  const double truncation = 2.0 / static_cast<double>(n_ref);
  const double combined_se = std::hypot(ms.standard_error, truncation);
  const double separation_z = std::abs(ms.mean - 2.0) / combined_se;

  std::uint64_t events = 0;
  for (auto e : sample.events) events += e;
  report.metrics = {{"chain", chain_label(cfg)},
                    {"states", q.size()},
                    {"walkers", k},
                    {"initial", cfg.initial},
                    {"m", m},
                    {"diagnostics", diagnostics_json(diag)},
                    {"n_ref", n_ref},
                    {"reference_mean", ref.mean()},
                    {"mean_ratio", ms.mean},
                    {"mean_ratio_se", ms.standard_error},
                    {"reference_mean_z", reference_z},
                    {"w1", cmp.w1},
                    {"mean_gap", cmp.mean_gap},
                    {"mean_gap_consistent", cmp.mean_gap_consistent},
                    {"combined_se", combined_se},
                    {"separation_z", separation_z},
                    {"ks_statistic", ks_statistic(scaled, ref)},
                    {"total_events", events}};

  report.checks.push_back(make_check("mean_gap_minus_w1", cmp.mean_gap - cmp.w1, "<=", tol(cfg, "mean_gap_slack")));
  if (counterexample) {
    const double threshold = tol(cfg, "separation_se");
    report.metrics["expect_separation"] = cfg.expect_separation;
    report.checks.push_back(
        make_check("separation_z", separation_z, cfg.expect_separation ? ">" : "<=", threshold));
  } else {
    report.checks.push_back(make_check("mean_ratio_low", ms.mean, ">=", tol(cfg, "ratio_min")));
    report.checks.push_back(make_check("mean_ratio_high", ms.mean, "<=", tol(cfg, "ratio_max")));
    report.checks.push_back(make_check("w1", cmp.w1, "<=", tol(cfg, "w1_max")));
    if (cfg.tolerances.count("reference_mean_se")) {
      report.checks.push_back(make_check("reference_mean_z", reference_z, "<=", tol(cfg, "reference_mean_se")));
    }
  }

  CsvTable samples{"samples.csv", {"replica", "seed", "C_1"}, {}};
  for (auto c : cfg.columns) samples.header.push_back("C_" + std::to_string(c));
  samples.header.push_back("walltime");
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    std::vector<std::string> row{u64(r), u64(cfg.seed), format_double(sample.final_time[r])};
    for (std::size_t c = 0; c < cfg.columns.size(); ++c) row.push_back(format_double(sample.column_values[c][r]));
    row.push_back(format_double(sample.walltime[r]));
    samples.rows.push_back(std::move(row));
  }
  report.tables.push_back(std::move(samples));
  report.tables.push_back(cdf_table(
      "cdf_compare.csv", {"t", "F_emp", "F_ref"}, scaled[scaled.size() - 1] * 1.05,
      [&](double t) { return empirical_cdf(scaled, t); }, [&](double t) { return ref.cdf(t); }));
  finish(report, t0);
  return report;
}

// --- Exact oracle suite ---------------------------------------------------------

ExperimentReport kn_exact(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  auto report = start_report(cfg);
  const double eps = tol(cfg, "exact");
  json values = json::object();
  const auto check = [&](const std::string& name, double computed, double expected) {
    values[name] = {{"computed", computed}, {"expected", expected}};
    report.checks.push_back(make_check(name, std::abs(computed - expected), "<=", eps));
  };

  // Symmetric two-state chain with unit rates.
  const std::vector<Transition> unit{{0, 1, 1.0}, {1, 0, 1.0}};
  const auto two = RateGenerator::from_transitions(2, unit);
  const auto pi2 = stationary_distribution(two);
  check("two_state_pi0", pi2[0], 0.5);
  for (double t : {0.1, 0.5, 1.0, 2.0}) {
    const auto p = transition_distribution(two, ProbabilityVector::point_mass(2, 0), t);
    check("two_state_stay_t" + label(t), p[0], (1.0 + std::exp(-2.0 * t)) / 2.0);
  }
  MixingOptions tight;
  tight.relative_tolerance = 1e-10;
  check("two_state_t_mix", mixing_time(two, 0.25, tight).t_mix, std::numbers::ln2 / 2.0);
  // Asymmetric rates a = 1, b = 3: pi = (b, a) / (a + b).
  const std::vector<Transition> skew{{0, 1, 1.0}, {1, 0, 3.0}};
  check("two_state_skew_pi0", stationary_distribution(RateGenerator::from_transitions(2, skew))[0], 0.75);

  check("k2_meeting_mean", meeting_mean(walk_generator(build_graph(GraphSpec::complete(2)))), 0.25);
  for (auto n : cfg.sizes) {
    const double nn = static_cast<double>(n);
    check("k" + std::to_string(n) + "_meeting_mean", meeting_mean(walk_generator(build_graph(GraphSpec::complete(n)))),
          (1.0 - 1.0 / nn) * (nn - 1.0) / 2.0);
  }
  // Walks on graphs: pi(x) = deg(x) / 2|E|.
  for (const auto& spec : {GraphSpec::star(6), GraphSpec::path(5), GraphSpec::cycle(7), GraphSpec::torus(2, 3)}) {
    const auto g = build_graph(spec);
    const auto pi = stationary_distribution(walk_generator(g));
    double worst = 0.0;
    for (State x = 0; x < g.vertex_count(); ++x) {
      worst = std::max(worst, std::abs(pi[x] - static_cast<double>(g.degree(x)) / (2.0 * g.edge_count())));
    }
    check(spec.label() + "_pi", worst, 0.0);
  }
  report.metrics = {{"values", values}};
  finish(report, t0);
  return report;
}

// --- Envelopes -------------------------------------------------------------------

ProbabilityVector off_target(const ProbabilityVector& start, const TargetSet& a) {
  std::vector<double> v(start.values().begin(), start.values().end());
  for (State s = 0; s < v.size(); ++s) {
    if (a.contains(s)) v[s] = 0.0;
  }
  return ProbabilityVector::normalized(std::move(v));
}

ExperimentReport envelope(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  auto report = start_report(cfg);
  const auto q = config_chain(cfg);
  const std::size_t n = q.size();
  const auto pi = stationary_distribution(q);
  const auto mixing = mixing_time(q, pi, 0.25);
  const auto pair_diag = TargetSet::diagonal(n);
  const double m = meeting_mean(q, cfg.state_budget);
  const double pi_diag = pair_diag.mass(tensor_power(pi, 2));
  const double m_off = m / (1.0 - pi_diag);  // E[M] from pi x pi conditioned off the diagonal

  report.metrics = {{"chain", chain_label(cfg)}, {"states", n},        {"m", m},
                    {"m_off_diagonal", m_off},   {"t_mix", mixing.t_mix}, {"start", cfg.start},
                    {"epsilon", cfg.epsilon}};
  json per_k = json::object();
  for (auto k : cfg.walker_counts) {
    const auto prod = product_chain(q, k, cfg.state_budget);
    const auto target = k == 2 ? pair_diag : TargetSet::any_pair_diagonal(n, k);
    const double ell = static_cast<double>(k * (k - 1) / 2);
    const auto start = cfg.start == "stationary" ? tensor_power(pi, k)
                                                 : ProbabilityVector::point_mass(prod.size(), 0);
    const auto curve = survival(prod, target, start);
    const double scale = m / ell;
    const auto grid = envelope_grid(scale, cfg.grid_points);
    const auto fit = envelope_fit(curve, scale, grid, mixing.t_mix);
    const std::string tag = "k" + std::to_string(k);
    json j = {{"walkers", k},
              {"pairs", ell},
              {"scale", scale},
              {"mean", curve.mean()},
              {"alpha", fit.alpha},
              {"beta", fit.beta},
              {"w1_bound", envelope_w1_bound(fit.envelope())},
              {"certified", fit.certified},
              {"applicable", fit.applicable},
              {"r_lambda", fit.r_lambda ? json(*fit.r_lambda) : json()}};
    if (cfg.start == "stationary") {
      const auto cond = off_target(start, target);
      const auto cond_curve = survival(prod, target, cond);
      const auto qr = quantile(cond_curve, cfg.epsilon);
      j["quantile"] = to_json(qr);
      j["mean_ratio"] = curve.mean() / scale;
      j["mean_ratio_off_diagonal"] = cond_curve.mean() / (m_off / ell);
      if (k == 2) {
        report.checks.push_back(make_check("alpha_k2", fit.alpha, "<=", tol(cfg, "alpha_max")));
        report.checks.push_back(make_check("beta_k2", fit.beta, "<=", tol(cfg, "beta_max")));
        report.checks.push_back(make_check("certified_k2", fit.certified ? 1.0 : 0.0, ">=", 1.0));
        report.checks.push_back(make_check("quantile_deviation_k2", qr.deviation, "<=", tol(cfg, "quantile_deviation")));
      } else {
        report.checks.push_back(make_check("mean_ratio_deviation_" + tag, std::abs(curve.mean() / scale - 1.0), "<=",
                                           tol(cfg, "mean_ratio_deviation")));
      }
    } else {
      report.checks.push_back(make_check("not_applicable_" + tag, fit.applicable ? 0.0 : 1.0, ">=", 1.0));
      report.checks.push_back(make_check("r_lambda_" + tag, fit.r_lambda.value_or(0.0), ">=", 1.0));
    }
    per_k[tag] = j;

    const auto env = fit.envelope();
    CsvTable t{k == 2 ? "survival_vs_envelope.csv" : "survival_vs_envelope_" + tag + ".csv",
               {"t", "survival", "lower", "upper", "exponential"},
               {}};
    for (std::size_t i = 0; i < fit.grid.size(); ++i) {
      const double x = fit.grid[i];
      t.rows.push_back({format_double(x), format_double(fit.survival[i]), format_double(env.lower(x)),
                        format_double(env.upper(x)), format_double(std::exp(-x / scale))});
    }
    report.tables.push_back(std::move(t));
  }
  report.metrics["walkers"] = per_k;
  finish(report, t0);
  return report;
}

// --- Voter duality ----------------------------------------------------------------

ExperimentReport duality(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  auto report = start_report(cfg);
  const auto q = config_chain(cfg);
  KLaw law = [&] {
    try {
      return KLaw(cfg.mu);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mu: ") + e.what());
    }
  }();
  const std::size_t reps = cfg.replications;
  if (reps < 2) throw ConfigError("config field \"replications\" must be >= 2 for duality");
  const std::uint64_t forward_key = splitmix64(cfg.seed);
  const std::uint64_t budget = cfg.max_events ? cfg.max_events : 10'000'000;
  std::vector<double> dual(reps), forward(reps);
  std::vector<std::uint64_t> events(reps);
  std::vector<char> absorbed(reps);
  parallel_for(reps, cfg.workers, [&](std::size_t r) {
    auto a = replica_rng(cfg.seed, r);
    dual[r] = simulate_voter_dual(q, law, a);
    auto b = replica_rng(forward_key, r);
    const auto f = simulate_voter_forward(q, law, b, budget);
    forward[r] = f.consensus_time;
    events[r] = f.events;
    absorbed[r] = f.absorbed;
  });
  const EmpiricalSample sd(dual, cfg.seed, "dual"), sf(forward, forward_key, "forward");
  const auto test = permutation_test_w1(sd, sf, cfg.shuffles, cfg.level, cfg.seed);
  const auto md = mean_and_se(sd), mf = mean_and_se(sf);
  const auto not_absorbed = static_cast<double>(std::count(absorbed.begin(), absorbed.end(), 0));
  report.metrics = {{"chain", chain_label(cfg)},
                    {"states", q.size()},
                    {"mu", cfg.mu},
                    {"dual_mean", md.mean},
                    {"dual_se", md.standard_error},
                    {"forward_mean", mf.mean},
                    {"forward_se", mf.standard_error},
                    {"reference_mean", voter_ref_mean(law, q.size())},
                    {"permutation", to_json(test)},
                    {"forward_not_absorbed", not_absorbed}};
  report.checks.push_back(make_check("permutation_p_value", test.p_value, ">=", cfg.level));
  report.checks.push_back(make_check("forward_not_absorbed", not_absorbed, "<=", 0.0));

  CsvTable td{"samples_dual.csv", {"replica", "seed", "tau"}, {}};
  CsvTable tf{"samples_forward.csv", {"replica", "seed", "tau", "events"}, {}};
  for (std::size_t r = 0; r < reps; ++r) {
    td.rows.push_back({u64(r), u64(cfg.seed), format_double(dual[r])});
    tf.rows.push_back({u64(r), u64(forward_key), format_double(forward[r]), u64(events[r])});
  }
  report.tables.push_back(std::move(td));
  report.tables.push_back(std::move(tf));
  const double t_max = std::max(sd[sd.size() - 1], sf[sf.size() - 1]) * 1.05;
  report.tables.push_back(cdf_table(
      "cdf_compare.csv", {"t", "F_dual", "F_forward"}, t_max, [&](double t) { return empirical_cdf(sd, t); },
      [&](double t) { return empirical_cdf(sf, t); }));
  finish(report, t0);
  return report;
}

// --- Correlations -------------------------------------------------------------------

ExperimentReport correlation(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  auto report = start_report(cfg);
  const auto q = config_chain(cfg);
  const std::size_t k = cfg.walker_counts.at(0);
  MeetingCorrelationOptions opts;
  opts.mode = cfg.mode == "exact"         ? CorrelationMode::Exact
              : cfg.mode == "monte_carlo" ? CorrelationMode::MonteCarlo
                                          : CorrelationMode::Auto;
  opts.state_budget = cfg.state_budget;
  opts.samples = cfg.samples;
  opts.seed = cfg.seed;

  json per_eps = json::array();
  CsvTable terms{"correlation_terms.csv",
                 {"epsilon", "first", "second", "joint", "marginal_first", "marginal_second", "bound"},
                 {}};
  for (double eps : cfg.epsilons) {
    const auto r = meeting_correlation(q, k, eps, opts);
    double worst = -INFINITY;
    for (const auto& t : r.terms) {
      // Monte Carlo joints are compared after allowing three standard errors.
      const double noise = t.standard_error ? 3.0 * *t.standard_error : 0.0;
      worst = std::max(worst, t.joint - noise - *r.transitive_bound);
      terms.rows.push_back({format_double(eps), u64(t.first), u64(t.second), format_double(t.joint),
                            format_double(t.marginal_first), format_double(t.marginal_second),
                            format_double(*r.transitive_bound)});
    }
    const double pm = *r.pair_marginal;
    json j = to_json(r);
    j.erase("terms");
    j["worst_excess"] = worst;
    j["slack_over_marginal_sq"] = pm > 0.0 ? std::max(worst, 0.0) / (pm * pm) : 0.0;
    per_eps.push_back(j);
    if (cfg.bound == "transitive") {
      report.checks.push_back(
          make_check("transitive_excess_eps" + label(eps), worst, "<=", tol(cfg, "transitive_violation")));
    }
  }
  report.metrics = {{"chain", chain_label(cfg)}, {"states", q.size()}, {"walkers", k},
                    {"bound", cfg.bound},         {"epsilons", per_eps}};
  report.tables.push_back(std::move(terms));
  finish(report, t0);
  return report;
}

// --- Diagnostics ----------------------------------------------------------------------

ExperimentReport diagnostics(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  auto report = start_report(cfg);
  const auto q = config_chain(cfg);
  const std::size_t n = q.size();
  const auto pi = stationary_distribution(q);
  const auto mixing = mixing_time(q, pi, 0.25);
  const auto pair = product_chain(q, 2, cfg.state_budget);
  const auto diag_set = TargetSet::diagonal(n);
  const double m = survival(pair, diag_set, tensor_power(pi, 2)).mean();
  const auto diag = chain_diagnostics(q, pi, mixing, m, diagnostics_options(cfg));

  // P_{delta_x x pi}(M <= T) <= (1 + 2 T q_max) pi_max for every x and horizon.
  std::vector<double> horizons(cfg.horizons);
  horizons.push_back(mixing.t_mix);
  double worst = -INFINITY;
  json worst_case;
  for (State x = 0; x < n; ++x) {
    const auto curve = survival(pair, diag_set, tensor_product(ProbabilityVector::point_mass(n, x), pi));
    for (double h : horizons) {
      const double p = curve.cdf(h);
      const double bound = (1.0 + 2.0 * h * q.max_exit_rate()) * pi.max();
      if (p - bound > worst) {
        worst = p - bound;
        worst_case = {{"state", x}, {"horizon", h}, {"probability", p}, {"bound", bound}};
      }
    }
  }
  const double residual = balance_residual(q, pi.values());
  report.metrics = {{"chain", chain_label(cfg)},
                    {"states", n},
                    {"diagnostics", diagnostics_json(diag)},
                    {"balance_residual", residual},
                    {"pair_bound_worst_excess", worst},
                    {"pair_bound_worst_case", worst_case}};
  report.checks.push_back(make_check("balance_residual", residual, "<=", tol(cfg, "balance_residual")));
  report.checks.push_back(make_check("pair_bound_excess", worst, "<=", tol(cfg, "bound_violation")));

  CsvTable profile{"mixing_profile.csv", {"t", "distance"}, {}};
  for (std::size_t j = 0; j <= 60; ++j) {
    const double t = 3.0 * mixing.t_mix * static_cast<double>(j) / 60.0;
    profile.rows.push_back({format_double(t), format_double(worst_case_distance(q, pi, t))});
  }
  report.tables.push_back(std::move(profile));
  finish(report, t0);
  return report;
}

}  // namespace

ExperimentReport run_meanfield(const ExperimentConfig& cfg) { return coalescence_experiment(cfg, false); }
ExperimentReport run_counterexample(const ExperimentConfig& cfg) { return coalescence_experiment(cfg, true); }
ExperimentReport run_kn_exact(const ExperimentConfig& cfg) { return kn_exact(cfg); }
ExperimentReport run_envelope(const ExperimentConfig& cfg) { return envelope(cfg); }
ExperimentReport run_duality(const ExperimentConfig& cfg) { return duality(cfg); }
ExperimentReport run_correlation(const ExperimentConfig& cfg) { return correlation(cfg); }
ExperimentReport run_diagnostics(const ExperimentConfig& cfg) { return diagnostics(cfg); }

}  // namespace coalesce
