#include "coalesce/hitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "coalesce/errors.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {

TargetSet::TargetSet(std::vector<char> mask) : mask_(std::move(mask)) {
  count_ = static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), char{1}));
  if (count_ == 0) throw std::invalid_argument("TargetSet: target must be nonempty");
}

TargetSet TargetSet::from_states(std::size_t n, std::span<const State> states) {
  std::vector<char> mask(n, 0);
  for (State s : states) {
    if (s >= n) throw std::invalid_argument("TargetSet: state out of range");
    mask[s] = 1;
  }
  return TargetSet(std::move(mask));
}

TargetSet TargetSet::from_mask(std::vector<char> mask) {
  for (char& c : mask) c = c ? 1 : 0;
  return TargetSet(std::move(mask));
}

TargetSet TargetSet::diagonal(std::size_t n_base) { return pair_diagonal(n_base, 2, 0, 1); }

TargetSet TargetSet::pair_diagonal(std::size_t n_base, std::size_t k, std::size_t i, std::size_t j) {
  if (i == j || i >= k || j >= k) throw std::invalid_argument("pair_diagonal: need distinct i, j < k");
  std::size_t total = 1;
  for (std::size_t c = 0; c < k; ++c) total *= n_base;
  std::vector<char> mask(total, 0);
  for (std::size_t s = 0; s < total; ++s) {
    const auto x = product_coordinates(static_cast<State>(s), n_base, k);
    mask[s] = x[i] == x[j] ? 1 : 0;
  }
  return TargetSet(std::move(mask));
}

TargetSet TargetSet::any_pair_diagonal(std::size_t n_base, std::size_t k) {
  std::size_t total = 1;
  for (std::size_t c = 0; c < k; ++c) total *= n_base;
  std::vector<char> mask(total, 0);
  for (std::size_t s = 0; s < total; ++s) {
    auto x = product_coordinates(static_cast<State>(s), n_base, k);
    std::sort(x.begin(), x.end());
    mask[s] = std::adjacent_find(x.begin(), x.end()) != x.end() ? 1 : 0;
  }
  return TargetSet(std::move(mask));
}

double TargetSet::mass(const ProbabilityVector& p) const {
  if (p.size() != size()) throw std::invalid_argument("TargetSet::mass: size mismatch");
  double acc = 0.0;
  for (std::size_t s = 0; s < size(); ++s) {
    if (mask_[s]) acc += p[s];
  }
  return acc;
}

TargetSet TargetSet::united(const TargetSet& other) const {
  if (other.size() != size()) throw std::invalid_argument("TargetSet::united: size mismatch");
  std::vector<char> mask(mask_);
  for (std::size_t s = 0; s < size(); ++s) mask[s] = static_cast<char>(mask[s] | other.mask_[s]);
  return TargetSet(std::move(mask));
}

// ---------------------------------------------------------------------------

std::vector<double> KilledChain::restrict(const ProbabilityVector& start) const {
  if (start.size() != index.size()) throw std::invalid_argument("KilledChain: start law size mismatch");
  std::vector<double> v(chain->size(), 0.0);
  for (std::size_t s = 0; s < index.size(); ++s) {
    if (index[s] != kNotTransient) v[index[s]] = start[s];
  }
  return v;
}

KilledChain killed_chain(const RateGenerator& q, const TargetSet& a) {
  if (a.size() != q.size()) throw std::invalid_argument("killed_chain: target size differs from chain size");
  KilledChain out;
  out.index.assign(q.size(), KilledChain::kNotTransient);
  std::uint32_t next = 0;
  for (std::size_t s = 0; s < q.size(); ++s) {
    if (!a.contains(static_cast<State>(s))) out.index[s] = next++;
  }
  const double rate = q.max_exit_rate();
  std::vector<std::vector<TransientChain::Entry>> rows(next);
  for (std::size_t s = 0; s < q.size(); ++s) {
    const auto from = out.index[s];
    if (from == KilledChain::kNotTransient) continue;
    const auto x = static_cast<State>(s);
    auto& row = rows[from];
    const double stay = 1.0 - q.exit_rate(x) / rate;
    if (stay > 0.0) row.push_back({from, stay});
    const auto targets = q.targets(x);
    const auto rates = q.rates(x);
    for (std::size_t e = 0; e < targets.size(); ++e) {
      const auto to = out.index[targets[e]];
      if (to != KilledChain::kNotTransient) row.push_back({to, rates[e] / rate});
    }
  }
  out.chain = std::make_shared<const TransientChain>(rate, std::move(rows));
  return out;
}

std::vector<double> hitting_times(const RateGenerator& q, const TargetSet& a) {
  const auto killed = killed_chain(q, a);
  std::vector<double> u(q.size(), 0.0);
  if (killed.chain->size() == 0) return u;
  const auto steps = killed.chain->expected_steps();
  for (std::size_t s = 0; s < q.size(); ++s) {
    if (killed.index[s] != KilledChain::kNotTransient) u[s] = steps[killed.index[s]] / killed.chain->rate();
  }
  return u;
}

double mean_hitting_time(const RateGenerator& q, const TargetSet& a, const ProbabilityVector& start) {
  if (start.size() != q.size()) throw std::invalid_argument("mean_hitting_time: start law size mismatch");
  const auto u = hitting_times(q, a);
  double acc = 0.0;
  for (std::size_t s = 0; s < u.size(); ++s) acc += start[s] * u[s];
  return acc;
}

SurvivalCurve survival(const RateGenerator& q, const TargetSet& a, const ProbabilityVector& start) {
  auto killed = killed_chain(q, a);
  auto init = killed.restrict(start);
  if (killed.chain->size() == 0) {
    // Every state is in A: a one-state chain with no initial mass.
    auto trivial = std::make_shared<const TransientChain>(
        q.max_exit_rate(), std::vector<std::vector<TransientChain::Entry>>(1));
    return SurvivalCurve(std::move(trivial), std::vector<double>{0.0});
  }
  return SurvivalCurve(killed.chain, std::move(init));
}

// ---------------------------------------------------------------------------

QuantileResult quantile(const SurvivalCurve& curve, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("quantile: epsilon must lie in (0, 1)");
  if (std::abs(curve.survival(0.0) - 1.0) > 1e-12) {
    throw std::invalid_argument("quantile: start law must put no mass on the target");
  }
  const auto g = [&](double t) { return curve.cdf(t) - epsilon; };
  double hi = std::max(curve.mean(), 1e-300);
  int doublings = 0;
  while (g(hi) < 0.0) {
    hi *= 2.0;
    if (++doublings > 2000) throw NumericError("quantile: could not bracket the epsilon-quantile", g(hi));
  }
  std::uintmax_t iterations = 200;
  const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(std::abs(a), std::abs(b)); };
  const auto [lo_t, hi_t] = boost::math::tools::toms748_solve(g, 0.0, hi, -epsilon, g(hi), tol, iterations);
  QuantileResult r;
  r.epsilon = epsilon;
  r.t_eps = 0.5 * (lo_t + hi_t);
  r.cdf_at_t_eps = curve.cdf(r.t_eps);
  if (std::abs(r.cdf_at_t_eps - epsilon) > 1e-8) {
    throw NumericError("quantile: root not resolved to 1e-8", r.cdf_at_t_eps - epsilon);
  }
  r.mean = curve.mean();
  r.deviation = std::abs(epsilon * r.mean / r.t_eps - 1.0);
  return r;
}

// ---------------------------------------------------------------------------

double ExpEnvelope::lower(double t) const { return (1.0 - alpha) * std::exp(-t / ((1.0 - beta) * m)); }
double ExpEnvelope::upper(double t) const { return (1.0 + alpha) * std::exp(-t / ((1.0 + beta) * m)); }

bool ExpEnvelope::contains(double t, double s, double tolerance) const {
  return s <= upper(t) + tolerance && lower(t) <= s + tolerance;
}

double envelope_w1_bound(const ExpEnvelope& env) {
  if (!(env.m > 0.0) || env.alpha < 0.0 || env.beta < 0.0 || env.beta >= 1.0) {
    throw std::invalid_argument("envelope_w1_bound: need m > 0, alpha >= 0, 0 <= beta < 1");
  }
  return 2.0 * (env.alpha + env.beta) * env.m;
}

std::vector<double> envelope_grid(double m, std::size_t points) {
  if (!(m > 0.0) || points < 2) throw std::invalid_argument("envelope_grid: need m > 0 and >= 2 points");
  std::vector<double> grid{0.0};
  const double lo = std::log(1e-3 * m);
  const double hi = std::log(10.0 * m);
  for (std::size_t i = 0; i < points; ++i) {
    grid.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1)));
  }
  grid.back() = 10.0 * m;
  return grid;
}

namespace {

// Least alpha >= 0 certifying every grid point for the given beta.
double alpha_for_beta(std::span<const double> grid, std::span<const double> s, double m, double beta) {
  double alpha = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    alpha = std::max(alpha, s[i] * std::exp(t / ((1.0 + beta) * m)) - 1.0);
    const double lower_need = s[i] > 0.0 ? 1.0 - s[i] * std::exp(t / ((1.0 - beta) * m)) : 1.0;
    alpha = std::max(alpha, lower_need);
  }
  return alpha;
}

}  // namespace

EnvelopeFitReport envelope_fit(std::span<const double> grid, std::span<const double> survival_values,
                               double m) {
  if (!(m > 0.0)) throw std::invalid_argument("envelope_fit: m must be positive");
  if (grid.size() != survival_values.size() || grid.empty()) {
    throw std::invalid_argument("envelope_fit: grid and survival values must have equal nonzero size");
  }
  EnvelopeFitReport r;
  r.m = m;
  r.grid.assign(grid.begin(), grid.end());
  r.survival.assign(survival_values.begin(), survival_values.end());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double e = std::exp(-grid[i] / m);
    r.worst_upper_violation = std::max(r.worst_upper_violation, survival_values[i] - e);
    r.worst_lower_violation = std::max(r.worst_lower_violation, e - survival_values[i]);
  }
  const bool vanishing = std::all_of(survival_values.begin(), survival_values.end(), [](double v) { return v == 0.0; });
  if (vanishing) {
    r.applicable = false;
    r.alpha = 1.0;
    r.beta = 0.0;
  } else {
    const auto objective = [&](double beta) { return alpha_for_beta(grid, survival_values, m, beta) + beta; };
    constexpr int kScan = 1000;
    const double step = kMaxEnvelopeBeta / kScan;
    std::vector<double> f(kScan + 1);
    for (int i = 0; i <= kScan; ++i) f[i] = objective(step * i);
    const double best = *std::min_element(f.begin(), f.end());
    int idx = 0;
    while (f[idx] > best + 1e-12) ++idx;
    // Golden-section refinement on the neighbouring scan cells.
    double a = step * std::max(idx - 1, 0);
    double b = step * std::min(idx + 1, kScan);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = objective(c), fd = objective(d);
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      if (fc <= fd) {
        b = d; d = c; fd = fc;
        c = b - phi * (b - a); fc = objective(c);
      } else {
        a = c; c = d; fc = fd;
        d = a + phi * (b - a); fd = objective(d);
      }
    }
    double beta = step * idx;
    const double refined = fc <= fd ? c : d;
    if (objective(refined) < f[idx] - 1e-12) beta = refined;
    r.beta = beta;
    r.alpha = alpha_for_beta(grid, survival_values, m, beta);
  }
  const auto env = r.envelope();
  r.certified = true;
  for (std::size_t i = 0; i < grid.size(); ++i) r.certified = r.certified && env.contains(grid[i], survival_values[i]);
  return r;
}

EnvelopeFitReport envelope_fit(const SurvivalCurve& curve, double m, std::span<const double> grid,
                               std::optional<double> threshold) {
  std::vector<double> s(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) s[i] = curve.survival(grid[i]);
  auto r = envelope_fit(grid, s, m);
  if (threshold) {
    r.threshold = *threshold;
    r.r_lambda = curve.cdf(*threshold);
  }
  return r;
}

// ---------------------------------------------------------------------------

double meeting_mean(const RateGenerator& q, std::size_t state_budget) {
  const auto pair = product_chain(q, 2, state_budget);
  const auto pi = stationary_distribution(q);
  return mean_hitting_time(pair, TargetSet::diagonal(q.size()), tensor_power(pi, 2));
}

PairMeetingReport pair_meeting_bound_check(const RateGenerator& q, const ProbabilityVector& lambda,
                                           double horizon, std::size_t n_samples, std::uint64_t seed,
                                           std::size_t state_budget) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("pair_meeting_bound_check: T must be >= 0");
  if (lambda.size() != q.size()) throw std::invalid_argument("pair_meeting_bound_check: lambda size mismatch");
  const auto pi = stationary_distribution(q);
  const auto pair = product_chain(q, 2, state_budget);
  const auto curve = survival(pair, TargetSet::diagonal(q.size()), tensor_product(lambda, pi));

  PairMeetingReport r;
  r.horizon = horizon;
  r.exact = curve.cdf(horizon);
  r.bound = (1.0 + 2.0 * horizon * q.max_exit_rate()) * pi.max();
  r.violation = r.exact - r.bound;
  r.violated = r.violation > 1e-9;
  r.samples = n_samples;
  if (n_samples > 0) {
    const StateSampler from_lambda(lambda), from_pi(pi);
    std::size_t hits = 0;
    for (std::size_t rep = 0; rep < n_samples; ++rep) {
      auto rng = replica_rng(seed, rep);
      State x = from_lambda(rng), y = from_pi(rng);
      double t = 0.0;
      while (x != y) {
        const double rx = q.exit_rate(x), ry = q.exit_rate(y);
        t += rng.exponential(rx + ry);
        if (t > horizon) break;
        if (rng.uniform() * (rx + ry) < rx) {
          x = jump_target(q, x, rng.uniform());
        } else {
          y = jump_target(q, y, rng.uniform());
        }
      }
      if (x == y) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(n_samples);
    r.mc_estimate = p;
    r.mc_standard_error = std::sqrt(p * (1.0 - p) / static_cast<double>(n_samples));
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const QuantileResult& r) {
  return {{"epsilon", r.epsilon}, {"t_eps", r.t_eps}, {"mean", r.mean},
          {"cdf_at_t_eps", r.cdf_at_t_eps}, {"deviation", r.deviation}};
}

nlohmann::json to_json(const EnvelopeFitReport& r) {
  return {{"m", r.m},
          {"grid", r.grid},
          {"survival", r.survival},
          {"worst_upper_violation", r.worst_upper_violation},
          {"worst_lower_violation", r.worst_lower_violation},
          {"alpha", r.alpha},
          {"beta", r.beta},
          {"w1_bound", envelope_w1_bound(r.envelope())},
          {"certified", r.certified},
          {"applicable", r.applicable},
          {"threshold", optional_json(r.threshold)},
          {"r_lambda", optional_json(r.r_lambda)}};
}

nlohmann::json to_json(const PairMeetingReport& r) {
  return {{"horizon", r.horizon},          {"exact", r.exact},
          {"bound", r.bound},              {"violation", r.violation},
          {"violated", r.violated},        {"samples", r.samples},
          {"mc_estimate", optional_json(r.mc_estimate)},
          {"mc_standard_error", optional_json(r.mc_standard_error)}};
}

nlohmann::json to_json(const CorrelationReport& r) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : r.terms) {
    terms.push_back({{"first", t.first},
                     {"second", t.second},
                     {"joint", t.joint},
                     {"marginal_first", t.marginal_first},
                     {"marginal_second", t.marginal_second},
                     {"standard_error", optional_json(t.standard_error)}});
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [i, j] : r.pairs) pairs.push_back({i, j});
  return {{"k", r.k},
          {"ell", r.ell},
          {"epsilon", r.epsilon},
          {"m", r.m},
          {"mean_spread", r.mean_spread},
          {"exact", r.exact},
          {"samples", r.samples},
          {"terms", terms},
          {"pairs", pairs},
          {"xi", r.xi},
          {"xi_standard_error", optional_json(r.xi_standard_error)},
          {"pair_marginal", optional_json(r.pair_marginal)},
          {"transitive_bound", optional_json(r.transitive_bound)},
          {"worst_transitive_violation", optional_json(r.worst_transitive_violation)}};
}

}  // namespace coalesce
