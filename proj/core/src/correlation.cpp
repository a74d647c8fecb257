#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coalesce/errors.hpp"
#include "coalesce/hitting.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {
namespace {

// Flags: bit 0 = A hit, bit 1 = B hit; flag value 3 is absorbing.
std::uint8_t flags_at(const TargetSet& a, const TargetSet& b, State x) {
  return static_cast<std::uint8_t>((a.contains(x) ? 1 : 0) | (b.contains(x) ? 2 : 0));
}

// Transient states (x, f) with f in {0, 1, 2} are indexed 3x + f.
SurvivalCurve joint_curve(const RateGenerator& q, const TargetSet& a, const TargetSet& b,
                          const ProbabilityVector& start) {
  const std::size_t n = q.size();
  const double rate = q.max_exit_rate();
  std::vector<std::vector<TransientChain::Entry>> rows(3 * n);
  for (State x = 0; x < n; ++x) {
    const double stay = 1.0 - q.exit_rate(x) / rate;
    const auto targets = q.targets(x);
    const auto rates = q.rates(x);
    for (std::uint8_t f = 0; f < 3; ++f) {
      auto& row = rows[3 * x + f];
      if (stay > 0.0) row.push_back({static_cast<State>(3 * x + f), stay});
      for (std::size_t e = 0; e < targets.size(); ++e) {
        const State y = targets[e];
        const auto g = static_cast<std::uint8_t>(f | flags_at(a, b, y));
        if (g != 3) row.push_back({static_cast<State>(3 * y + g), rates[e] / rate});
      }
    }
  }
  std::vector<double> init(3 * n, 0.0);
  for (State x = 0; x < n; ++x) {
    const auto f = flags_at(a, b, x);
    if (f != 3) init[3 * x + f] = start[x];
  }
  return SurvivalCurve(std::make_shared<const TransientChain>(rate, std::move(rows)), std::move(init));
}

double relative_spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
}

}  // namespace

double joint_hit_probability(const RateGenerator& q, const TargetSet& a, const TargetSet& b,
                             const ProbabilityVector& start, double t) {
  if (a.size() != q.size() || b.size() != q.size() || start.size() != q.size()) {
    throw std::invalid_argument("joint_hit_probability: size mismatch");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("joint_hit_probability: t must be >= 0");
  return joint_curve(q, a, b, start).cdf(t);
}

CorrelationReport correlation_xi(const RateGenerator& q, std::span<const TargetSet> targets,
                                 const ProbabilityVector& start, double epsilon) {
  if (targets.size() < 2) throw std::invalid_argument("correlation_xi: need at least two targets");
  if (!(epsilon > 0.0)) throw std::invalid_argument("correlation_xi: epsilon must be positive");
  CorrelationReport r;
  r.k = targets.size();
  r.ell = targets.size();
  r.epsilon = epsilon;
  std::vector<double> means, marginals;
  std::vector<SurvivalCurve> curves;
  for (const auto& a : targets) {
    curves.push_back(survival(q, a, start));
    means.push_back(curves.back().mean());
  }
  r.m = means.front();
  r.mean_spread = relative_spread(means);
  const double horizon = epsilon * r.m;
  for (const auto& c : curves) marginals.push_back(c.cdf(horizon));
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t j = i + 1; j < targets.size(); ++j) {
      CorrelationTerm t;
      t.first = i;
      t.second = j;
      t.joint = joint_hit_probability(q, targets[i], targets[j], start, horizon);
      t.marginal_first = marginals[i];
      t.marginal_second = marginals[j];
      sum += t.joint;
      r.terms.push_back(t);
    }
  }
  r.xi = sum / (static_cast<double>(r.ell) * epsilon);
  return r;
}

CorrelationReport meeting_correlation(const RateGenerator& q, std::size_t k, double epsilon,
                                      const MeetingCorrelationOptions& opts) {
  if (k < 3) throw std::invalid_argument("meeting_correlation: need k >= 3 walkers");
  if (!(epsilon > 0.0)) throw std::invalid_argument("meeting_correlation: epsilon must be positive");
  const std::size_t n = q.size();
  const auto pi = stationary_distribution(q);

  CorrelationReport r;
  r.k = k;
  r.epsilon = epsilon;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) r.pairs.emplace_back(i, j);
  }
  r.ell = r.pairs.size();

  const auto pair = product_chain(q, 2, opts.state_budget);
  const auto pair_curve = survival(pair, TargetSet::diagonal(n), tensor_power(pi, 2));
  r.m = pair_curve.mean();
  const double horizon = epsilon * r.m;
  const double f = pair_curve.cdf(horizon);
  r.pair_marginal = f;
  r.transitive_bound = 2.0 * f * f;

  // Budget for the flag-augmented chain: 3 n^k states.
  double augmented = 3.0;
  for (std::size_t c = 0; c < k; ++c) augmented *= static_cast<double>(n);
  bool exact = opts.mode == CorrelationMode::Exact ||
               (opts.mode == CorrelationMode::Auto && augmented <= static_cast<double>(opts.state_budget));
  if (exact && augmented > static_cast<double>(opts.state_budget)) {
    throw BudgetError("meeting_correlation: flag-augmented chain exceeds the state budget");
  }
  r.exact = exact;

  double worst = -1.0;
  double sum = 0.0;
  if (exact) {
    const auto prod = product_chain(q, k, opts.state_budget);
    const auto start = tensor_power(pi, k);
    std::vector<TargetSet> targets;
    std::vector<double> means, marginals;
    for (const auto& [i, j] : r.pairs) {
      targets.push_back(TargetSet::pair_diagonal(n, k, i, j));
      const auto c = survival(prod, targets.back(), start);
      means.push_back(c.mean());
      marginals.push_back(c.cdf(horizon));
    }
    r.mean_spread = relative_spread(means);
    for (std::size_t a = 0; a < targets.size(); ++a) {
      for (std::size_t b = a + 1; b < targets.size(); ++b) {
        CorrelationTerm t;
        t.first = a;
        t.second = b;
        t.joint = joint_hit_probability(prod, targets[a], targets[b], start, horizon);
        t.marginal_first = marginals[a];
        t.marginal_second = marginals[b];
        worst = std::max(worst, t.joint - *r.transitive_bound);
        sum += t.joint;
        r.terms.push_back(t);
      }
    }
    r.xi = sum / (static_cast<double>(r.ell) * epsilon);
  } else {
    if (opts.samples < 2) throw std::invalid_argument("meeting_correlation: Monte Carlo needs >= 2 samples");
    const std::size_t ell = r.ell;
    std::vector<std::size_t> pair_id(k * k, 0);
    for (std::size_t p = 0; p < ell; ++p) {
      pair_id[r.pairs[p].first * k + r.pairs[p].second] = p;
      pair_id[r.pairs[p].second * k + r.pairs[p].first] = p;
    }
    std::vector<double> marg(ell, 0.0);
    std::vector<double> joint(ell * ell, 0.0);
    double y_sum = 0.0, y_sq = 0.0;
    const StateSampler from_pi(pi);
    std::vector<State> pos(k);
    std::vector<char> met(ell);
    for (std::size_t rep = 0; rep < opts.samples; ++rep) {
      auto rng = replica_rng(opts.seed, rep);
      for (auto& x : pos) x = from_pi(rng);
      std::fill(met.begin(), met.end(), 0);
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
          if (pos[a] == pos[b]) met[pair_id[a * k + b]] = 1;
        }
      }
      double t = 0.0;
      while (true) {
        double total = 0.0;
        for (State x : pos) total += q.exit_rate(x);
        t += rng.exponential(total);
        if (t > horizon) break;
        double u = rng.uniform() * total;
        std::size_t w = 0;
        while (w + 1 < k && u >= q.exit_rate(pos[w])) u -= q.exit_rate(pos[w++]);
        pos[w] = jump_target(q, pos[w], rng.uniform());
        for (std::size_t o = 0; o < k; ++o) {
          if (o != w && pos[o] == pos[w]) met[pair_id[w * k + o]] = 1;
        }
      }
      double y = 0.0;
      for (std::size_t a = 0; a < ell; ++a) {
        if (!met[a]) continue;
        marg[a] += 1.0;
        for (std::size_t b = a + 1; b < ell; ++b) {
          if (met[b]) {
            joint[a * ell + b] += 1.0;
            y += 1.0;
          }
        }
      }
      y_sum += y;
      y_sq += y * y;
    }
    const double ns = static_cast<double>(opts.samples);
    for (std::size_t a = 0; a < ell; ++a) {
      for (std::size_t b = a + 1; b < ell; ++b) {
        CorrelationTerm t;
        t.first = a;
        t.second = b;
        t.joint = joint[a * ell + b] / ns;
        t.marginal_first = marg[a] / ns;
        t.marginal_second = marg[b] / ns;
        t.standard_error = std::sqrt(t.joint * (1.0 - t.joint) / ns);
        worst = std::max(worst, t.joint - *r.transitive_bound);
        r.terms.push_back(t);
      }
    }
    const double scale = 1.0 / (static_cast<double>(ell) * epsilon);
    const double mean_y = y_sum / ns;
    const double var_y = std::max(0.0, (y_sq - ns * mean_y * mean_y) / (ns - 1.0));
    r.samples = opts.samples;
    r.xi = scale * mean_y;
    r.xi_standard_error = scale * std::sqrt(var_y / ns);
  }
  r.worst_transitive_violation = worst;
  return r;
}

}  // namespace coalesce
