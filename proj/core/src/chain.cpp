#include "coalesce/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "coalesce/errors.hpp"
#include "coalesce/poisson.hpp"

namespace coalesce {
namespace {

std::vector<char> reachable(std::size_t n, const std::vector<std::vector<State>>& adj) {
  std::vector<char> seen(n, 0);
  std::vector<State> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const State x = stack.back();
    stack.pop_back();
    for (State y : adj[x]) {
      if (!seen[y]) {
        seen[y] = 1;
        stack.push_back(y);
      }
    }
  }
  return seen;
}

}  // namespace

bool strongly_connected(std::size_t n, std::span<const Transition> transitions) {
  if (n == 0) return false;
  // Forward and backward reachability from state 0 (Kosaraju's criterion for a
  // single component).
  std::vector<std::vector<State>> fwd(n), bwd(n);
  for (const auto& t : transitions) {
    if (t.rate > 0.0) {
      fwd[t.from].push_back(t.to);
      bwd[t.to].push_back(t.from);
    }
  }
  const auto a = reachable(n, fwd);
  const auto b = reachable(n, bwd);
  return std::all_of(a.begin(), a.end(), [](char c) { return c != 0; }) &&
         std::all_of(b.begin(), b.end(), [](char c) { return c != 0; });
}

RateGenerator RateGenerator::from_transitions(std::size_t n,
                                              std::span<const Transition> transitions) {
  if (n == 0) throw std::invalid_argument("RateGenerator: state count must be positive");
  if (n > std::numeric_limits<State>::max()) {
    throw std::invalid_argument("RateGenerator: state count exceeds index range");
  }
  std::vector<Transition> sorted;
  sorted.reserve(transitions.size());
  for (const auto& t : transitions) {
    if (t.from >= n || t.to >= n) {
      throw std::invalid_argument("RateGenerator: transition references state out of range");
    }
    if (t.from == t.to) {
      throw std::invalid_argument("RateGenerator: diagonal entries are implicit; got (" +
                                  std::to_string(t.from) + "," + std::to_string(t.to) + ")");
    }
    if (!std::isfinite(t.rate) || t.rate < 0.0) {
      throw std::invalid_argument("RateGenerator: rates must be finite and nonnegative");
    }
    if (t.rate > 0.0) sorted.push_back(t);
  }
  std::sort(sorted.begin(), sorted.end(), [](const Transition& a, const Transition& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
  // Merge duplicates.
  std::vector<Transition> merged;
  merged.reserve(sorted.size());
  for (const auto& t : sorted) {
    if (!merged.empty() && merged.back().from == t.from && merged.back().to == t.to) {
      merged.back().rate += t.rate;
    } else {
      merged.push_back(t);
    }
  }
  if (n > 1 && !strongly_connected(n, merged)) {
    throw std::invalid_argument("RateGenerator: chain is not irreducible");
  }

  RateGenerator g;
  g.offsets_.assign(n + 1, 0);
  g.exit_rate_.assign(n, 0.0);
  for (const auto& t : merged) ++g.offsets_[t.from + 1];
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  g.targets_.reserve(merged.size());
  g.rates_.reserve(merged.size());
  g.cumulative_.reserve(merged.size());
  for (const auto& t : merged) {
    g.targets_.push_back(t.to);
    g.rates_.push_back(t.rate);
    g.exit_rate_[t.from] += t.rate;
    g.cumulative_.push_back(g.exit_rate_[t.from]);
    g.max_single_ = std::max(g.max_single_, t.rate);
  }
  g.max_exit_ = *std::max_element(g.exit_rate_.begin(), g.exit_rate_.end());
  return g;
}

double RateGenerator::rate(State x, State y) const noexcept {
  const auto ts = targets(x);
  const auto it = std::lower_bound(ts.begin(), ts.end(), y);
  if (it == ts.end() || *it != y) return 0.0;
  return rates(x)[static_cast<std::size_t>(it - ts.begin())];
}

std::vector<Transition> RateGenerator::transitions() const {
  std::vector<Transition> out;
  out.reserve(nonzeros());
  for (State x = 0; x < size(); ++x) {
    const auto ts = targets(x);
    const auto rs = rates(x);
    for (std::size_t i = 0; i < ts.size(); ++i) out.push_back({x, ts[i], rs[i]});
  }
  return out;
}

// ---------------------------------------------------------------------------

ProbabilityVector::ProbabilityVector(std::vector<double> values) : p_(std::move(values)) {
  if (p_.empty()) throw std::invalid_argument("ProbabilityVector: empty");
  double sum = 0.0;
  for (double v : p_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("ProbabilityVector: entries must be finite and >= 0");
    }
    sum += v;
  }
  const double tol = kSumTolerance + 4.0 * static_cast<double>(p_.size()) * std::numeric_limits<double>::epsilon();
  if (std::abs(sum - 1.0) > tol) {
    throw std::invalid_argument("ProbabilityVector: entries sum to " + std::to_string(sum));
  }
}

ProbabilityVector ProbabilityVector::point_mass(std::size_t n, State x) {
  if (x >= n) throw std::invalid_argument("ProbabilityVector::point_mass: state out of range");
  std::vector<double> v(n, 0.0);
  v[x] = 1.0;
  return ProbabilityVector(std::move(v));
}

ProbabilityVector ProbabilityVector::uniform(std::size_t n) {
  return normalized(std::vector<double>(n, 1.0));
}

ProbabilityVector ProbabilityVector::normalized(std::vector<double> values) {
  double sum = 0.0;
  for (double& v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("ProbabilityVector: non-finite entry");
    v = std::max(v, 0.0);
    sum += v;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("ProbabilityVector: zero total mass");
  for (double& v : values) v /= sum;
  return ProbabilityVector(std::move(values));
}

double ProbabilityVector::max() const noexcept { return *std::max_element(p_.begin(), p_.end()); }

StateSampler::StateSampler(const ProbabilityVector& p) : cumulative_(p.size()) {
  std::partial_sum(p.values().begin(), p.values().end(), cumulative_.begin());
}

State StateSampler::operator()(Philox& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  // upper_bound skips zero-probability states; end() only through rounding.
  if (it == cumulative_.end()) it = std::prev(it);
  return static_cast<State>(it - cumulative_.begin());
}

State jump_target(const RateGenerator& q, State x, double u) {
  const auto cum = q.cumulative_rates(x);
  auto it = std::upper_bound(cum.begin(), cum.end(), u * cum.back());
  if (it == cum.end()) it = std::prev(it);
  return q.targets(x)[static_cast<std::size_t>(it - cum.begin())];
}

ProbabilityVector tensor_product(const ProbabilityVector& a, const ProbabilityVector& b) {
  std::vector<double> out;
  out.reserve(a.size() * b.size());
  for (double x : a.values()) {
    for (double y : b.values()) out.push_back(x * y);
  }
  return ProbabilityVector::normalized(std::move(out));
}

ProbabilityVector tensor_power(const ProbabilityVector& p, std::size_t k) {
  if (k == 0) throw std::invalid_argument("tensor_power: k must be positive");
  ProbabilityVector out = p;
  for (std::size_t i = 1; i < k; ++i) out = tensor_product(out, p);
  return out;
}

// ---------------------------------------------------------------------------

UniformizedKernel::UniformizedKernel(const RateGenerator& q) : q_(&q), q_max_(q.max_exit_rate()) {
  self_.resize(q.size());
  for (State x = 0; x < q.size(); ++x) {
    self_[x] = q_max_ > 0.0 ? 1.0 - q.exit_rate(x) / q_max_ : 1.0;
  }
}

void UniformizedKernel::step(std::span<const double> v, std::span<double> out) const {
  const std::size_t n = self_.size();
  for (std::size_t y = 0; y < n; ++y) out[y] = v[y] * self_[y];
  if (q_max_ <= 0.0) return;
  const double inv = 1.0 / q_max_;
  for (State x = 0; x < n; ++x) {
    const double vx = v[x] * inv;
    if (vx == 0.0) continue;
    const auto ts = q_->targets(x);
    const auto rs = q_->rates(x);
    for (std::size_t i = 0; i < ts.size(); ++i) out[ts[i]] += vx * rs[i];
  }
}

void UniformizedKernel::step_rows(Eigen::MatrixXd& rows, Eigen::MatrixXd& scratch) const {
  const std::size_t n = self_.size();
  scratch.resize(rows.rows(), rows.cols());
  for (std::size_t y = 0; y < n; ++y) scratch.col(y) = rows.col(y) * self_[y];
  if (q_max_ > 0.0) {
    const double inv = 1.0 / q_max_;
    for (State x = 0; x < n; ++x) {
      const auto ts = q_->targets(x);
      const auto rs = q_->rates(x);
      for (std::size_t i = 0; i < ts.size(); ++i) scratch.col(ts[i]) += rows.col(x) * (rs[i] * inv);
    }
  }
  rows.swap(scratch);
}

std::vector<std::pair<State, double>> UniformizedKernel::row(State x) const {
  std::vector<std::pair<State, double>> out;
  out.emplace_back(x, self_[x]);
  const auto ts = q_->targets(x);
  const auto rs = q_->rates(x);
  for (std::size_t i = 0; i < ts.size(); ++i) out.emplace_back(ts[i], rs[i] / q_max_);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

double total_variation(const ProbabilityVector& p, const ProbabilityVector& q) {
  return total_variation(p.values(), q.values());
}

double balance_residual(const RateGenerator& q, std::span<const double> pi) {
  std::vector<double> flow(q.size(), 0.0);
  for (State x = 0; x < q.size(); ++x) {
    flow[x] -= pi[x] * q.exit_rate(x);
    const auto ts = q.targets(x);
    const auto rs = q.rates(x);
    for (std::size_t i = 0; i < ts.size(); ++i) flow[ts[i]] += pi[x] * rs[i];
  }
  double r = 0.0;
  for (double f : flow) r = std::max(r, std::abs(f));
  return r;
}

ProbabilityVector stationary_distribution(const RateGenerator& q, const SolverOptions& opts) {
  const std::size_t n = q.size();
  if (n == 1) return ProbabilityVector({1.0});
  const double scale = q.max_exit_rate();
  std::vector<double> pi(n);

  // Transposed balance equations Q^T pi = 0 with the last row replaced by
  // the normalization sum(pi) = 1.
  if (n <= opts.dense_threshold) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (State x = 0; x < n; ++x) {
      a(x, x) -= q.exit_rate(x);
      const auto ts = q.targets(x);
      const auto rs = q.rates(x);
      for (std::size_t i = 0; i < ts.size(); ++i) a(ts[i], x) += rs[i];
    }
    a.row(static_cast<Eigen::Index>(n) - 1).setConstant(1.0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    b(static_cast<Eigen::Index>(n) - 1) = 1.0;
    const Eigen::VectorXd sol = a.partialPivLu().solve(b);
    for (std::size_t i = 0; i < n; ++i) pi[i] = sol(static_cast<Eigen::Index>(i));
  } else {
    using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(q.nonzeros() + 2 * n);
    const auto last = static_cast<State>(n - 1);
    for (State x = 0; x < n; ++x) {
      if (x != last) trip.emplace_back(x, x, -q.exit_rate(x));
      const auto ts = q.targets(x);
      const auto rs = q.rates(x);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] != last) trip.emplace_back(ts[i], x, rs[i]);
      }
      trip.emplace_back(last, x, 1.0);
    }
    Sparse a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    b(static_cast<Eigen::Index>(last)) = 1.0;
    Eigen::BiCGSTAB<Sparse, Eigen::IncompleteLUT<double>> solver;
    solver.setMaxIterations(opts.max_iterations);
    solver.setTolerance(opts.residual_tolerance * 1e-3);
    solver.compute(a);
    Eigen::VectorXd guess = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
    const Eigen::VectorXd sol = solver.solveWithGuess(b, guess);
    for (std::size_t i = 0; i < n; ++i) pi[i] = sol(static_cast<Eigen::Index>(i));
    if (solver.info() != Eigen::Success) {
      throw NumericError("stationary_distribution: iterative solver did not converge",
                         balance_residual(q, pi));
    }
  }
  auto result = ProbabilityVector::normalized(std::move(pi));
  const double residual = balance_residual(q, result.values());
  if (residual > opts.residual_tolerance * std::max(scale, 1e-300)) {
    throw NumericError("stationary_distribution: balance residual above tolerance", residual);
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

/// rows <- rows * exp(t Q), all rows at once.
void propagate_rows(const UniformizedKernel& kernel, Eigen::MatrixXd& rows, double t) {
  if (t <= 0.0) return;
  const auto window = poisson_window(kernel.q_max() * t);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rows.rows(), rows.cols());
  Eigen::MatrixXd scratch;
  for (std::size_t j = 0; j <= window.last(); ++j) {
    if (j >= window.first) acc += window.weights[j - window.first] * rows;
    if (j < window.last()) kernel.step_rows(rows, scratch);
  }
  rows.swap(acc);
}

double worst_row_distance(const Eigen::MatrixXd& rows, const ProbabilityVector& pi) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) s += std::abs(rows(r, c) - pi[static_cast<std::size_t>(c)]);
    worst = std::max(worst, 0.5 * s);
  }
  return std::min(worst, 1.0);
}

}  // namespace

ProbabilityVector transition_distribution(const RateGenerator& q, const ProbabilityVector& start,
                                          double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("transition_distribution: t must be finite and >= 0");
  }
  if (start.size() != q.size()) throw std::invalid_argument("transition_distribution: size mismatch");
  if (t == 0.0) return start;
  const UniformizedKernel kernel(q);
  const auto window = poisson_window(kernel.q_max() * t);
  std::vector<double> v(start.values().begin(), start.values().end());
  std::vector<double> next(v.size());
  std::vector<double> acc(v.size(), 0.0);
  for (std::size_t j = 0; j <= window.last(); ++j) {
    if (j >= window.first) {
      const double w = window.weights[j - window.first];
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += w * v[i];
    }
    if (j < window.last()) {
      kernel.step(v, next);
      v.swap(next);
    }
  }
  return ProbabilityVector::normalized(std::move(acc));
}

double worst_case_distance(const RateGenerator& q, const ProbabilityVector& pi, double t) {
  const auto n = static_cast<Eigen::Index>(q.size());
  Eigen::MatrixXd rows = Eigen::MatrixXd::Identity(n, n);
  propagate_rows(UniformizedKernel(q), rows, t);
  return worst_row_distance(rows, pi);
}

MixingProfile mixing_time(const RateGenerator& q, double alpha, const MixingOptions& opts) {
  return mixing_time(q, stationary_distribution(q), alpha, opts);
}

MixingProfile mixing_time(const RateGenerator& q, const ProbabilityVector& pi, double alpha,
                          const MixingOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("mixing_time: alpha must lie in (0,1)");
  const UniformizedKernel kernel(q);
  const auto n = static_cast<Eigen::Index>(q.size());
  MixingProfile profile;
  profile.alpha = alpha;
  profile.relative_tolerance = opts.relative_tolerance;

  Eigen::MatrixXd lo_rows = Eigen::MatrixXd::Identity(n, n);
  const double d0 = worst_row_distance(lo_rows, pi);
  if (d0 <= alpha) {
    profile.t_mix = 0.0;
    profile.distance_at_t_mix = d0;
    profile.distance_below = d0;
    return profile;
  }

  // Bracket by doubling, advancing the lower end incrementally: the rows at
  // t_lo are reused, so only the increment is ever propagated.
  double t_lo = 0.0;
  double t_hi = 1.0 / kernel.q_max();
  Eigen::MatrixXd hi_rows;
  double d_hi = 1.0;
  for (;;) {
    if (t_hi > opts.max_time) {
      throw NumericError("mixing_time: no bracket within the configured time horizon", d_hi);
    }
    hi_rows = lo_rows;
    propagate_rows(kernel, hi_rows, t_hi - t_lo);
    d_hi = worst_row_distance(hi_rows, pi);
    if (d_hi <= alpha) break;
    t_lo = t_hi;
    lo_rows.swap(hi_rows);
    t_hi *= 2.0;
  }
  while (t_hi - t_lo > opts.relative_tolerance * t_hi) {
    const double mid = 0.5 * (t_lo + t_hi);
    Eigen::MatrixXd mid_rows = lo_rows;
    propagate_rows(kernel, mid_rows, mid - t_lo);
    const double d_mid = worst_row_distance(mid_rows, pi);
    if (d_mid <= alpha) {
      t_hi = mid;
      d_hi = d_mid;
    } else {
      t_lo = mid;
      lo_rows.swap(mid_rows);
    }
  }
  profile.t_mix = t_hi;
  profile.distance_at_t_mix = d_hi;
  profile.distance_below = worst_case_distance(q, pi, t_hi * (1.0 - opts.relative_tolerance));
  return profile;
}

// ---------------------------------------------------------------------------

std::vector<State> product_coordinates(State s, std::size_t n, std::size_t k) {
  std::vector<State> c(k);
  for (std::size_t i = k; i-- > 0;) {
    c[i] = static_cast<State>(s % n);
    s = static_cast<State>(s / n);
  }
  return c;
}

State product_index(std::span<const State> coords, std::size_t n) {
  std::size_t s = 0;
  for (State c : coords) s = s * n + c;
  return static_cast<State>(s);
}

RateGenerator product_chain(const RateGenerator& q, std::size_t k, std::size_t state_budget) {
  if (k < 2) throw std::invalid_argument("product_chain: k must be >= 2");
  const std::size_t n = q.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < k; ++i) {
    if (total > state_budget / n) {
      throw BudgetError("product_chain: n^k exceeds the state budget of " + std::to_string(state_budget));
    }
    total *= n;
  }
  std::vector<std::size_t> place(k);  // n^(k-1-i)
  place[k - 1] = 1;
  for (std::size_t i = k - 1; i-- > 0;) place[i] = place[i + 1] * n;

  std::vector<Transition> trans;
  trans.reserve(total * k * (q.nonzeros() / n + 1));
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rest = s;
    for (std::size_t i = 0; i < k; ++i) {
      const auto x = static_cast<State>(rest / place[i]);
      rest %= place[i];
      const auto ts = q.targets(x);
      const auto rs = q.rates(x);
      for (std::size_t e = 0; e < ts.size(); ++e) {
        const std::size_t t = s + (static_cast<std::size_t>(ts[e]) - x) * place[i];
        trans.push_back({static_cast<State>(s), static_cast<State>(t), rs[e]});
      }
    }
  }
  return RateGenerator::from_transitions(total, trans);
}

// ---------------------------------------------------------------------------

double error_scale(double c, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("error_scale: argument must be >= 0");
  if (x >= 1.0) return std::numeric_limits<double>::infinity();
  if (x == 0.0) return 0.0;
  return c * std::sqrt(x * std::log(1.0 / x));
}

ChainDiagnostics chain_diagnostics(const RateGenerator& q, const ProbabilityVector& pi,
                                   const MixingProfile& mixing, std::optional<double> meeting_mean,
                                   const DiagnosticsOptions& opts) {
  ChainDiagnostics d;
  d.q_max = q.max_exit_rate();
  d.q_max_single = q.max_single_rate();
  d.pi_max = pi.max();
  d.t_mix = mixing.t_mix;
  d.alpha_q = (1.0 + d.q_max * d.t_mix) * d.pi_max;
  if (meeting_mean) {
    d.meeting_mean = *meeting_mean;
    d.ratio = d.t_mix / *meeting_mean;
  }
  if (opts.model == ErrorModel::TransitiveReversible) {
    if (d.ratio) d.err = error_scale(opts.c0, *d.ratio);
  } else {
    d.err = error_scale(opts.c1, d.alpha_q);
  }
  return d;
}

}  // namespace coalesce
