#include "coalesce/coalescing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "coalesce/errors.hpp"
#include "coalesce/parallel.hpp"

namespace coalesce {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Fenwick tree over walker rates; find() inverts the prefix sums.
class RateTree {
 public:
  explicit RateTree(std::size_t n) : tree_(n + 1, 0.0), value_(n, 0.0) {
    while ((top_ << 1) <= n) top_ <<= 1;
  }

  void set(std::size_t i, double v) {
    const double delta = v - value_[i];
    value_[i] = v;
    total_ += delta;
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
  }
  double value(std::size_t i) const { return value_[i]; }
  double total() const { return total_; }

  /// Smallest i with prefix(i + 1) > u.
  std::size_t find(double u) const {
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step >>= 1) {
      if (pos + step < tree_.size() && tree_[pos + step] <= u) {
        pos += step;
        u -= tree_[pos];
      }
    }
    return pos;
  }

 private:
  std::vector<double> tree_;
  std::vector<double> value_;
  double total_ = 0.0;
  std::size_t top_ = 1;
};

class Guard {
 public:
  Guard(double max_seconds, std::uint64_t max_events)
      : max_events_(max_events), limited_(max_seconds > 0.0),
        deadline_(std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                          std::chrono::duration<double>(limited_ ? max_seconds : 0.0))) {}

  void check(std::uint64_t events) const {
    if (max_events_ != 0 && events > max_events_) {
      throw BudgetError("simulation exceeded the event budget of " + std::to_string(max_events_));
    }
    if (limited_ && (events & 0xffff) == 0 && std::chrono::steady_clock::now() > deadline_) {
      throw BudgetError("simulation exceeded its wall-clock budget");
    }
  }

 private:
  std::uint64_t max_events_;
  bool limited_;
  std::chrono::steady_clock::time_point deadline_;
};

CoalescenceRecord empty_record(std::size_t k, std::size_t stop_at) {
  CoalescenceRecord r;
  r.walkers = k;
  r.stop_at = stop_at;
  r.kill_time.assign(k, kInf);
  r.killer.assign(k, kNoKiller);
  r.coalescence.assign(k + 1, std::numeric_limits<double>::quiet_NaN());
  r.coalescence[k] = 0.0;
  return r;
}

void check_positions(const RateGenerator& q, std::span<const State> positions, std::size_t stop_at) {
  if (positions.empty()) throw std::invalid_argument("coalescing: need at least one walker");
  if (stop_at < 1 || stop_at > positions.size()) throw std::invalid_argument("coalescing: stop level out of range");
  for (State x : positions) {
    if (x >= q.size()) throw std::invalid_argument("coalescing: position out of range");
  }
}

// Records a kill and the new alive count's coalescence time.
void kill(CoalescenceRecord& r, std::size_t& alive, std::size_t loser, std::size_t winner, double t) {
  r.kill_time[loser] = t;
  r.killer[loser] = static_cast<std::int32_t>(winner);
  --alive;
  r.coalescence[alive] = t;
}

}  // namespace

std::vector<State> initial_positions(const RateGenerator& q, const ProbabilityVector& pi, const RunConfig& cfg,
                                     Philox& rng) {
  switch (cfg.mode) {
    case InitialMode::Explicit:
      return cfg.positions;
    case InitialMode::AllVertices: {
      std::vector<State> v(q.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<State>(i);
      return v;
    }
    case InitialMode::StationaryIid: {
      if (cfg.walkers == 0) throw std::invalid_argument("initial_positions: stationary mode needs walkers >= 1");
      const StateSampler sampler(pi);
      std::vector<State> v(cfg.walkers);
      for (auto& x : v) x = sampler(rng);
      return v;
    }
  }
  throw std::invalid_argument("initial_positions: unknown mode");
}

CoalescenceRecord simulate_coalescing(const RateGenerator& q, std::span<const State> positions, Philox& rng,
                                      std::size_t stop_at, double max_walltime_seconds, std::uint64_t max_events) {
  check_positions(q, positions, stop_at);
  const std::size_t k = positions.size();
  auto r = empty_record(k, stop_at);
  std::vector<State> pos(positions.begin(), positions.end());
  std::vector<std::int32_t> occupant(q.size(), -1);
  RateTree rates(k);
  std::size_t alive = k;
  for (std::size_t w = 0; w < k; ++w) {
    auto& occ = occupant[pos[w]];
    if (occ < 0) {
      occ = static_cast<std::int32_t>(w);
      rates.set(w, q.exit_rate(pos[w]));
    } else {
      kill(r, alive, w, static_cast<std::size_t>(occ), 0.0);
    }
  }
  const Guard guard(max_walltime_seconds, max_events);
  double t = 0.0;
  while (alive > stop_at) {
    ++r.events;
    guard.check(r.events);
    const double total = rates.total();
    t += rng.exponential(total);
    std::size_t w = rates.find(rng.uniform() * total);
    // Round-off in the tree can land on a zero-rate slot; fall back to a scan.
    if (w >= k || rates.value(w) <= 0.0) {
      w = k;
      for (std::size_t i = k; i-- > 0;) {
        if (rates.value(i) > 0.0) {
          w = i;
          break;
        }
      }
    }
    const State from = pos[w];
    const State to = jump_target(q, from, rng.uniform());
    occupant[from] = -1;
    const std::int32_t v = occupant[to];
    if (v < 0) {
      occupant[to] = static_cast<std::int32_t>(w);
      pos[w] = to;
      rates.set(w, q.exit_rate(to));
      continue;
    }
    const auto other = static_cast<std::size_t>(v);
    const std::size_t winner = std::min(w, other), loser = std::max(w, other);
    kill(r, alive, loser, winner, t);
    rates.set(loser, 0.0);
    occupant[to] = static_cast<std::int32_t>(winner);
    if (winner == w) {
      pos[w] = to;
      rates.set(w, q.exit_rate(to));
    }
  }
  return r;
}

CoalescenceRecord simulate_coalescing(const RateGenerator& q, const ProbabilityVector& pi, const RunConfig& cfg,
                                      std::uint64_t replica) {
  auto rng = replica_rng(cfg.seed, replica);
  const auto positions = initial_positions(q, pi, cfg, rng);
  const std::size_t stop = std::min(cfg.stop_at, positions.size());
  return simulate_coalescing(q, positions, rng, stop, cfg.max_walltime_seconds, cfg.max_events);
}

double first_meeting(const RateGenerator& q, std::span<const State> positions, Philox& rng) {
  if (positions.size() < 2) throw std::invalid_argument("first_meeting: need at least two walkers");
  const std::size_t p = positions.size() - 1;
  return simulate_coalescing(q, positions, rng, p).C(p);
}

KilledTrace simulate_killed_trace(const RateGenerator& q, std::span<const State> positions, Philox& rng,
                                  std::size_t stop_at) {
  check_positions(q, positions, stop_at);
  const std::size_t k = positions.size();
  KilledTrace trace;
  trace.initial.assign(positions.begin(), positions.end());
  trace.record = empty_record(k, stop_at);
  auto& r = trace.record;
  std::vector<State> pos(trace.initial);
  std::vector<char> is_alive(k, 1);
  std::size_t alive = k;
  for (std::size_t w = 0; w < k; ++w) {
    for (std::size_t v = 0; v < w; ++v) {
      if (is_alive[v] && pos[v] == pos[w]) {
        is_alive[w] = 0;
        kill(r, alive, w, v, 0.0);
        break;
      }
    }
  }
  double t = 0.0;
  while (alive > stop_at) {
    ++r.events;
    double total = 0.0;
    for (State x : pos) total += q.exit_rate(x);
    t += rng.exponential(total);
    double u = rng.uniform() * total;
    std::size_t w = 0;
    while (w + 1 < k && u >= q.exit_rate(pos[w])) u -= q.exit_rate(pos[w++]);
    const State from = pos[w];
    const State to = jump_target(q, from, rng.uniform());
    pos[w] = to;
    trace.events.push_back({t, static_cast<std::uint32_t>(w), from, to});
    if (!is_alive[w]) continue;
    for (std::size_t v = 0; v < k; ++v) {
      if (v != w && is_alive[v] && pos[v] == to) {
        const std::size_t winner = std::min(v, w), loser = std::max(v, w);
        is_alive[loser] = 0;
        kill(r, alive, loser, winner, t);
        break;
      }
    }
  }
  return trace;
}

CoalescenceSample sample_full_coalescence(const RateGenerator& q, const RunConfig& cfg, std::size_t workers,
                                          std::span<const std::size_t> columns) {
  if (cfg.replications == 0) throw std::invalid_argument("sample_full_coalescence: need replications >= 1");
  const auto pi = cfg.mode == InitialMode::StationaryIid ? stationary_distribution(q) : ProbabilityVector::uniform(q.size());
  const std::size_t reps = cfg.replications;
  CoalescenceSample s;
  s.final_time.assign(reps, 0.0);
  s.columns.assign(columns.begin(), columns.end());
  s.column_values.assign(columns.size(), std::vector<double>(reps, 0.0));
  s.walltime.assign(reps, 0.0);
  s.events.assign(reps, 0);
  for (std::size_t c : columns) {
    if (c < cfg.stop_at) throw std::invalid_argument("sample_full_coalescence: column below the stop level");
  }
  parallel_for(reps, workers, [&](std::size_t rep) {
    const auto start = std::chrono::steady_clock::now();
    const auto rec = simulate_coalescing(q, pi, cfg, rep);
    s.final_time[rep] = rec.final_time();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      s.column_values[c][rep] = columns[c] <= rec.walkers ? rec.C(columns[c]) : 0.0;
    }
    s.events[rep] = rec.events;
    s.walltime[rep] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return s;
}

}  // namespace coalesce
