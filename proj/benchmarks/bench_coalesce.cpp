#include <benchmark/benchmark.h>

#include <vector>

#include "coalesce/coalescing.hpp"
#include "coalesce/graph.hpp"
#include "coalesce/hitting.hpp"
#include "coalesce/meanfield.hpp"
#include "coalesce/wasserstein.hpp"

using namespace coalesce;

namespace {

RateGenerator torus(std::size_t side) { return walk_generator(build_graph(GraphSpec::torus(2, side))); }

// Full coalescence from every vertex: the event loop and its rate tree.
void BM_CoalescenceAllVertices(benchmark::State& state) {
  const auto q = torus(static_cast<std::size_t>(state.range(0)));
  std::vector<State> start(q.size());
  for (std::size_t i = 0; i < start.size(); ++i) start[i] = static_cast<State>(i);
  std::uint64_t replica = 0, events = 0;
  for (auto _ : state) {
    auto rng = replica_rng(1, replica++);
    const auto r = simulate_coalescing(q, start, rng);
    events += r.events;
    benchmark::DoNotOptimize(r.final_time());
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_CoalescenceAllVertices)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

// Mean meeting time: one linear solve on the pair chain.
void BM_MeetingMean(benchmark::State& state) {
  const auto q = walk_generator(build_graph(GraphSpec::cycle(static_cast<std::size_t>(state.range(0)))));
  for (auto _ : state) benchmark::DoNotOptimize(meeting_mean(q));
}
BENCHMARK(BM_MeetingMean)->Arg(20)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

// Survival evaluation by uniformization over a grid out to 10 m.
void BM_SurvivalGrid(benchmark::State& state) {
  const auto q = torus(static_cast<std::size_t>(state.range(0)));
  const auto pair = product_chain(q, 2);
  const auto pi2 = tensor_power(stationary_distribution(q), 2);
  const auto diag = TargetSet::diagonal(q.size());
  const double m = meeting_mean(q);
  const auto grid = envelope_grid(m);
  for (auto _ : state) {
    const auto curve = survival(pair, diag, pi2);
    double s = 0.0;
    for (double t : grid) s += curve(t);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_SurvivalGrid)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

std::vector<double> draws(std::size_t n, std::uint64_t seed) {
  auto rng = replica_rng(seed, 0);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.exponential(1.0);
  return v;
}

void BM_W1TwoSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const EmpiricalSample a(draws(n, 1)), b(draws(n, 2));
  for (auto _ : state) benchmark::DoNotOptimize(w1_samples(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_W1TwoSample)->Arg(10000)->Arg(1000000);

void BM_W1VersusHypoexp(benchmark::State& state) {
  const EmpiricalSample a(draws(10000, 3));
  const HypoExpRef ref(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(w1_sample_vs_ref(a, ref));
}
BENCHMARK(BM_W1VersusHypoexp)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
