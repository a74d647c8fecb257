#pragma once

#include <cmath>
#include <vector>

#include "coalesce/chain.hpp"
#include "coalesce/graph.hpp"
#include "coalesce/rng.hpp"

namespace coalesce::test {

inline RateGenerator two_state(double a, double b) {
  const std::vector<Transition> t{{0, 1, a}, {1, 0, b}};
  return RateGenerator::from_transitions(2, t);
}

inline RateGenerator walk(const GraphSpec& spec) { return walk_generator(build_graph(spec)); }

/// Irreducible generator on n states: a random Hamiltonian cycle plus random
/// extra arcs, rates uniform on [0.1, 2). Non-reversible in general.
inline RateGenerator random_chain(std::size_t n, Philox& rng, double extra_density = 0.3) {
  std::vector<State> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<State>(i);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<Transition> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({order[i], order[(i + 1) % n], 0.1 + 1.9 * rng.uniform()});
  for (State x = 0; x < n; ++x) {
    for (State y = 0; y < n; ++y) {
      if (x != y && rng.uniform() < extra_density) t.push_back({x, y, 0.1 + 1.9 * rng.uniform()});
    }
  }
  return RateGenerator::from_transitions(n, t);
}

/// Random law with full support.
inline ProbabilityVector random_law(std::size_t n, Philox& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = 0.05 + rng.uniform();
  return ProbabilityVector::normalized(std::move(v));
}

inline bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)); }

}  // namespace coalesce::test
