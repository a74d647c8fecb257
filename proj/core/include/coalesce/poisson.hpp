#pragma once

#include <cstddef>
#include <vector>

namespace coalesce {

/// Poisson(lambda) weights on the window [first, first + weights.size()).
/// Mass outside the window is below `tail`; the window weights are
/// renormalized to sum to one.
struct PoissonWindow {
  std::size_t first = 0;
  std::vector<double> weights;

  std::size_t last() const noexcept { return first + weights.size() - 1; }
};

PoissonWindow poisson_window(double lambda, double tail = 1e-12);

}  // namespace coalesce
