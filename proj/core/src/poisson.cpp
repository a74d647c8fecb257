#include "coalesce/poisson.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace coalesce {

PoissonWindow poisson_window(double lambda, double tail) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("poisson_window: lambda must be finite and >= 0");
  }
  PoissonWindow w;
  if (lambda == 0.0) {
    w.weights = {1.0};
    return w;
  }
  // Walk outward from the mode. Beyond the mode the weights decay at least
  // geometrically, so stopping once a weight drops below tail * 1e-4 leaves
  // far less than `tail` outside the window.
  const double cutoff = tail * 1e-4;
  const auto mode = static_cast<std::size_t>(std::floor(lambda));
  const double log_lambda = std::log(lambda);
  const double w_mode =
      std::exp(-lambda + static_cast<double>(mode) * log_lambda - std::lgamma(mode + 1.0));

  std::deque<double> window{w_mode};
  std::size_t first = mode;
  double wj = w_mode;
  while (first > 0) {
    wj *= static_cast<double>(first) / lambda;  // w_{j-1} = w_j * j / lambda
    if (wj < cutoff) break;
    window.push_front(wj);
    --first;
  }
  wj = w_mode;
  for (std::size_t j = mode + 1;; ++j) {
    wj *= lambda / static_cast<double>(j);
    if (wj < cutoff) break;
    window.push_back(wj);
  }
  double sum = 0.0;
  for (double v : window) sum += v;
  w.first = first;
  w.weights.reserve(window.size());
  for (double v : window) w.weights.push_back(v / sum);
  return w;
}

}  // namespace coalesce
