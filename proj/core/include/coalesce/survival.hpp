#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "coalesce/chain.hpp"

namespace coalesce {

/// Uniformized killed chain: a substochastic kernel on the transient states
/// together with its uniformization rate. Mass that leaves the kernel has
/// been absorbed.
inline constexpr std::size_t kSparseDirectLimit = 6000;

class TransientChain {
 public:
  struct Entry {
    State to;
    double p;
  };

  /// rows[x] lists the transitions out of transient state x, including the
  /// self-loop; row sums must not exceed one.
  TransientChain(double rate, std::vector<std::vector<Entry>> rows);

  double rate() const noexcept { return rate_; }
  std::size_t size() const noexcept { return offsets_.size() - 1; }

  /// out = v P_sub.
  void step(std::span<const double> v, std::span<double> out) const;

  /// Expected number of uniformized steps before absorption from each state,
  /// u = (I - P_sub)^{-1} 1. Dense LU up to `dense_threshold` states, sparse LU
  /// up to kSparseDirectLimit, preconditioned BiCGSTAB above (sparse LU if it
  /// stalls). The residual is checked in every case.
  std::vector<double> expected_steps(std::size_t dense_threshold = 2000,
                                     double residual_tolerance = 1e-10) const;

 private:
  double rate_;
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
};

/// P_start(H > t) for the absorption time H of a transient chain, evaluated by
/// uniformization. The sequence s_j = P(not absorbed after j uniformized
/// steps) is cached and extended on demand, so each evaluation costs a
/// Poisson-window sum. Not safe to share across threads.
class SurvivalCurve {
 public:
  SurvivalCurve(std::shared_ptr<const TransientChain> chain, std::vector<double> initial);

  double operator()(double t) const { return survival(t); }
  double survival(double t) const;
  double cdf(double t) const { return 1.0 - survival(t); }
  /// Integral of the survival function over [0, t].
  double integral(double t) const;
  /// Integral over [a, b].
  double integral(double a, double b) const { return integral(b) - integral(a); }
  /// E[H], from the linear solve (cached).
  double mean() const;
  /// Mass not absorbed at time zero.
  double initial_mass() const noexcept { return initial_mass_; }

  const TransientChain& chain() const noexcept { return *chain_; }

 private:
  void extend(std::size_t last) const;

  std::shared_ptr<const TransientChain> chain_;
  std::vector<double> initial_;
  double initial_mass_ = 0.0;
  mutable std::vector<double> s_;       // s_j
  mutable std::vector<double> prefix_;  // prefix_[j] = s_0 + ... + s_{j-1}
  mutable std::vector<double> v_;       // start * P_sub^(s_.size() - 1)
  mutable std::vector<double> scratch_;
  mutable double mean_ = -1.0;
};

}  // namespace coalesce
