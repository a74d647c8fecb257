#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "coalesce/reference_law.hpp"
#include "coalesce/rng.hpp"
#include "coalesce/survival.hpp"

namespace coalesce {

/// Law of Z_{p+1} + ... + Z_{n_ref}, with Z_i ~ Exp(rate C(i,2)) independent.
/// The default stop level p = 1 gives the mean-field law sum_{i>=2} Z_i
/// truncated at n_ref. Evaluated as the phase-type law of the pure-death
/// chain n_ref -> n_ref - 1 -> ... -> p, by uniformization.
class HypoExpRef final : public ReferenceLaw {
 public:
  explicit HypoExpRef(std::size_t n_ref, std::size_t stop_level = 1);

  std::size_t n_ref() const noexcept { return n_ref_; }
  std::size_t stop_level() const noexcept { return stop_; }
  static double rate(std::size_t i) noexcept { return 0.5 * static_cast<double>(i) * static_cast<double>(i - 1); }

  /// 2 (1/p - 1/n_ref); zero when p >= n_ref.
  double mean() const override;
  double variance() const;
  double survival(double t) const override;
  double survival_integral(double a, double b) const override;
  std::string name() const override;

  double sample(Philox& rng) const;

  /// Smallest n_ref with truncation error 2 / n_ref below tolerance / 10.
  static std::size_t default_n_ref(double tolerance);

 private:
  std::size_t n_ref_;
  std::size_t stop_;
  std::shared_ptr<const SurvivalCurve> curve_;  // null when the law is a point mass at 0
};

/// Writes "t,survival" rows on a uniform grid of `points` times over [0, t_max].
void write_reference_csv(const ReferenceLaw& law, double t_max, std::size_t points,
                         const std::filesystem::path& path);

/// K = min{i : U_{i+1} != U_1} for iid opinions U_i ~ mu.
class KLaw {
 public:
  static constexpr std::uint64_t kInfinite = std::numeric_limits<std::uint64_t>::max();

  explicit KLaw(std::vector<double> mu);

  std::span<const double> mu() const noexcept { return mu_; }
  bool point_mass() const noexcept { return point_mass_; }
  /// sum_o mu(o)^k (1 - mu(o)).
  double pmf(std::uint64_t k) const;
  /// P(K >= k) = sum_o mu(o)^k.
  double tail(std::uint64_t k) const;
  /// kInfinite when mu is a point mass.
  std::uint64_t sample(Philox& rng) const;
  /// Opinion index drawn from mu.
  std::size_t sample_opinion(Philox& rng) const;

 private:
  std::vector<double> mu_;
  std::vector<double> cumulative_;
  bool point_mass_ = false;
};

/// Draws K and returns sum_{i=K+1}^{n_ref} Z_i (0 when K >= n_ref).
double voter_ref_sample(const KLaw& law, std::size_t n_ref, Philox& rng);
/// E[sum_{i=K+1}^{n_ref} Z_i] = sum_{k < n_ref} P(K = k) 2 (1/k - 1/n_ref).
double voter_ref_mean(const KLaw& law, std::size_t n_ref);

}  // namespace coalesce
