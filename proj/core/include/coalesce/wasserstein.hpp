#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coalesce/reference_law.hpp"

namespace coalesce {

/// Sorted finite sample with its seed provenance.
class EmpiricalSample {
 public:
  explicit EmpiricalSample(std::vector<double> values, std::uint64_t seed = 0, std::string label = {});

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }

  /// Values multiplied by c.
  EmpiricalSample scaled(double c) const;

 private:
  std::vector<double> values_;
  std::uint64_t seed_;
  std::string label_;
};

struct MeanSE {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Sample mean and s / sqrt(n) with the n - 1 variance. Requires n >= 2.
MeanSE mean_and_se(const EmpiricalSample& a);
MeanSE mean_and_se(std::span<const double> values);

/// Area between the two empirical CDFs.
double w1_samples(const EmpiricalSample& a, const EmpiricalSample& b);

/// Area between the empirical CDF and the reference CDF on [min(0, x_1), inf).
double w1_sample_vs_ref(const EmpiricalSample& a, const ReferenceLaw& ref);

struct ComparisonReport {
  double w1 = 0.0;
  double mean_gap = 0.0;  // |sample mean - reference mean|
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::optional<double> threshold;
  /// mean_gap <= w1 (the mean is 1-Lipschitz in W1); tolerance 1e-9.
  bool mean_gap_consistent = true;
  bool pass() const { return mean_gap_consistent && (!threshold || w1 <= *threshold); }
};

ComparisonReport compare_to_reference(const EmpiricalSample& a, const ReferenceLaw& ref,
                                      std::optional<double> threshold = std::nullopt);

struct AuditReport {
  std::size_t checks = 0;
  std::size_t violations = 0;
  double worst_excess = 0.0;  // largest lhs - rhs over all checks (<= 0 when clean)
  std::vector<std::string> messages;
  bool ok() const { return violations == 0; }
};

inline constexpr double kAuditTolerance = 1e-9;

/// d(a, c) <= d(a, b) + d(b, c) over all ordered triples of samples.
AuditReport w1_triangle_audit(std::span<const EmpiricalSample> samples);
/// d_W(X, X + Y) <= E|Y| for paired draws (x_i, y_i).
AuditReport w1_sum_audit(std::span<const double> x, std::span<const double> y);
/// d_W(Z, W) <= d_W(Z-, W) + d_W(Z+, W) when Z- <= Z <= Z+ stochastically.
/// Records a violation when the empirical laws are not ordered.
AuditReport w1_sandwich_audit(const EmpiricalSample& z_minus, const EmpiricalSample& z,
                              const EmpiricalSample& z_plus, const EmpiricalSample& w);

struct PermutationTest {
  double statistic = 0.0;       // observed two-sample W1
  double critical_value = 0.0;  // (1 - level) quantile of the permutation law
  double p_value = 1.0;
  double level = 0.01;
  std::size_t shuffles = 0;
  bool reject = false;
};

/// Two-sample W1 permutation test: labels reshuffled `shuffles` times.
PermutationTest permutation_test_w1(const EmpiricalSample& a, const EmpiricalSample& b,
                                    std::size_t shuffles = 1000, double level = 0.01,
                                    std::uint64_t seed = 0);

/// sup_t |F_n(t) - F(t)|.
double ks_statistic(const EmpiricalSample& a, const ReferenceLaw& ref);
/// Asymptotic critical value c / sqrt(n) of the Kolmogorov distribution at `level`.
double ks_critical_value(std::size_t n, double level = 0.01);

nlohmann::json to_json(const ComparisonReport& r);
nlohmann::json to_json(const AuditReport& r);
nlohmann::json to_json(const PermutationTest& r);

}  // namespace coalesce
