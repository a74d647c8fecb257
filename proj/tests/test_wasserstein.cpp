#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "coalesce/meanfield.hpp"
#include "coalesce/wasserstein.hpp"

using namespace coalesce;

namespace {

// Empirical CDF of nonnegative values as a reference law, integrated exactly.
class StepLaw final : public ReferenceLaw {
 public:
  explicit StepLaw(std::vector<double> v) : v_(std::move(v)) { std::sort(v_.begin(), v_.end()); }
  double survival(double t) const override {
    const auto above = v_.end() - std::upper_bound(v_.begin(), v_.end(), t);
    return static_cast<double>(above) / static_cast<double>(v_.size());
  }
  double survival_integral(double a, double b) const override {
    double acc = 0.0;
    for (double x : v_) acc += std::max(0.0, std::min(b, x) - a);
    return acc / static_cast<double>(v_.size());
  }
  double mean() const override { return survival_integral(0.0, v_.back() + 1.0); }
  std::string name() const override { return "step"; }

 private:
  std::vector<double> v_;
};

std::vector<double> exponentials(std::size_t n, double mean, std::uint64_t seed) {
  Philox rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.exponential(1.0 / mean);
  return v;
}

std::vector<double> uniforms(std::size_t n, double lo, double hi, Philox& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

}  // namespace

TEST_CASE("two-sample W1 worked examples") {
  const EmpiricalSample a({0.0, 2.0}), b({1.0, 1.0});
  CHECK(w1_samples(a, a) == 0.0);
  CHECK(std::abs(w1_samples(EmpiricalSample({0.0}), EmpiricalSample({1.0})) - 1.0) < 1e-15);
  CHECK(std::abs(w1_samples(a, b) - 1.0) < 1e-15);
  CHECK(std::abs(w1_samples(b, a) - 1.0) < 1e-15);
  // Unequal sizes: {0} vs {0, 1} differ by 1/2 on [0, 1).
  CHECK(std::abs(w1_samples(EmpiricalSample({0.0}), EmpiricalSample({0.0, 1.0})) - 0.5) < 1e-15);
  CHECK_THROWS_AS(w1_samples(EmpiricalSample({}), a), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalSample({1.0, NAN}), std::invalid_argument);
}

TEST_CASE("two-sample W1 is a metric on random samples") {
  Philox rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<EmpiricalSample> s;
    for (int i = 0; i < 4; ++i) s.emplace_back(uniforms(n, -1.0, 3.0 * rng.uniform(), rng));
    for (const auto& x : s) {
      CHECK(w1_samples(x, x) == 0.0);
      for (const auto& y : s) {
        CHECK(w1_samples(x, y) >= 0.0);
        CHECK(std::abs(w1_samples(x, y) - w1_samples(y, x)) < 1e-12);
      }
    }
    // Equal sizes: W1 is the mean gap of sorted values; zero only for equal multisets.
    double sorted_gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) sorted_gap += std::abs(s[0][i] - s[1][i]);
    CHECK(std::abs(w1_samples(s[0], s[1]) - sorted_gap / n) < 1e-12);
    const auto audit = w1_triangle_audit(s);
    CHECK(audit.checks == 24);
    CHECK(audit.ok());
  }
}

TEST_CASE("sample against reference agrees with the two-sample form") {
  Philox rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = uniforms(1 + rng.below(30), 0.0, 2.0, rng);
    const auto b = uniforms(1 + rng.below(30), 0.0, 2.0, rng);
    const double two_sample = w1_samples(EmpiricalSample(a), EmpiricalSample(b));
    CHECK(std::abs(w1_sample_vs_ref(EmpiricalSample(a), StepLaw(b)) - two_sample) < 1e-9);
  }
}

TEST_CASE("W1 against exponential references") {
  const EmpiricalSample s(exponentials(1000000, 1.0, 17), 17);
  CHECK(w1_sample_vs_ref(s, ExponentialLaw(1.0)) <= 0.01);
  // d_W(Exp(1), Exp(2)) = int (e^{-t/2} - e^{-t}) dt = 1.
  const double d = w1_sample_vs_ref(s, ExponentialLaw(2.0));
  CHECK(std::abs(d - 1.0) < 0.01);
  const auto r = compare_to_reference(s, ExponentialLaw(2.0), 1.1);
  CHECK(r.mean_gap <= r.w1 + kAuditTolerance);
  CHECK(r.mean_gap_consistent);
  CHECK(r.pass());
  CHECK(r.n == 1000000);
  CHECK(r.seed == 17);
  const auto j = to_json(r);
  CHECK(j.at("threshold").get<double>() == 1.1);
  CHECK(j.at("w1").get<double>() == r.w1);
}

TEST_CASE("scaling identity") {
  // Comonotone coupling: d_W(Z, cZ) = |c - 1| E[Z] exactly for samples.
  Philox rng(2);
  for (double c : {0.5, 1.5, 3.0}) {
    const EmpiricalSample z(uniforms(200, 0.0, 5.0, rng));
    const double mean = mean_and_se(z).mean;
    CHECK(std::abs(w1_samples(z, z.scaled(c)) - std::abs(c - 1.0) * mean) < 1e-10);
  }
  // Scaled Exp(1) sample against the Exp(1) reference: 0.5 E[Z] within 1%.
  const EmpiricalSample z(exponentials(1000000, 1.0, 23));
  CHECK(std::abs(w1_sample_vs_ref(z.scaled(1.5), ExponentialLaw(1.0)) - 0.5) < 0.005);
  // A scaled reference law gives the same answer from the other side.
  auto base = std::make_shared<const HypoExpRef>(20);
  const ScaledLaw scaled(base, 1.5);
  CHECK(std::abs(scaled.mean() - 1.5 * base->mean()) < 1e-12);
  CHECK(std::abs(scaled.survival_integral(0.0, 100.0) - scaled.mean()) < 1e-8);
}

TEST_CASE("mean gap never exceeds W1") {
  Philox rng(31);
  const HypoExpRef ref(30);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(200);
    const double stretch = 0.5 + rng.uniform();
    for (auto& x : v) x = stretch * ref.sample(rng);
    const auto r = compare_to_reference(EmpiricalSample(v), ref);
    CHECK(r.mean_gap <= r.w1 + kAuditTolerance);
    CHECK(r.mean_gap_consistent);
  }
}

TEST_CASE("mean and standard error") {
  auto ms = mean_and_se(EmpiricalSample({1.0, 1.0, 1.0}));
  CHECK(ms.mean == 1.0);
  CHECK(ms.standard_error == 0.0);
  ms = mean_and_se(EmpiricalSample({0.0, 2.0}));
  CHECK(ms.mean == 1.0);
  CHECK(std::abs(ms.standard_error - 1.0) < 1e-15);
  ms = mean_and_se(EmpiricalSample(exponentials(1000000, 1.0, 99)));
  CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.standard_error);
  CHECK_THROWS_AS(mean_and_se(EmpiricalSample({1.0})), std::invalid_argument);
}

TEST_CASE("sum and sandwich audits") {
  Philox rng(13);
  const auto x = uniforms(500, 0.0, 1.0, rng);
  const std::vector<double> shift(500, 0.3);
  const auto translated = w1_sum_audit(x, shift);
  CHECK(translated.ok());
  CHECK(std::abs(translated.worst_excess) < 1e-12);  // equality for a constant shift

  const auto noise = uniforms(500, -1.0, 1.0, rng);
  CHECK(w1_sum_audit(x, noise).ok());

  // Z- <= Z <= Z+ coupled through shared uniforms.
  std::vector<double> zm, z, zp;
  for (int i = 0; i < 400; ++i) {
    const double u = rng.uniform_pos();
    zm.push_back(-std::log(u) * 0.8);
    z.push_back(-std::log(u));
    zp.push_back(-std::log(u) * 1.3);
  }
  const EmpiricalSample w(exponentials(300, 1.1, 5));
  const auto sandwich = w1_sandwich_audit(EmpiricalSample(zm), EmpiricalSample(z), EmpiricalSample(zp), w);
  CHECK(sandwich.ok());
  CHECK(sandwich.checks == 2);
  // Unordered inputs are reported.
  const auto bad = w1_sandwich_audit(EmpiricalSample(zp), EmpiricalSample(z), EmpiricalSample(zm), w);
  CHECK_FALSE(bad.ok());
}

TEST_CASE("permutation test") {
  const EmpiricalSample a(exponentials(2000, 1.0, 1)), b(exponentials(2000, 1.0, 2));
  const auto same = permutation_test_w1(a, b, 1000, 0.01, 7);
  CHECK(same.shuffles == 1000);
  CHECK(same.p_value > 0.0);
  CHECK(same.p_value <= 1.0);
  CHECK(same.reject == (same.p_value < 0.01));
  CHECK(std::abs(same.statistic - w1_samples(a, b)) < 1e-9);
  CHECK(same.critical_value > 0.0);

  const EmpiricalSample c(exponentials(2000, 1.3, 3));
  const auto diff = permutation_test_w1(a, c, 1000, 0.01, 7);
  CHECK(diff.reject);
  CHECK(diff.statistic > diff.critical_value);

  // Deterministic per seed.
  CHECK(permutation_test_w1(a, b, 200, 0.01, 9).p_value == permutation_test_w1(a, b, 200, 0.01, 9).p_value);

  // Under the null the rejection rate stays near the level.
  int rejections = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const EmpiricalSample u(exponentials(100, 1.0, 1000 + 2 * s)), v(exponentials(100, 1.0, 1001 + 2 * s));
    rejections += permutation_test_w1(u, v, 200, 0.05, s).reject;
  }
  CHECK(rejections <= 12);  // Binomial(100, 0.05): P(X > 12) < 0.002
}

TEST_CASE("Kolmogorov-Smirnov helpers") {
  CHECK(std::abs(ks_critical_value(1, 0.01) - 1.62762) < 1e-5);
  CHECK(std::abs(ks_critical_value(1, 0.05) - 1.35810) < 1e-5);
  CHECK(std::abs(ks_critical_value(10000, 0.01) - 0.0162762) < 1e-7);

  // Midpoint quantiles of Exp(1): the statistic is exactly 1 / (2n).
  const std::size_t n = 1000;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = -std::log(1.0 - (i + 0.5) / n);
  CHECK(std::abs(ks_statistic(EmpiricalSample(q), ExponentialLaw(1.0)) - 0.5 / n) < 1e-12);
}
