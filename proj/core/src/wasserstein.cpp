#include "coalesce/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "coalesce/errors.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {

// --- Reference laws ---------------------------------------------------------

double ReferenceLaw::survival_integral(double a, double b) const {
  if (!(b > a)) return 0.0;
  double error = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [this](double t) { return survival(t); }, a, b, 15, 1e-6, &error);
  if (!std::isfinite(v) || error > 1e-6 * std::max(std::abs(v), 1e-300) + 1e-15) {
    throw NumericError("survival_integral: quadrature did not converge", error);
  }
  return v;
}

ExponentialLaw::ExponentialLaw(double mean) : mean_(mean) {
  if (!(mean > 0.0) || !std::isfinite(mean)) throw std::invalid_argument("ExponentialLaw: mean must be positive");
}

double ExponentialLaw::survival(double t) const { return t <= 0.0 ? 1.0 : std::exp(-t / mean_); }

double ExponentialLaw::survival_integral(double a, double b) const {
  if (!(b > a)) return 0.0;
  a = std::max(a, 0.0);
  b = std::max(b, 0.0);
  // m (e^{-a/m} - e^{-b/m}), written to keep precision on short intervals.
  return mean_ * std::exp(-a / mean_) * -std::expm1(-(b - a) / mean_);
}

std::string ExponentialLaw::name() const { return "exp(mean=" + std::to_string(mean_) + ")"; }

CurveLaw::CurveLaw(std::shared_ptr<const SurvivalCurve> curve, std::string label)
    : curve_(std::move(curve)), label_(std::move(label)) {
  if (!curve_) throw std::invalid_argument("CurveLaw: null curve");
}

double CurveLaw::survival(double t) const { return t < 0.0 ? 1.0 : curve_->survival(t); }

double CurveLaw::survival_integral(double a, double b) const {
  return curve_->integral(std::max(b, 0.0)) - curve_->integral(std::max(a, 0.0));
}

double CurveLaw::mean() const { return curve_->mean(); }

ScaledLaw::ScaledLaw(std::shared_ptr<const ReferenceLaw> base, double scale) : base_(std::move(base)), scale_(scale) {
  if (!base_ || !(scale > 0.0)) throw std::invalid_argument("ScaledLaw: need a law and a positive scale");
}

double ScaledLaw::survival(double t) const { return base_->survival(t / scale_); }

double ScaledLaw::survival_integral(double a, double b) const {
  return scale_ * base_->survival_integral(a / scale_, b / scale_);
}

double ScaledLaw::mean() const { return scale_ * base_->mean(); }

std::string ScaledLaw::name() const { return std::to_string(scale_) + "*" + base_->name(); }

// --- Samples ----------------------------------------------------------------

EmpiricalSample::EmpiricalSample(std::vector<double> values, std::uint64_t seed, std::string label)
    : values_(std::move(values)), seed_(seed), label_(std::move(label)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("EmpiricalSample: values must be finite");
  }
  std::sort(values_.begin(), values_.end());
}

EmpiricalSample EmpiricalSample::scaled(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= c;
  return EmpiricalSample(std::move(v), seed_, label_);
}

MeanSE mean_and_se(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("mean_and_se: need at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

MeanSE mean_and_se(const EmpiricalSample& a) { return mean_and_se(a.values()); }

double w1_samples(const EmpiricalSample& a, const EmpiricalSample& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("w1_samples: empty sample");
  const auto na = a.size(), nb = b.size();
  const double inv = 1.0 / (static_cast<double>(na) * static_cast<double>(nb));
  std::size_t i = 0, j = 0;
  double acc = 0.0;
  double t = std::min(a[0], b[0]);
  while (i < na || j < nb) {
    // Advance past every point equal to t; F_a = i / na, F_b = j / nb afterwards.
    while (i < na && a[i] <= t) ++i;
    while (j < nb && b[j] <= t) ++j;
    if (i == na && j == nb) break;
    const double next = std::min(i < na ? a[i] : INFINITY, j < nb ? b[j] : INFINITY);
    const auto diff = static_cast<double>(i * nb > j * na ? i * nb - j * na : j * na - i * nb);
    acc += diff * inv * (next - t);
    t = next;
  }
  return acc;
}

double w1_sample_vs_ref(const EmpiricalSample& a, const ReferenceLaw& ref) {
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("w1_sample_vs_ref: empty sample");
  const double inv_n = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  // Negative values: F_ref = 0 there, F_emp = i / n.
  std::size_t i = 0;
  while (i < n && a[i] < 0.0) {
    const double next = i + 1 < n ? std::min(a[i + 1], 0.0) : 0.0;
    acc += static_cast<double>(i + 1) * inv_n * (next - a[i]);
    ++i;
  }
  // [0, x_first): F_emp = i / n for the i values below zero.
  auto piece = [&](double lo, double hi, double level) {
    // int_lo^hi |level - F_ref| = int |S - c| with c = 1 - level, S decreasing.
    if (!(hi > lo)) return 0.0;
    const double c = 1.0 - level;
    const double s_lo = ref.survival(lo), s_hi = ref.survival(hi);
    if (s_lo <= c) return c * (hi - lo) - ref.survival_integral(lo, hi);
    if (s_hi >= c) return ref.survival_integral(lo, hi) - c * (hi - lo);
    const auto g = [&](double t) { return ref.survival(t) - c; };
    std::uintmax_t iters = 200;
    const auto tol = [](double x, double y) { return std::abs(y - x) <= 1e-14 * std::max(std::abs(x), std::abs(y)); };
    const auto [r0, r1] = boost::math::tools::toms748_solve(g, lo, hi, s_lo - c, s_hi - c, tol, iters);
    const double root = 0.5 * (r0 + r1);
    return (ref.survival_integral(lo, root) - c * (root - lo)) + (c * (hi - root) - ref.survival_integral(root, hi));
  };
  double t = 0.0;
  for (; i < n; ++i) {
    acc += piece(t, a[i], static_cast<double>(i) * inv_n);
    t = std::max(t, a[i]);
  }
  // Beyond the largest value: F_emp = 1, the gap is the reference tail.
  const double tail = ref.mean() - ref.survival_integral(0.0, t);
  acc += std::max(tail, 0.0);
  return acc;
}

ComparisonReport compare_to_reference(const EmpiricalSample& a, const ReferenceLaw& ref,
                                      std::optional<double> threshold) {
  ComparisonReport r;
  r.n = a.size();
  r.seed = a.seed();
  r.threshold = threshold;
  r.w1 = w1_sample_vs_ref(a, ref);
  const double mean = std::accumulate(a.values().begin(), a.values().end(), 0.0) / static_cast<double>(a.size());
  r.mean_gap = std::abs(mean - ref.mean());
  r.mean_gap_consistent = r.mean_gap <= r.w1 + kAuditTolerance;
  return r;
}

// --- Audits -----------------------------------------------------------------

namespace {

void record(AuditReport& r, double lhs, double rhs, const std::string& what) {
  ++r.checks;
  const double excess = lhs - rhs;
  if (r.checks == 1 || excess > r.worst_excess) r.worst_excess = excess;
  if (excess > kAuditTolerance) {
    ++r.violations;
    r.messages.push_back(what + ": " + std::to_string(lhs) + " > " + std::to_string(rhs));
  }
}

}  // namespace

AuditReport w1_triangle_audit(std::span<const EmpiricalSample> samples) {
  AuditReport r;
  const std::size_t s = samples.size();
  std::vector<double> d(s * s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) d[i * s + j] = d[j * s + i] = w1_samples(samples[i], samples[j]);
  }
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      for (std::size_t c = 0; c < s; ++c) {
        if (a == b || b == c || a == c) continue;
        record(r, d[a * s + c], d[a * s + b] + d[b * s + c],
               "triangle(" + std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(c) + ")");
      }
    }
  }
  return r;
}

AuditReport w1_sum_audit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("w1_sum_audit: need paired nonempty samples");
  std::vector<double> sum(x.size());
  double abs_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum[i] = x[i] + y[i];
    abs_y += std::abs(y[i]);
  }
  abs_y /= static_cast<double>(x.size());
  AuditReport r;
  const EmpiricalSample ex(std::vector<double>(x.begin(), x.end()));
  const EmpiricalSample es(std::move(sum));
  record(r, w1_samples(ex, es), abs_y, "sum");
  return r;
}

AuditReport w1_sandwich_audit(const EmpiricalSample& z_minus, const EmpiricalSample& z,
                              const EmpiricalSample& z_plus, const EmpiricalSample& w) {
  AuditReport r;
  // Stochastic order of equal-size empirical laws is order of sorted values.
  if (z_minus.size() == z.size() && z.size() == z_plus.size()) {
    bool ordered = true;
    for (std::size_t i = 0; i < z.size(); ++i) ordered = ordered && z_minus[i] <= z[i] && z[i] <= z_plus[i];
    ++r.checks;
    if (!ordered) {
      ++r.violations;
      r.messages.push_back("sandwich: samples are not stochastically ordered");
    }
  }
  record(r, w1_samples(z, w), w1_samples(z_minus, w) + w1_samples(z_plus, w), "sandwich");
  return r;
}

// --- Tests ------------------------------------------------------------------

PermutationTest permutation_test_w1(const EmpiricalSample& a, const EmpiricalSample& b, std::size_t shuffles,
                                    double level, std::uint64_t seed) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("permutation_test_w1: empty sample");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("permutation_test_w1: level must lie in (0,1)");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled;
  pooled.reserve(n);
  pooled.insert(pooled.end(), a.values().begin(), a.values().end());
  pooled.insert(pooled.end(), b.values().begin(), b.values().end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = pooled[order[i]];

  // W1 between the two label groups, one pass over the sorted pool.
  std::vector<char> label(n);
  const auto statistic = [&]() {
    const double ia = 1.0 / static_cast<double>(na), ib = 1.0 / static_cast<double>(nb);
    double fa = 0.0, fb = 0.0, acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      (label[i] ? fb += ib : fa += ia);
      acc += std::abs(fa - fb) * (sorted[i + 1] - sorted[i]);
    }
    return acc;
  };
  for (std::size_t i = 0; i < n; ++i) label[i] = order[i] >= na ? 1 : 0;

  PermutationTest r;
  r.level = level;
  r.shuffles = shuffles;
  r.statistic = statistic();
  Philox rng(seed, 0x5045524dULL);
  std::vector<double> perm(shuffles);
  std::size_t exceed = 0;
  for (std::size_t s = 0; s < shuffles; ++s) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(label[i], label[rng.below(i + 1)]);
    perm[s] = statistic();
    if (perm[s] >= r.statistic - 1e-12 * std::abs(r.statistic)) ++exceed;
  }
  r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + shuffles);
  if (shuffles > 0) {
    std::sort(perm.begin(), perm.end());
    const auto idx = static_cast<std::size_t>(std::ceil((1.0 - level) * static_cast<double>(shuffles))) - 1;
    r.critical_value = perm[std::min(idx, shuffles - 1)];
  }
  r.reject = r.p_value < level;
  return r;
}

double ks_statistic(const EmpiricalSample& a, const ReferenceLaw& ref) {
  if (a.size() == 0) throw std::invalid_argument("ks_statistic: empty sample");
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = ref.cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_value(std::size_t n, double level) {
  if (n == 0 || !(level > 0.0 && level < 1.0)) throw std::invalid_argument("ks_critical_value: bad arguments");
  // P(K > x) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 x^2}, decreasing in x.
  const auto tail = [](double x) {
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
    return s;
  };
  double lo = 0.2, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tail(mid) > level ? lo : hi) = mid;
  }
  return hi / std::sqrt(static_cast<double>(n));
}

nlohmann::json to_json(const ComparisonReport& r) {
  return {{"w1", r.w1},
          {"mean_gap", r.mean_gap},
          {"n", r.n},
          {"seed", r.seed},
          {"threshold", r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json()},
          {"mean_gap_consistent", r.mean_gap_consistent}};
}

nlohmann::json to_json(const AuditReport& r) {
  return {{"checks", r.checks}, {"violations", r.violations}, {"worst_excess", r.worst_excess}, {"messages", r.messages}};
}

nlohmann::json to_json(const PermutationTest& r) {
  return {{"statistic", r.statistic}, {"critical_value", r.critical_value}, {"p_value", r.p_value},
          {"level", r.level},         {"shuffles", r.shuffles},             {"reject", r.reject}};
}

}  // namespace coalesce
