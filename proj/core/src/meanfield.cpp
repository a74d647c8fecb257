#include "coalesce/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "coalesce/errors.hpp"

namespace coalesce {

HypoExpRef::HypoExpRef(std::size_t n_ref, std::size_t stop_level) : n_ref_(n_ref), stop_(stop_level) {
  if (n_ref < 2) throw std::invalid_argument("HypoExpRef: n_ref must be >= 2");
  if (stop_level < 1) throw std::invalid_argument("HypoExpRef: stop level must be >= 1");
  if (stop_ >= n_ref_) return;
  // Transient state j holds level i = n_ref - j; level stop_ is absorbing.
  const std::size_t levels = n_ref_ - stop_;
  const double q = rate(n_ref_);
  std::vector<std::vector<TransientChain::Entry>> rows(levels);
  for (std::size_t j = 0; j < levels; ++j) {
    const double down = rate(n_ref_ - j) / q;
    if (down < 1.0) rows[j].push_back({static_cast<State>(j), 1.0 - down});
    if (j + 1 < levels) rows[j].push_back({static_cast<State>(j + 1), down});
  }
  std::vector<double> init(levels, 0.0);
  init[0] = 1.0;
  curve_ = std::make_shared<const SurvivalCurve>(std::make_shared<const TransientChain>(q, std::move(rows)),
                                                 std::move(init));
}

double HypoExpRef::mean() const {
  if (stop_ >= n_ref_) return 0.0;
  return 2.0 * (1.0 / static_cast<double>(stop_) - 1.0 / static_cast<double>(n_ref_));
}

double HypoExpRef::variance() const {
  double v = 0.0;
  for (std::size_t i = stop_ + 1; i <= n_ref_; ++i) v += 1.0 / (rate(i) * rate(i));
  return v;
}

double HypoExpRef::survival(double t) const {
  if (!curve_) return t < 0.0 ? 1.0 : 0.0;
  return curve_->survival(t);
}

double HypoExpRef::survival_integral(double a, double b) const {
  if (!curve_) return 0.0;
  return curve_->integral(a, b);
}

std::string HypoExpRef::name() const {
  return "hypoexp(n_ref=" + std::to_string(n_ref_) + ",stop=" + std::to_string(stop_) + ")";
}

double HypoExpRef::sample(Philox& rng) const {
  double s = 0.0;
  for (std::size_t i = n_ref_; i > stop_; --i) s += rng.exponential(rate(i));
  return s;
}

std::size_t HypoExpRef::default_n_ref(double tolerance) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("default_n_ref: tolerance must be positive");
  // 2 / n < tolerance / 10  <=>  n > 20 / tolerance.
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(20.0 / tolerance)) + 1);
}

void write_reference_csv(const ReferenceLaw& law, double t_max, std::size_t points,
                         const std::filesystem::path& path) {
  if (points < 2 || !(t_max > 0.0)) throw std::invalid_argument("write_reference_csv: need t_max > 0 and >= 2 points");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_reference_csv: cannot open " + path.string());
  out << "t,survival\n";
  char buf[64];
  for (std::size_t i = 0; i < points; ++i) {
    const double t = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t, law.survival(t));
    out << buf;
  }
}

// ---------------------------------------------------------------------------

KLaw::KLaw(std::vector<double> mu) : mu_(std::move(mu)) {
  if (mu_.empty()) throw std::invalid_argument("KLaw: empty opinion distribution");
  double sum = 0.0;
  for (double p : mu_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("KLaw: weights must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("KLaw: weights must sum to 1");
  cumulative_.resize(mu_.size());
  std::partial_sum(mu_.begin(), mu_.end(), cumulative_.begin());
  point_mass_ = std::any_of(mu_.begin(), mu_.end(), [](double p) { return p >= 1.0; });
}

double KLaw::pmf(std::uint64_t k) const {
  if (k == 0) return 0.0;
  double s = 0.0;
  for (double p : mu_) {
    if (p > 0.0 && p < 1.0) s += std::pow(p, static_cast<double>(k)) * (1.0 - p);
  }
  return s;
}

double KLaw::tail(std::uint64_t k) const {
  double s = 0.0;
  for (double p : mu_) s += std::pow(p, static_cast<double>(k));
  return s;
}

std::size_t KLaw::sample_opinion(Philox& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) it = std::prev(it);
  return static_cast<std::size_t>(it - cumulative_.begin());
}

std::uint64_t KLaw::sample(Philox& rng) const {
  const double p = mu_[sample_opinion(rng)];
  if (p >= 1.0) return kInfinite;
  // Given U_1 = o, K - 1 counts further draws equal to o: geometric with success 1 - p.
  const double g = std::floor(std::log(rng.uniform_pos()) / std::log(p));
  if (!(g < 1.8e19)) return kInfinite;
  return 1 + static_cast<std::uint64_t>(g);
}

double voter_ref_sample(const KLaw& law, std::size_t n_ref, Philox& rng) {
  const std::uint64_t k = law.sample(rng);
  double s = 0.0;
  for (std::size_t i = n_ref; i > k; --i) s += rng.exponential(HypoExpRef::rate(i));
  return s;
}

double voter_ref_mean(const KLaw& law, std::size_t n_ref) {
  if (law.point_mass()) return 0.0;
  double acc = 0.0;
  for (std::uint64_t k = 1; k < n_ref; ++k) {
    acc += law.pmf(k) * 2.0 * (1.0 / static_cast<double>(k) - 1.0 / static_cast<double>(n_ref));
  }
  return acc;
}

}  // namespace coalesce
