#include "coalesce/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "coalesce/errors.hpp"
#include "coalesce/poisson.hpp"

namespace coalesce {

TransientChain::TransientChain(double rate, std::vector<std::vector<Entry>> rows) : rate_(rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("TransientChain: uniformization rate must be positive");
  }
  offsets_.assign(rows.size() + 1, 0);
  for (std::size_t x = 0; x < rows.size(); ++x) {
    double sum = 0.0;
    for (const auto& e : rows[x]) {
      if (e.to >= rows.size()) throw std::invalid_argument("TransientChain: target out of range");
      if (e.p < 0.0) throw std::invalid_argument("TransientChain: negative probability");
      sum += e.p;
    }
    if (sum > 1.0 + 1e-12) throw std::invalid_argument("TransientChain: row sum exceeds one");
    offsets_[x + 1] = offsets_[x] + rows[x].size();
    entries_.insert(entries_.end(), rows[x].begin(), rows[x].end());
  }
}

void TransientChain::step(std::span<const double> v, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t n = size();
  for (std::size_t x = 0; x < n; ++x) {
    const double vx = v[x];
    if (vx == 0.0) continue;
    for (std::size_t e = offsets_[x]; e < offsets_[x + 1]; ++e) out[entries_[e].to] += vx * entries_[e].p;
  }
}

std::vector<double> TransientChain::expected_steps(std::size_t dense_threshold,
                                                   double residual_tolerance) const {
  const std::size_t n = size();
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(nn);
  Eigen::VectorXd u;
  if (n <= dense_threshold) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(nn, nn);
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t e = offsets_[x]; e < offsets_[x + 1]; ++e) {
        a(static_cast<Eigen::Index>(x), entries_[e].to) -= entries_[e].p;
      }
    }
    u = a.partialPivLu().solve(ones);
  } else {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(entries_.size() + n);
    for (std::size_t x = 0; x < n; ++x) {
      trip.emplace_back(x, x, 1.0);
      for (std::size_t e = offsets_[x]; e < offsets_[x + 1]; ++e) trip.emplace_back(x, entries_[e].to, -entries_[e].p);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(nn, nn);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    bool solved = false;
    if (n > kSparseDirectLimit) {
      // Fill-in makes direct LU of large product chains impractical.
      Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::IncompleteLUT<double>> it;
      it.preconditioner().setDroptol(1e-4);
      it.preconditioner().setFillfactor(20);
      it.setTolerance(1e-14);
      it.setMaxIterations(4000);
      it.compute(a);
      if (it.info() == Eigen::Success) {
        u = it.solve(ones);
        solved = it.info() == Eigen::Success || (it.error() < 1e-11 && u.allFinite());
      }
    }
    if (!solved) {
      Eigen::SparseMatrix<double> col(a);
      Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
      lu.compute(col);
      if (lu.info() != Eigen::Success) throw NumericError("expected_steps: sparse LU factorization failed", 1.0);
      u = lu.solve(ones);
    }
  }
  // Residual of (I - P) u = 1, relative to the size of u.
  std::vector<double> uv(u.data(), u.data() + n);
  std::vector<double> pu(n, 0.0);
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double acc = uv[x];
    for (std::size_t e = offsets_[x]; e < offsets_[x + 1]; ++e) acc -= entries_[e].p * uv[entries_[e].to];
    worst = std::max(worst, std::abs(acc - 1.0));
  }
  const double scale = std::max(1.0, u.cwiseAbs().maxCoeff());
  if (!std::isfinite(worst) || worst > residual_tolerance * scale) {
    throw NumericError("expected_steps: residual above tolerance", worst);
  }
  for (double& x : uv) x = std::max(x, 0.0);
  return uv;
}

// ---------------------------------------------------------------------------

SurvivalCurve::SurvivalCurve(std::shared_ptr<const TransientChain> chain, std::vector<double> initial)
    : chain_(std::move(chain)), initial_(std::move(initial)) {
  if (!chain_) throw std::invalid_argument("SurvivalCurve: null chain");
  if (initial_.size() != chain_->size()) throw std::invalid_argument("SurvivalCurve: initial vector size mismatch");
  for (double v : initial_) {
    if (!(v >= 0.0)) throw std::invalid_argument("SurvivalCurve: initial mass must be >= 0");
  }
  initial_mass_ = std::accumulate(initial_.begin(), initial_.end(), 0.0);
  if (initial_mass_ > 1.0 + 1e-12) throw std::invalid_argument("SurvivalCurve: initial mass exceeds one");
  v_ = initial_;
  scratch_.resize(v_.size());
  s_.push_back(initial_mass_);
  prefix_ = {0.0, initial_mass_};
}

void SurvivalCurve::extend(std::size_t last) const {
  s_.reserve(last + 1);
  while (s_.size() <= last) {
    if (s_.back() == 0.0) {
      s_.push_back(0.0);
    } else {
      chain_->step(v_, scratch_);
      v_.swap(scratch_);
      double total = 0.0;
      for (double x : v_) total += x;
      s_.push_back(std::min(total, s_.back()));
    }
    prefix_.push_back(prefix_.back() + s_.back());
  }
}

double SurvivalCurve::survival(double t) const {
  if (!(t >= 0.0)) return 1.0;
  const auto w = poisson_window(chain_->rate() * t);
  extend(w.last());
  double acc = 0.0;
  for (std::size_t j = 0; j < w.weights.size(); ++j) acc += w.weights[j] * s_[w.first + j];
  return std::clamp(acc, 0.0, 1.0);
}

double SurvivalCurve::integral(double t) const {
  if (!(t > 0.0)) return 0.0;
  // int_0^t Pois(q s)(j) ds = P(N_{qt} >= j + 1) / q.
  const auto w = poisson_window(chain_->rate() * t);
  extend(w.last());
  double acc = prefix_[w.first];
  double tail = 1.0;
  for (std::size_t j = 0; j < w.weights.size(); ++j) {
    tail -= w.weights[j];
    acc += s_[w.first + j] * std::max(tail, 0.0);
  }
  return acc / chain_->rate();
}

double SurvivalCurve::mean() const {
  if (mean_ < 0.0) {
    if (initial_mass_ == 0.0) {
      mean_ = 0.0;
    } else {
      const auto u = chain_->expected_steps();
      double acc = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) acc += initial_[i] * u[i];
      mean_ = acc / chain_->rate();
    }
  }
  return mean_;
}

}  // namespace coalesce
