#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coalesce/rng.hpp"

namespace coalesce {

using State = std::uint32_t;

struct Transition {
  State from;
  State to;
  double rate;
};

/// Generator of an irreducible continuous-time Markov chain on {0, ..., n-1}.
///
/// Off-diagonal rates are stored in CSR form; the diagonal is implicit
/// (minus the exit rate). Construction rejects self-loops, negative or
/// non-finite rates and chains that are not strongly connected. Duplicate
/// (from, to) entries are summed.
class RateGenerator {
 public:
  static RateGenerator from_transitions(std::size_t n, std::span<const Transition> transitions);

  std::size_t size() const noexcept { return exit_rate_.size(); }
  double exit_rate(State x) const noexcept { return exit_rate_[x]; }
  std::span<const double> exit_rates() const noexcept { return exit_rate_; }

  /// Largest exit rate sum_y q(x, y); the uniformization constant.
  double max_exit_rate() const noexcept { return max_exit_; }
  /// Largest single off-diagonal rate q(x, y).
  double max_single_rate() const noexcept { return max_single_; }

  std::span<const State> targets(State x) const noexcept {
    return {targets_.data() + offsets_[x], targets_.data() + offsets_[x + 1]};
  }
  std::span<const double> rates(State x) const noexcept {
    return {rates_.data() + offsets_[x], rates_.data() + offsets_[x + 1]};
  }
  /// Cumulative rates out of x, for sampling a destination.
  std::span<const double> cumulative_rates(State x) const noexcept {
    return {cumulative_.data() + offsets_[x], cumulative_.data() + offsets_[x + 1]};
  }
  double rate(State x, State y) const noexcept;

  std::size_t nonzeros() const noexcept { return targets_.size(); }
  std::vector<Transition> transitions() const;

 private:
  RateGenerator() = default;

  std::vector<std::size_t> offsets_;
  std::vector<State> targets_;
  std::vector<double> rates_;
  std::vector<double> cumulative_;
  std::vector<double> exit_rate_;
  double max_exit_ = 0.0;
  double max_single_ = 0.0;
};

/// True when every state reaches every other state through positive rates.
bool strongly_connected(std::size_t n, std::span<const Transition> transitions);

/// Nonnegative vector summing to one, within 1e-12 plus the worst-case
/// rounding of an n-term sum.
class ProbabilityVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit ProbabilityVector(std::vector<double> values);
  static ProbabilityVector point_mass(std::size_t n, State x);
  static ProbabilityVector uniform(std::size_t n);
  /// Clamps round-off negatives and rescales; for outputs of numeric routines.
  static ProbabilityVector normalized(std::vector<double> values);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const noexcept { return p_[i]; }
  std::span<const double> values() const noexcept { return p_; }
  double max() const noexcept;

 private:
  std::vector<double> p_;
};

/// Draws states from a fixed law by inversion of its cumulative sums.
class StateSampler {
 public:
  explicit StateSampler(const ProbabilityVector& p);
  State operator()(Philox& rng) const;

 private:
  std::vector<double> cumulative_;
};

/// Destination of a jump out of x, with u uniform on [0, 1).
State jump_target(const RateGenerator& q, State x, double u);

/// Product measure p1 (x) p2 (x) ... with the first factor varying slowest.
ProbabilityVector tensor_power(const ProbabilityVector& p, std::size_t k);
ProbabilityVector tensor_product(const ProbabilityVector& a, const ProbabilityVector& b);

/// Discrete kernel P = I + Q / q_max.
class UniformizedKernel {
 public:
  explicit UniformizedKernel(const RateGenerator& q);

  double q_max() const noexcept { return q_max_; }
  std::size_t size() const noexcept { return self_.size(); }

  /// out = v P for a row vector v.
  void step(std::span<const double> v, std::span<double> out) const;
  /// Each row of `rows` is advanced one step in place (uses `scratch`).
  void step_rows(Eigen::MatrixXd& rows, Eigen::MatrixXd& scratch) const;

  /// Row x of P as (column, probability) pairs including the diagonal.
  std::vector<std::pair<State, double>> row(State x) const;

 private:
  const RateGenerator* q_;
  double q_max_;
  std::vector<double> self_;  // P(x, x)
};

double total_variation(const ProbabilityVector& p, const ProbabilityVector& q);
double total_variation(std::span<const double> p, std::span<const double> q);

struct SolverOptions {
  /// Systems up to this size use dense LU.
  std::size_t dense_threshold = 2000;
  double residual_tolerance = 1e-10;
  int max_iterations = 20000;
};

/// Unique stationary law: pi Q = 0, sum pi = 1.
ProbabilityVector stationary_distribution(const RateGenerator& q, const SolverOptions& opts = {});

/// max_y |(pi Q)(y)|, the balance residual of a candidate law.
double balance_residual(const RateGenerator& q, std::span<const double> pi);

/// Law of X_t started from `start`, by uniformization (Poisson tail mass < 1e-12).
ProbabilityVector transition_distribution(const RateGenerator& q, const ProbabilityVector& start,
                                          double t);

/// Worst-case distance to stationarity d(t) = max_x d_TV(P_x(X_t = .), pi).
double worst_case_distance(const RateGenerator& q, const ProbabilityVector& pi, double t);

struct MixingOptions {
  double relative_tolerance = 1e-6;
  double max_time = 1e9;
};

struct MixingProfile {
  double alpha = 0.25;
  double t_mix = 0.0;
  double relative_tolerance = 1e-6;
  double distance_at_t_mix = 0.0;
  /// Distance just below the bracket, at t_mix * (1 - relative_tolerance).
  double distance_below = 1.0;
};

/// Smallest t with d(t) <= alpha (bisection on the monotone profile).
MixingProfile mixing_time(const RateGenerator& q, double alpha, const MixingOptions& opts = {});
MixingProfile mixing_time(const RateGenerator& q, const ProbabilityVector& pi, double alpha,
                          const MixingOptions& opts = {});

inline constexpr std::size_t kDefaultStateBudget = 4'000'000;

/// Q^(k) on V^k: each transition moves exactly one coordinate.
/// Coordinate 0 is the most significant digit of the state index.
RateGenerator product_chain(const RateGenerator& q, std::size_t k,
                            std::size_t state_budget = kDefaultStateBudget);

/// Decodes a product-chain state into its k coordinates.
std::vector<State> product_coordinates(State s, std::size_t n, std::size_t k);
State product_index(std::span<const State> coords, std::size_t n);

enum class ErrorModel { TransitiveReversible, General };

struct DiagnosticsOptions {
  double c0 = 1.0;
  double c1 = 1.0;
  ErrorModel model = ErrorModel::General;
};

struct ChainDiagnostics {
  double q_max = 0.0;         // max exit rate
  double q_max_single = 0.0;  // max single rate
  double pi_max = 0.0;
  double t_mix = 0.0;         // T_mix(1/4)
  double alpha_q = 0.0;       // (1 + q_max t_mix) pi_max
  std::optional<double> meeting_mean;
  std::optional<double> ratio;  // t_mix / m
  std::optional<double> err;    // error scale for the chosen model
};

/// c * sqrt(x ln(1/x)); +inf when x >= 1 (the scale is only meaningful for x < 1).
double error_scale(double c, double x);

ChainDiagnostics chain_diagnostics(const RateGenerator& q, const ProbabilityVector& pi,
                                   const MixingProfile& mixing,
                                   std::optional<double> meeting_mean = std::nullopt,
                                   const DiagnosticsOptions& opts = {});

}  // namespace coalesce
