#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "coalesce/chain.hpp"
#include "coalesce/survival.hpp"

namespace coalesce {

/// Nonempty subset of the state space of a chain with `size()` states.
class TargetSet {
 public:
  static TargetSet from_states(std::size_t n, std::span<const State> states);
  static TargetSet from_mask(std::vector<char> mask);
  /// Delta = {(x, x)} in the pair chain on n_base^2 states.
  static TargetSet diagonal(std::size_t n_base);
  /// Delta_{i,j} = {x : x(i) = x(j)} in the k-fold product chain.
  static TargetSet pair_diagonal(std::size_t n_base, std::size_t k, std::size_t i, std::size_t j);
  /// Union of Delta_{i,j} over all pairs i < j.
  static TargetSet any_pair_diagonal(std::size_t n_base, std::size_t k);

  std::size_t size() const noexcept { return mask_.size(); }
  bool contains(State s) const noexcept { return mask_[s] != 0; }
  std::size_t count() const noexcept { return count_; }
  double mass(const ProbabilityVector& p) const;
  TargetSet united(const TargetSet& other) const;

 private:
  explicit TargetSet(std::vector<char> mask);

  std::vector<char> mask_;
  std::size_t count_ = 0;
};

/// The chain killed on A, as a transient chain over the complement of A.
struct KilledChain {
  std::shared_ptr<const TransientChain> chain;
  std::vector<std::uint32_t> index;  // state -> transient index, kNotTransient on A
  static constexpr std::uint32_t kNotTransient = 0xffffffffU;

  std::vector<double> restrict(const ProbabilityVector& start) const;
};

KilledChain killed_chain(const RateGenerator& q, const TargetSet& a);

/// E_start[H_A] from the linear system (Q off A) u = -1, u = 0 on A.
double mean_hitting_time(const RateGenerator& q, const TargetSet& a, const ProbabilityVector& start);
/// E_x[H_A] for every state x.
std::vector<double> hitting_times(const RateGenerator& q, const TargetSet& a);

/// t -> P_start(H_A > t).
SurvivalCurve survival(const RateGenerator& q, const TargetSet& a, const ProbabilityVector& start);

struct QuantileResult {
  double epsilon = 0.0;
  double t_eps = 0.0;
  double mean = 0.0;
  double cdf_at_t_eps = 0.0;
  /// |epsilon * mean / t_eps - 1|.
  double deviation = 0.0;
};

/// Time t_eps with P(H <= t_eps) = epsilon. Requires S(0) = 1.
QuantileResult quantile(const SurvivalCurve& curve, double epsilon);

/// Expdist(m, alpha, beta): laws whose survival satisfies
/// (1 - alpha) e^{-t/((1-beta)m)} <= S(t) <= (1 + alpha) e^{-t/((1+beta)m)}.
struct ExpEnvelope {
  double m = 1.0;
  double alpha = 0.0;
  double beta = 0.0;

  double lower(double t) const;
  double upper(double t) const;
  bool contains(double t, double s, double tolerance = 1e-12) const;
};

/// 2 (alpha + beta) m, an upper bound on the W1 distance to Exp(m).
double envelope_w1_bound(const ExpEnvelope& env);

/// t = 0 plus `points` log-spaced times on [1e-3 m, 10 m].
std::vector<double> envelope_grid(double m, std::size_t points = 200);

struct EnvelopeFitReport {
  double m = 0.0;
  std::vector<double> grid;
  std::vector<double> survival;
  /// Largest S(t) - e^{-t/m} and e^{-t/m} - S(t) on the grid (zero-slack violations).
  double worst_upper_violation = 0.0;
  double worst_lower_violation = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  /// Membership of every grid point re-verified at the fitted (alpha, beta).
  bool certified = false;
  /// False when S vanishes identically (start supported inside the target).
  bool applicable = true;
  std::optional<double> threshold;
  std::optional<double> r_lambda;  // P(H <= threshold)

  ExpEnvelope envelope() const { return {m, alpha, beta}; }
};

inline constexpr double kMaxEnvelopeBeta = 0.95;

/// Smallest slack on the grid: beta minimizes alpha*(beta) + beta, the W1
/// bound, where alpha*(beta) is the least amplitude slack certifying every
/// grid point; ties go to the smaller beta.
EnvelopeFitReport envelope_fit(std::span<const double> grid, std::span<const double> survival,
                               double m);
EnvelopeFitReport envelope_fit(const SurvivalCurve& curve, double m, std::span<const double> grid,
                               std::optional<double> threshold = std::nullopt);

/// E_{pi x pi}[M] on the pair chain.
double meeting_mean(const RateGenerator& q, std::size_t state_budget = kDefaultStateBudget);

struct PairMeetingReport {
  double horizon = 0.0;
  double exact = 0.0;  // P_{lambda x pi}(M <= T)
  double bound = 0.0;  // (1 + 2 T q_max) pi_max
  double violation = 0.0;
  bool violated = false;
  std::size_t samples = 0;
  std::optional<double> mc_estimate;
  std::optional<double> mc_standard_error;
};

PairMeetingReport pair_meeting_bound_check(const RateGenerator& q, const ProbabilityVector& lambda,
                                           double horizon, std::size_t n_samples = 0,
                                           std::uint64_t seed = 0,
                                           std::size_t state_budget = kDefaultStateBudget);

// --- Correlations --------------------------------------------------------

/// P_start(H_A <= t, H_B <= t), exact through hit-flag augmentation.
double joint_hit_probability(const RateGenerator& q, const TargetSet& a, const TargetSet& b,
                             const ProbabilityVector& start, double t);

struct CorrelationTerm {
  std::size_t first = 0;   // index of the first target (or pair)
  std::size_t second = 0;
  double joint = 0.0;
  double marginal_first = 0.0;
  double marginal_second = 0.0;
  std::optional<double> standard_error;
};

struct CorrelationReport {
  std::size_t k = 0;        // walkers (meeting form) or targets (generic form)
  std::size_t ell = 0;      // number of targets
  double epsilon = 0.0;
  double m = 0.0;
  /// Relative spread of E_start[H_{A_i}] across targets.
  double mean_spread = 0.0;
  bool exact = true;
  std::size_t samples = 0;
  std::vector<CorrelationTerm> terms;  // one per unordered pair of targets
  double xi = 0.0;                     // (1 / (ell eps)) sum_terms joint
  std::optional<double> xi_standard_error;
  /// Meeting form: P_{pi x pi}(M <= eps m) and the bound 2 P(M <= eps m)^2.
  std::optional<double> pair_marginal;
  std::optional<double> transitive_bound;
  std::optional<double> worst_transitive_violation;
  /// Meeting form: walker pairs {i,j} for each target index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// xi for arbitrary targets A_1..A_ell with a common start law (exact).
CorrelationReport correlation_xi(const RateGenerator& q, std::span<const TargetSet> targets,
                                 const ProbabilityVector& start, double epsilon);

enum class CorrelationMode { Auto, Exact, MonteCarlo };

struct MeetingCorrelationOptions {
  CorrelationMode mode = CorrelationMode::Auto;
  std::size_t state_budget = kDefaultStateBudget;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

/// xi for the pair diagonals Delta_{i,j} of k walkers started from pi^{(x)k}.
CorrelationReport meeting_correlation(const RateGenerator& q, std::size_t k, double epsilon,
                                      const MeetingCorrelationOptions& opts = {});

nlohmann::json to_json(const QuantileResult& r);
nlohmann::json to_json(const EnvelopeFitReport& r);
nlohmann::json to_json(const PairMeetingReport& r);
nlohmann::json to_json(const CorrelationReport& r);

}  // namespace coalesce
