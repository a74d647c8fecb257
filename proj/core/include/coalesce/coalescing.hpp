#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "coalesce/chain.hpp"
#include "coalesce/meanfield.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {

enum class InitialMode { Explicit, AllVertices, StationaryIid };

struct RunConfig {
  InitialMode mode = InitialMode::AllVertices;
  std::vector<State> positions;  // Explicit mode
  std::size_t walkers = 0;       // StationaryIid mode
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  /// Stop once the alive count reaches this value (1 = full coalescence).
  std::size_t stop_at = 1;
  /// Per-run guards; zero disables.
  double max_walltime_seconds = 0.0;
  std::uint64_t max_events = 0;
};

inline constexpr std::int32_t kNoKiller = -1;

/// One run of the killed process. coalescence[p] = C_p for stop_at <= p <= k,
/// the first time the alive count is p (C_k = 0).
struct CoalescenceRecord {
  std::size_t walkers = 0;
  std::size_t stop_at = 1;
  std::vector<double> kill_time;      // +inf for survivors
  std::vector<std::int32_t> killer;   // kNoKiller for survivors
  std::vector<double> coalescence;    // size walkers + 1; NaN below stop_at
  std::uint64_t events = 0;

  double C(std::size_t p) const { return coalescence.at(p); }
  double final_time() const { return coalescence.at(stop_at); }
};

/// Initial positions for replica `replica` of the configuration.
std::vector<State> initial_positions(const RateGenerator& q, const ProbabilityVector& pi, const RunConfig& cfg,
                                     Philox& rng);

/// Competing-clocks simulation from the given positions until `stop_at`
/// walkers are alive. Walker w jumping onto alive walker v: max(v, w) dies,
/// min(v, w) is its killer. Duplicate starts coalesce at time 0.
CoalescenceRecord simulate_coalescing(const RateGenerator& q, std::span<const State> positions, Philox& rng,
                                      std::size_t stop_at = 1, double max_walltime_seconds = 0.0,
                                      std::uint64_t max_events = 0);

/// Replica `replica` of the configured run (stream = replica index).
CoalescenceRecord simulate_coalescing(const RateGenerator& q, const ProbabilityVector& pi, const RunConfig& cfg,
                                      std::uint64_t replica);

/// M^(k): the first meeting time among the walkers; C_{k-1} of the same run.
double first_meeting(const RateGenerator& q, std::span<const State> positions, Philox& rng);

/// Event of the traced killed process: every walker keeps moving after death.
struct TraceEvent {
  double time;
  std::uint32_t walker;
  State from;
  State to;
};

struct KilledTrace {
  std::vector<State> initial;
  std::vector<TraceEvent> events;
  CoalescenceRecord record;
};

/// Killed process with all k walkers moving independently for ever; stops at
/// the first event after which `stop_at` walkers are alive. For verification.
KilledTrace simulate_killed_trace(const RateGenerator& q, std::span<const State> positions, Philox& rng,
                                  std::size_t stop_at = 1);

struct CoalescenceSample {
  std::vector<double> final_time;                 // C_{stop_at} per replica
  std::vector<std::size_t> columns;               // extra C_p levels requested
  std::vector<std::vector<double>> column_values; // per column, per replica
  std::vector<double> walltime;                   // seconds per replica
  std::vector<std::uint64_t> events;
};

/// Runs cfg.replications replicas over `workers` threads; results are stored
/// by replica index so they do not depend on the worker count.
CoalescenceSample sample_full_coalescence(const RateGenerator& q, const RunConfig& cfg, std::size_t workers = 1,
                                          std::span<const std::size_t> columns = {});

// --- Voter model ------------------------------------------------------------

/// Consensus time through the dual: C_{K ^ n} of all-vertices coalescence.
double simulate_voter_dual(const RateGenerator& q, const KLaw& law, Philox& rng);

struct VoterForwardResult {
  double consensus_time = 0.0;
  std::uint64_t events = 0;
  /// Discordant rate was zero after consensus (absorption held).
  bool absorbed = true;
};

/// Direct Gillespie simulation: x copies y's opinion at rate q(x, y).
/// Throws BudgetError after `max_events` events without consensus.
VoterForwardResult simulate_voter_forward(const RateGenerator& q, const KLaw& law, Philox& rng,
                                          std::uint64_t max_events = 10'000'000);

}  // namespace coalesce
