#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace coalesce {

/// One Philox4x32-10 block: ten rounds on a 128-bit counter under a 64-bit key.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit key selects the experiment (base seed) and the upper half of the
/// counter selects an independent stream (replica index), so replica r of a run
/// draws the same numbers regardless of which worker executes it.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t key = 0, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  /// Uniform on (0, 1].
  double uniform_pos() noexcept { return 1.0 - uniform(); }
  /// Exponential with the given rate.
  double exponential(double rate) noexcept;
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  void refill() noexcept;

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

/// SplitMix64 finalizer, for deriving sub-experiment seeds from a base seed.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Generator for replica `replica`; identical for any scheduling of replicas.
/// The pair (base, replica) reproduces the replica on its own.
inline Philox replica_rng(std::uint64_t base, std::uint64_t replica) noexcept {
  return Philox(base, replica);
}

}  // namespace coalesce
