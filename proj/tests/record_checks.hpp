#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <vector>

#include "coalesce/coalescing.hpp"

namespace coalesce::test {

// Structural invariants of one record started from `positions`.
inline void check_record(const CoalescenceRecord& r, std::span<const State> positions) {
  const std::size_t k = r.walkers;
  REQUIRE(r.coalescence.size() == k + 1);
  CHECK(r.C(k) == 0.0);
  CHECK(r.killer[0] == kNoKiller);
  CHECK(std::isinf(r.kill_time[0]));
  const bool distinct_starts = std::set<State>(positions.begin(), positions.end()).size() == k;
  for (std::size_t p = r.stop_at; p < k; ++p) {
    CHECK(r.C(p) >= r.C(p + 1));
    if (distinct_starts) CHECK(r.C(p) > r.C(p + 1));
  }
  std::size_t dead = 0;
  std::vector<double> kill_times;
  for (std::size_t j = 0; j < k; ++j) {
    if (r.killer[j] == kNoKiller) {
      CHECK(std::isinf(r.kill_time[j]));
      continue;
    }
    ++dead;
    const auto i = static_cast<std::size_t>(r.killer[j]);
    CHECK(i < j);
    CHECK(r.kill_time[i] > r.kill_time[j]);  // the killer was alive
    kill_times.push_back(r.kill_time[j]);
  }
  // Duplicate starts may overshoot the stop level at time 0.
  const std::size_t sites = std::set<State>(positions.begin(), positions.end()).size();
  CHECK(dead == k - std::min(r.stop_at, sites));
  // Each drop of the alive count is a kill.
  std::sort(kill_times.begin(), kill_times.end());
  for (std::size_t d = 0; d < kill_times.size(); ++d) CHECK(kill_times[d] == r.C(k - 1 - d));
}

// First time at or after `from` when walkers a and b share a site, replaying
// the independent walks of the trace; +inf if they never do within it.
inline double pair_meeting_after(const KilledTrace& tr, std::size_t a, std::size_t b, double from) {
  std::vector<State> pos(tr.initial);
  if (from <= 0.0 && pos[a] == pos[b]) return 0.0;
  for (const auto& e : tr.events) {
    pos[e.walker] = e.to;
    if (e.time >= from && pos[a] == pos[b]) return e.time;
  }
  return INFINITY;
}

inline void check_trace(const KilledTrace& tr) {
  const auto& r = tr.record;
  const std::size_t k = r.walkers;
  check_record(r, tr.initial);

  // C_p is the first meeting after C_{p+1} among walkers alive at C_{p+1}.
  for (std::size_t p = k - 1; p >= r.stop_at && p >= 1; --p) {
    const double start = r.C(p + 1);
    double best = INFINITY;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        if (r.kill_time[a] > start && r.kill_time[b] > start) {
          // Strictly after the previous drop unless both started together.
          const double m = pair_meeting_after(tr, a, b, start);
          best = std::min(best, m);
        }
      }
    }
    if (start == 0.0 && r.C(p) == 0.0) continue;  // duplicate starts
    CHECK(best == r.C(p));
    if (p == 1) break;
  }

  // Coalesced representation from the same events: clusters merge on contact
  // and move with their smallest member.
  std::vector<State> pos(tr.initial);
  std::vector<std::size_t> leader(k);
  std::vector<State> site(k);
  for (std::size_t j = 0; j < k; ++j) {
    leader[j] = j;
    site[j] = pos[j];
  }
  const auto find = [&](std::size_t j) {
    while (leader[j] != j) j = leader[j];
    return j;
  };
  const auto merge_all = [&] {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const auto la = find(a), lb = find(b);
        if (la != lb && site[la] == site[lb]) leader[std::max(la, lb)] = std::min(la, lb);
      }
    }
  };
  merge_all();
  const auto compare = [&](double t) {
    std::set<State> alive_sites, cluster_sites;
    std::set<std::size_t> alive, leaders;
    for (std::size_t j = 0; j < k; ++j) {
      if (r.kill_time[j] > t) {
        alive_sites.insert(pos[j]);
        alive.insert(j);
      }
      leaders.insert(find(j));
      cluster_sites.insert(site[find(j)]);
    }
    CHECK(alive_sites == cluster_sites);
    CHECK(alive == leaders);
  };
  compare(0.0);
  for (const auto& e : tr.events) {
    pos[e.walker] = e.to;
    if (find(e.walker) == e.walker) site[e.walker] = e.to;
    merge_all();
    compare(e.time);
  }
}

}  // namespace coalesce::test
