#include <algorithm>
#include <string>
#include <vector>

#include "coalesce/coalescing.hpp"
#include "coalesce/errors.hpp"

namespace coalesce {

double simulate_voter_dual(const RateGenerator& q, const KLaw& law, Philox& rng) {
  const std::uint64_t k = law.sample(rng);
  const std::size_t n = q.size();
  if (k >= n) return 0.0;
  std::vector<State> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<State>(i);
  return simulate_coalescing(q, all, rng, static_cast<std::size_t>(k)).final_time();
}

VoterForwardResult simulate_voter_forward(const RateGenerator& q, const KLaw& law, Philox& rng,
                                          std::uint64_t max_events) {
  const std::size_t n = q.size();
  std::vector<std::size_t> opinion(n);
  for (auto& o : opinion) o = law.sample_opinion(rng);
  const auto consensus = [&] {
    return std::all_of(opinion.begin(), opinion.end(), [&](std::size_t o) { return o == opinion[0]; });
  };
  std::vector<double> discordant(n);
  const auto refresh = [&] {
    double total = 0.0;
    for (State x = 0; x < n; ++x) {
      double d = 0.0;
      const auto ts = q.targets(x);
      const auto rs = q.rates(x);
      for (std::size_t e = 0; e < ts.size(); ++e) {
        if (opinion[ts[e]] != opinion[x]) d += rs[e];
      }
      discordant[x] = d;
      total += d;
    }
    return total;
  };

  VoterForwardResult r;
  double t = 0.0;
  while (!consensus()) {
    if (++r.events > max_events) {
      throw BudgetError("voter forward simulation exceeded " + std::to_string(max_events) + " events");
    }
    const double total = refresh();
    t += rng.exponential(total);
    double u = rng.uniform() * total;
    State x = 0;
    while (x + 1 < n && (discordant[x] == 0.0 || u >= discordant[x])) u -= discordant[x++];
    // x copies a discordant target chosen proportionally to q(x, y).
    const auto ts = q.targets(x);
    const auto rs = q.rates(x);
    double v = rng.uniform() * discordant[x];
    std::size_t pick = ts.size();
    for (std::size_t e = 0; e < ts.size(); ++e) {
      if (opinion[ts[e]] == opinion[x]) continue;
      pick = e;
      if (v < rs[e]) break;
      v -= rs[e];
    }
    opinion[x] = opinion[ts[pick]];
  }
  r.consensus_time = t;
  r.absorbed = refresh() == 0.0;
  return r;
}

}  // namespace coalesce
