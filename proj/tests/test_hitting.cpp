#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "coalesce/hitting.hpp"
#include "support.hpp"

using namespace coalesce;
using coalesce::test::two_state;
using coalesce::test::walk;

namespace {

// Survival curve of Exp(mean m) realized as a one-state transient chain.
SurvivalCurve exponential_curve(double m) {
  auto chain = std::make_shared<const TransientChain>(
      1.0 / m, std::vector<std::vector<TransientChain::Entry>>(1));
  return SurvivalCurve(chain, {1.0});
}

double meeting_mean_formula(double n) { return (1.0 - 1.0 / n) * (n - 1.0) / 2.0; }

}  // namespace

TEST_CASE("target sets") {
  const auto d = TargetSet::diagonal(3);
  CHECK(d.size() == 9);
  CHECK(d.count() == 3);
  CHECK(d.contains(0));
  CHECK(d.contains(4));
  CHECK_FALSE(d.contains(1));
  const auto d02 = TargetSet::pair_diagonal(2, 3, 0, 2);
  CHECK(d02.count() == 4);
  CHECK(d02.contains(product_index(std::vector<State>{1, 0, 1}, 2)));
  CHECK_FALSE(d02.contains(product_index(std::vector<State>{1, 1, 0}, 2)));
  const auto any = TargetSet::any_pair_diagonal(3, 3);
  CHECK(any.count() == 27 - 6);
  CHECK_THROWS_AS(TargetSet::from_states(3, std::vector<State>{}), std::invalid_argument);
  const auto u = TargetSet::from_states(4, std::vector<State>{0}).united(TargetSet::from_states(4, std::vector<State>{3}));
  CHECK(u.count() == 2);
  CHECK(u.mass(ProbabilityVector::uniform(4)) == doctest::Approx(0.5));
}

TEST_CASE("mean hitting times of pair chains") {
  const auto k2 = walk(GraphSpec::complete(2));
  CHECK(std::abs(meeting_mean(k2) - 0.25) < 1e-10);
  for (std::size_t n : {3u, 4u, 10u}) {
    CHECK(std::abs(meeting_mean(walk(GraphSpec::complete(n))) - meeting_mean_formula(n)) < 1e-10);
  }
  CHECK(std::abs(meeting_mean(walk(GraphSpec::complete(4))) - 9.0 / 8.0) < 1e-10);
  CHECK(std::abs(meeting_mean(walk(GraphSpec::cycle(3))) - 2.0 / 3.0) < 1e-10);

  const auto q2 = product_chain(k2, 2);
  const auto diag = TargetSet::diagonal(2);
  CHECK(mean_hitting_time(q2, diag, ProbabilityVector::point_mass(4, 0)) == 0.0);
  CHECK(mean_hitting_time(q2, diag, ProbabilityVector::point_mass(4, 1)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hitting times satisfy the first-step equations") {
  Philox rng(21, 0);
  const auto q = coalesce::test::random_chain(8, rng);
  const auto a = TargetSet::from_states(8, std::vector<State>{2, 5});
  const auto u = hitting_times(q, a);
  for (State x = 0; x < 8; ++x) {
    if (a.contains(x)) {
      CHECK(u[x] == 0.0);
      continue;
    }
    // exit(x) u(x) - sum_y q(x,y) u(y) = 1.
    double lhs = q.exit_rate(x) * u[x];
    for (std::size_t e = 0; e < q.targets(x).size(); ++e) lhs -= q.rates(x)[e] * u[q.targets(x)[e]];
    CHECK(std::abs(lhs - 1.0) <= 1e-10);
    CHECK(u[x] >= 0.0);
  }
}

TEST_CASE("survival closed forms") {
  const auto k2 = walk(GraphSpec::complete(2));
  const auto q2 = product_chain(k2, 2);
  const auto apart = survival(q2, TargetSet::diagonal(2), ProbabilityVector::point_mass(4, 1));
  for (double t : {0.0, 0.1, 0.5, 2.0, 7.0}) CHECK(std::abs(apart(t) - std::exp(-2.0 * t)) < 1e-11);
  CHECK(apart(0.0) == 1.0);

  const auto q = two_state(1.0, 1.0);
  const auto exitc = survival(q, TargetSet::from_states(2, std::vector<State>{1}), ProbabilityVector::point_mass(2, 0));
  for (double t : {0.0, 0.3, 1.0, 4.0}) CHECK(std::abs(exitc(t) - std::exp(-t)) < 1e-11);

  const auto stat = survival(q2, TargetSet::diagonal(2), ProbabilityVector::uniform(4));
  CHECK(stat(0.0) == doctest::Approx(0.5));
  CHECK(std::abs(stat(1.0) - 0.5 * std::exp(-2.0)) < 1e-11);
  CHECK(stat.mean() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("survival integrates to the mean and is monotone") {
  const auto q = product_chain(walk(GraphSpec::cycle(5)), 2);
  const auto pi = stationary_distribution(q);
  const auto curve = survival(q, TargetSet::diagonal(5), pi);
  const double m = curve.mean();
  CHECK(m == doctest::Approx(mean_hitting_time(q, TargetSet::diagonal(5), pi)).epsilon(1e-12));
  CHECK(std::abs(curve.integral(60.0 * m) - m) <= 1e-6 * m);
  double prev = curve(0.0);
  for (int i = 1; i <= 200; ++i) {
    const double s = curve(0.05 * m * i);
    CHECK(s <= prev + 1e-15);
    prev = s;
  }
  const auto expo = exponential_curve(3.0);
  CHECK(expo.integral(2.0) == doctest::Approx(3.0 * (1.0 - std::exp(-2.0 / 3.0))).epsilon(1e-12));
  CHECK(expo.mean() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("quantiles") {
  const double m = 2.0;
  const auto expo = exponential_curve(m);
  const auto r = quantile(expo, 0.1);
  CHECK(r.t_eps == doctest::Approx(-m * std::log(0.9)).epsilon(1e-10));
  CHECK(r.t_eps == doctest::Approx(m * 0.10536).epsilon(1e-4));
  CHECK(std::abs(r.cdf_at_t_eps - 0.1) <= 1e-8);
  CHECK(r.deviation == doctest::Approx(std::abs(0.1 / -std::log(0.9) - 1.0)).epsilon(1e-8));
  CHECK(quantile(expo, 1e-4).deviation < 1e-4);
  CHECK(quantile(expo, 1e-4).deviation < quantile(expo, 1e-2).deviation);

  // Stationary start on the torus pair chain, conditioned off the diagonal.
  const auto base = walk(GraphSpec::torus(2, 4));
  const auto q = product_chain(base, 2);
  std::vector<double> start(q.size(), 0.0);
  for (State s = 0; s < q.size(); ++s) {
    const auto c = product_coordinates(s, 16, 2);
    if (c[0] != c[1]) start[s] = 1.0;
  }
  const auto curve = survival(q, TargetSet::diagonal(16), ProbabilityVector::normalized(start));
  // Reference from a dense matrix-exponential evaluation of the killed generator.
  const auto torus = quantile(curve, 0.05);
  CHECK(torus.t_eps == doctest::Approx(0.4077905370925631).epsilon(1e-8));
  CHECK(torus.mean == doctest::Approx(9.155555555555555).epsilon(1e-10));
  CHECK(torus.deviation == doctest::Approx(0.12258067840811182).epsilon(1e-6));

  CHECK_THROWS_AS(quantile(expo, 0.0), std::invalid_argument);
  const auto stat = survival(q, TargetSet::diagonal(16), tensor_power(stationary_distribution(base), 2));
  CHECK_THROWS_AS(quantile(stat, 0.05), std::invalid_argument);
}

TEST_CASE("envelope fits") {
  const double m = 1.7;
  const auto grid = envelope_grid(m);
  CHECK(grid.size() == 201);
  CHECK(grid.front() == 0.0);
  CHECK(grid[1] == doctest::Approx(1e-3 * m));
  CHECK(grid.back() == doctest::Approx(10.0 * m));

  const auto exact = envelope_fit(exponential_curve(m), m, grid);
  CHECK(exact.alpha <= 1e-12);
  CHECK(exact.beta <= 1e-12);
  CHECK(exact.certified);

  const auto slow = envelope_fit(exponential_curve(1.1 * m), m, grid);
  CHECK(slow.alpha <= 1e-9);
  CHECK(slow.beta <= 0.1 + 1e-6);
  CHECK(slow.beta >= 0.1 - 1e-6);
  CHECK(slow.certified);

  // Pair walk on K_2 from pi x pi: S(t) = exp(-2t) / 2. Against its own
  // exponential scale 1/2 the slack is pure amplitude.
  const auto k2 = product_chain(walk(GraphSpec::complete(2)), 2);
  const auto curve = survival(k2, TargetSet::diagonal(2), ProbabilityVector::uniform(4));
  const auto half = envelope_fit(curve, 0.5, envelope_grid(0.5));
  CHECK(half.alpha == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(half.beta <= 1e-12);
  CHECK(half.certified);

  // Against the mean m = 1/4 the tails differ in rate; whatever slack is
  // fitted must certify the grid and bound the W1 distance to Exp(1/4).
  const auto quarter = envelope_fit(curve, 0.25, envelope_grid(0.25));
  CHECK(quarter.certified);
  CHECK(quarter.alpha >= 0.5 - 1e-12);
  double w1 = 0.0;  // int |S - e^{-4t}| dt in closed form
  {
    // S - e^{-4t} = e^{-2t}/2 - e^{-4t} changes sign at t0 = ln(2) / 2.
    const double t0 = std::log(2.0) / 2.0;
    const auto prim = [](double t) { return -std::exp(-2.0 * t) / 4.0 + std::exp(-4.0 * t) / 4.0; };
    w1 = std::abs(prim(t0) - prim(0.0)) + std::abs(0.0 - prim(t0));
  }
  CHECK(w1 <= envelope_w1_bound(quarter.envelope()) + 1e-12);

  const auto inside = envelope_fit(grid, std::vector<double>(grid.size(), 0.0), m);
  CHECK_FALSE(inside.applicable);
  CHECK(inside.alpha == 1.0);
  CHECK(inside.certified);
}

TEST_CASE("envelope w1 bound") {
  CHECK(envelope_w1_bound({1.0, 0.0, 0.0}) == 0.0);
  CHECK(envelope_w1_bound({2.0, 0.1, 0.05}) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(envelope_w1_bound({0.25, 0.5, 0.0}) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_THROWS_AS(envelope_w1_bound({1.0, 0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("pair meeting bound") {
  const auto k4 = walk(GraphSpec::complete(4));
  const auto lam = ProbabilityVector::point_mass(4, 2);
  const auto at0 = pair_meeting_bound_check(k4, lam, 0.0);
  CHECK(at0.exact == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(at0.bound == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_FALSE(at0.violated);

  const auto at1 = pair_meeting_bound_check(k4, lam, 1.0, 20000, 5);
  CHECK(at1.bound == doctest::Approx(0.75));
  CHECK(at1.exact <= 0.75);
  CHECK_FALSE(at1.violated);
  REQUIRE(at1.mc_estimate.has_value());
  CHECK(std::abs(*at1.mc_estimate - at1.exact) <= 4.0 * *at1.mc_standard_error);

  const auto q = two_state(1.0, 2.0);
  const auto pi = stationary_distribution(q);
  const auto asym = pair_meeting_bound_check(q, pi, 0.5);
  CHECK(asym.bound == doctest::Approx((1.0 + 2.0 * 0.5 * 2.0) * (2.0 / 3.0)));
  CHECK(asym.exact <= asym.bound);
  const auto at0a = pair_meeting_bound_check(q, pi, 0.0);
  CHECK(at0a.exact == doctest::Approx(pi[0] * pi[0] + pi[1] * pi[1]).epsilon(1e-12));
}

TEST_CASE("joint hit probability matches inclusion-exclusion") {
  Philox rng(17, 2);
  const auto q = coalesce::test::random_chain(9, rng);
  const auto start = coalesce::test::random_law(9, rng);
  const auto a = TargetSet::from_states(9, std::vector<State>{1, 4});
  const auto b = TargetSet::from_states(9, std::vector<State>{4, 7, 8});
  for (double t : {0.0, 0.2, 1.0, 5.0}) {
    const double fa = survival(q, a, start).cdf(t);
    const double fb = survival(q, b, start).cdf(t);
    const double fab = survival(q, a.united(b), start).cdf(t);
    CHECK(std::abs(joint_hit_probability(q, a, b, start, t) - (fa + fb - fab)) < 1e-10);
  }
}

TEST_CASE("meeting correlations") {
  const auto k4 = walk(GraphSpec::complete(4));
  const auto r = meeting_correlation(k4, 3, 0.1);
  CHECK(r.exact);
  CHECK(r.ell == 3);
  CHECK(r.terms.size() == 3);
  CHECK(r.mean_spread <= 1e-10);
  CHECK(r.m == doctest::Approx(9.0 / 8.0).epsilon(1e-10));
  for (const auto& t : r.terms) {
    CHECK(t.joint <= std::min(t.marginal_first, t.marginal_second) + 1e-12);
    CHECK(t.marginal_first == doctest::Approx(*r.pair_marginal).epsilon(1e-9));
    CHECK(t.joint <= *r.transitive_bound + 1e-9);
  }
  CHECK(r.xi >= 0.0);

  // Disjoint walker pairs are independent.
  const auto r4 = meeting_correlation(k4, 4, 0.1);
  for (const auto& t : r4.terms) {
    const auto [i, j] = r4.pairs[t.first];
    const auto [l, s] = r4.pairs[t.second];
    if (i != l && i != s && j != l && j != s) {
      CHECK(std::abs(t.joint - t.marginal_first * t.marginal_second) < 1e-9);
    }
  }

  MeetingCorrelationOptions mc;
  mc.mode = CorrelationMode::MonteCarlo;
  mc.samples = 40000;
  mc.seed = 3;
  const auto est = meeting_correlation(k4, 3, 0.1, mc);
  CHECK_FALSE(est.exact);
  REQUIRE(est.xi_standard_error.has_value());
  CHECK(std::abs(est.xi - r.xi) <= 4.0 * *est.xi_standard_error + 1e-12);
}

TEST_CASE("xi for independent coordinates") {
  // Three independent copies of a chain that rarely visits state 1.
  const auto base = two_state(0.001, 1.0);
  const auto q = product_chain(base, 3);
  const auto pi = stationary_distribution(q);
  std::vector<TargetSet> targets;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<char> mask(8, 0);
    for (State s = 0; s < 8; ++s) mask[s] = product_coordinates(s, 2, 3)[i] == 1 ? 1 : 0;
    targets.push_back(TargetSet::from_mask(mask));
  }
  for (double eps : {0.05, 0.1}) {
    const auto r = correlation_xi(q, targets, pi, eps);
    CHECK(r.mean_spread <= 1e-10);
    for (const auto& t : r.terms) CHECK(std::abs(t.joint - t.marginal_first * t.marginal_second) < 1e-9);
    CHECK(r.xi <= 2.0 * eps * 3.0);
  }
}

TEST_CASE("three-walker meeting on K_6") {
  // Distinct triples meet at total rate 3 * 2/5; P(distinct) = 5/9 from pi^3.
  const auto q = walk(GraphSpec::complete(6));
  const auto pi3 = tensor_power(stationary_distribution(q), 3);
  const double e = mean_hitting_time(product_chain(q, 3), TargetSet::any_pair_diagonal(6, 3), pi3);
  CHECK(std::abs(e - 25.0 / 54.0) < 1e-12);
  CHECK(std::abs(e / (meeting_mean(q) / 3.0) - 2.0 / 3.0) < 1e-12);
}
