#include <doctest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "greedyreg/core.hpp"
#include "greedyreg/hard.hpp"

using namespace greedyreg;

namespace {

QSurface surface_of(std::function<double(double, double)> f) {
  QSurface q;
  q.eval = [f = std::move(f)](const Vec& x, double a) { return f(x[0], a); };
  return q;
}

Policy constant_policy(double a) {
  Policy pi;
  pi.act = [a](const Vec&) { return a; };
  return pi;
}

// One-state chain emitting a constant reward forever.
Simulator constant_reward_simulator(double c, double gamma) {
  Simulator sim;
  sim.sample_initial = [](Rng&) { return vec1(0.0); };
  sim.step = [c](const Vec& x, double, Rng&) { return std::make_pair(x, c); };
  sim.r_max = std::max(1.0, std::abs(c));
  sim.vstar_mu = [c, gamma] { return c / (1.0 - gamma); };
  return sim;
}

}  // namespace

TEST_CASE("maximize_on_interval finds interior peaks and breaks ties low") {
  auto peak = [](double a) { return -(a - 0.3) * (a - 0.3); };
  auto r = maximize_on_interval(peak, -1.0, 1.0);
  CHECK(r.arg == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-10));

  auto flat = maximize_on_interval([](double) { return 4.0; }, -1.0, 1.0);
  CHECK(flat.arg == -1.0);
  CHECK(flat.value == 4.0);

  CHECK_THROWS_AS(maximize_on_interval(peak, 1.0, 1.0), ContractError);
  CHECK_THROWS_AS(
      maximize_on_interval([](double a) { return 1.0 / (a - a); }, -1.0, 1.0),
      ContractError);
}

TEST_CASE("greedy_policy picks the surface argmax") {
  ActionInterval actions{-1.0, 1.0};

  auto quad = greedy_policy(surface_of([](double, double a) { return -(a - 0.3) * (a - 0.3); }),
                            actions);
  CHECK(quad.act(vec1(0.5)) == doctest::Approx(0.3).epsilon(1e-6));

  auto flat = greedy_policy(surface_of([](double, double) { return 2.0; }), actions);
  CHECK(flat.act(vec1(0.2)) == -1.0);

  // Kinked plug-in surface: the maximizer sits exactly at the positive kink.
  hard::PluginSurface s;
  s.family = hard::Family::Minus;
  s.p = 2.0;
  s.q = 1.0;
  s.m = 1.0;
  s.ybar = 0.4;
  s.dbar = 0.25;
  auto kinked = greedy_policy(s.as_qsurface(), actions);
  CHECK(kinked.act(vec1(0.5)) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(kinked.act(vec1(0.5)) == doctest::Approx(hard::plugin_greedy(s).act(0.5)).epsilon(1e-6));
}

TEST_CASE("greedy action ignores state-only shifts and positive scaling") {
  ActionInterval actions{-1.0, 1.0};
  auto base = [](double x, double a) { return std::sin(3.0 * a) + 0.2 * a * x; };
  auto shifted = [base](double x, double a) { return 2.5 * base(x, a) + (x * x - 3.0); };
  auto pi0 = greedy_policy(surface_of(base), actions);
  auto pi1 = greedy_policy(surface_of(shifted), actions);
  for (double x : {0.0, 0.3, 0.9}) {
    CHECK(pi0.act(vec1(x)) == doctest::Approx(pi1.act(vec1(x))).epsilon(1e-7));
  }
}

TEST_CASE("exact regret matches hand-computed values") {
  hard::HardInstance inst;
  inst.family = hard::Family::Plus;
  inst.theta = 0.5;
  inst.params = RateParams{0.9, 2.0, 1.0, 1.0};

  QSurface q = surface_of([&](double x, double a) { return hard::q_value(inst, x, a); });
  auto vs = [&](double x) { return hard::vstar(inst, x); };

  // Always playing a = 1 forfeits the bonus below d = 1/4.
  QuadratureSpec spec;
  spec.breakpoints = {inst.d_theta()};
  auto r = regret_exact(q, vs, constant_policy(1.0), spec);
  CHECK(r.value == doctest::Approx(3.0 / 32.0).epsilon(1e-8));
  CHECK(r.method == "exact-quadrature");

  // The oracle rule is exactly optimal.
  hard::GreedyRule oracle;
  oracle.family = hard::Family::Plus;
  oracle.ybar = inst.theta;
  oracle.dbar = inst.d_theta();
  oracle.m = inst.params.m;
  CHECK(std::abs(hard::regret_exact_hard(inst, oracle)) <= 1e-10);

  hard::HardInstance zero;
  zero.family = hard::Family::Minus;
  zero.theta = 0.0;
  zero.params = inst.params;
  hard::GreedyRule center;
  center.family = hard::Family::Minus;
  center.ybar = 0.0;
  center.dbar = 0.0;
  CHECK(std::abs(hard::regret_exact_hard(zero, center)) <= 1e-10);
}

TEST_CASE("regret is never negative") {
  hard::HardInstance inst;
  inst.family = hard::Family::Plus;
  inst.theta = 0.7;
  inst.params = RateParams{0.9, 2.0, 1.0, 2.0};
  QSurface q = surface_of([&](double x, double a) { return hard::q_value(inst, x, a); });
  auto vs = [&](double x) { return hard::vstar(inst, x); };
  QuadratureSpec spec;
  spec.breakpoints = {inst.d_theta()};

  for (double w : {-0.9, -0.2, 0.4, 1.0}) {
    Policy pi;
    pi.act = [w](const Vec& x) { return std::cos(7.0 * x[0]) * w; };
    CHECK(regret_exact(q, vs, pi, spec).value >= -1e-9);
  }
}

TEST_CASE("Monte Carlo regret agrees with quadrature") {
  hard::HardInstance inst;
  inst.family = hard::Family::Plus;
  inst.theta = 0.5;
  inst.params = RateParams{0.9, 2.0, 1.0, 1.0};
  auto sim = hard::make_simulator(inst);

  auto mc = regret_monte_carlo(sim, constant_policy(1.0), inst.params.gamma, 4000, 11);
  CHECK(mc.method == "monte-carlo");
  CHECK(std::abs(mc.value - 3.0 / 32.0) <= 3.0 * mc.std_error + 1e-6);

  // Deterministic rewards at theta = 1: the optimal rule nulls the regret.
  hard::HardInstance sure = inst;
  sure.theta = 1.0;
  hard::GreedyRule oracle;
  oracle.family = hard::Family::Plus;
  oracle.ybar = 1.0;
  oracle.dbar = sure.d_theta();
  oracle.m = 1.0;
  auto mc1 = regret_monte_carlo(hard::make_simulator(sure), oracle.as_policy(),
                                sure.params.gamma, 4000, 12);
  CHECK(std::abs(mc1.value) <= 3.0 * mc1.std_error + 1e-9);
}

TEST_CASE("Monte Carlo return of a constant-reward chain is the geometric series") {
  auto sim = constant_reward_simulator(0.7, 0.9);
  auto r = regret_monte_carlo(sim, constant_policy(0.0), 0.9, 50, 5);
  CHECK(std::abs(r.value) <= 1e-6);
  CHECK(r.std_error <= 1e-12);
}

TEST_CASE("Monte Carlo standard error halves when paths quadruple") {
  hard::HardInstance inst;
  inst.family = hard::Family::Plus;
  inst.theta = 0.3;
  inst.params = RateParams{0.9, 2.0, 1.0, 1.0};
  auto sim = hard::make_simulator(inst);
  auto pi = constant_policy(0.2);
  auto lo = regret_monte_carlo(sim, pi, inst.params.gamma, 2000, 21);
  auto hi = regret_monte_carlo(sim, pi, inst.params.gamma, 8000, 21);
  const double ratio = hi.std_error / lo.std_error;
  CHECK(ratio > 0.5 * 0.7);
  CHECK(ratio < 0.5 * 1.3);
}

TEST_CASE("Monte Carlo regret does not depend on the worker count") {
  hard::HardInstance inst;
  inst.family = hard::Family::Minus;
  inst.theta = 0.25;
  inst.params = RateParams{0.9, 2.0, 1.0, 1.0};
  auto sim = hard::make_simulator(inst);
  auto pi = constant_policy(0.1);
  auto a = regret_monte_carlo(sim, pi, inst.params.gamma, 3000, 9, 1e-8, 1);
  auto b = regret_monte_carlo(sim, pi, inst.params.gamma, 3000, 9, 1e-8, 3);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("performance difference residual vanishes on a zero-reward chain") {
  Simulator sim = constant_reward_simulator(0.0, 0.9);
  auto pd = performance_difference_residual(
      sim, constant_policy(0.0), [](double) { return 0.0; },
      OccupancySpec{OccupancySpec::Kind::Empirical, 2.0}, 0.9, 200, 3);
  CHECK(pd.residual <= 1e-12);
}

TEST_CASE("performance difference closes under the exact absorbing occupancy") {
  hard::HardInstance inst;
  inst.family = hard::Family::Plus;
  inst.theta = 0.5;
  inst.params = RateParams{0.9, 2.0, 1.0, 1.0};
  auto sim = hard::make_simulator(inst);
  Policy pi = constant_policy(1.0);
  auto gap = [&](double x) { return hard::vstar(inst, x) - hard::q_value(inst, x, 1.0); };
  auto pd = performance_difference_residual(
      sim, pi, gap, OccupancySpec{OccupancySpec::Kind::AbsorbingExact, hard::kAbsorbingState},
      inst.params.gamma, 20000, 17);
  CHECK(pd.residual <= 3.0 * pd.std_error + 1e-6);
}

TEST_CASE("least squares recovers an exact line") {
  std::vector<double> xs{0.0, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(2.0 - 0.75 * x);
  auto fit = ols_fit(xs, ys);
  CHECK(fit.slope == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.slope_stderr <= 1e-10);
  CHECK(fit.n == 5);
}

TEST_CASE("mean, standard error, confidence width") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  auto ms = mean_and_se(xs);
  CHECK(ms.mean == doctest::Approx(2.5));
  CHECK(ms.std_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(ci95_halfwidth(1.0) == doctest::Approx(1.959963984540054));
}

TEST_CASE("parallel map writes the same slots for any worker count") {
  std::vector<double> one(257), three(257);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      Rng rng(derive_seed(42, 7, i));
      out[i] = rng.uniform();
    };
  };
  parallel_for_indexed(one.size(), 1, fill(one));
  parallel_for_indexed(three.size(), 3, fill(three));
  CHECK(one == three);
}

TEST_CASE("seed derivation separates streams") {
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2, 0) != derive_seed(1, 2, 1));
  CHECK(derive_seed(1, 2, 5) == derive_seed(1, 2, 5));
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(7);
  for (int i = 0; i < 50; ++i) {
    const double v = c.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
    CHECK(c.uniform_index(10) < 10);
  }
  Rng d(8);
  CHECK(d.sign_pm(1.0) == 1.0);
  CHECK(d.sign_pm(0.0) == -1.0);
}

TEST_CASE("rollout horizon covers the discounted tail") {
  const int T = rollout_horizon(0.9, 1.0, 1e-8);
  CHECK(T >= 150);
  CHECK(std::pow(0.9, T) / (1.0 - 0.9) <= 1e-8);
  CHECK(rollout_horizon(0.0, 1.0, 1e-8) >= 1);
}
