#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "greedyreg/ormodels.hpp"
#include "greedyreg/rng.hpp"

using namespace greedyreg;
using orm::Arr;

namespace {

Arr arr1(double a) {
  Arr v(1);
  v << a;
  return v;
}

Arr arr2(double a, double b) {
  Arr v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("inventory step map") {
  CHECK(orm::inventory_step(arr1(0.3), arr1(0.5), arr1(0.2), arr1(0.6))[0] ==
        doctest::Approx(0.4).epsilon(1e-14));
  CHECK(orm::inventory_step(arr1(0.3), arr1(0.5), arr1(0.0), arr1(0.6))[0] ==
        doctest::Approx(0.6).epsilon(1e-14));
  CHECK(orm::inventory_step(arr1(0.3), arr1(0.1), arr1(0.9), arr1(0.6))[0] == 0.0);

  auto two = orm::inventory_step(arr2(0.3, 0.1), arr2(0.5, 0.0), arr2(0.2, 0.05), arr2(0.6, 1.0));
  CHECK(two[0] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(two[1] == doctest::Approx(0.05).epsilon(1e-14));

  CHECK_THROWS_AS(orm::inventory_step(arr1(-0.1), arr1(0.2), arr1(0.1), arr1(1.0)), ContractError);
  CHECK_THROWS_AS(orm::inventory_step(arr2(0.1, 0.1), arr1(0.2), arr1(0.1), arr1(1.0)),
                  ContractError);
}

TEST_CASE("workload step map") {
  CHECK(orm::workload_step(arr1(0.4), arr1(0.3), arr1(0.1), arr1(0.6))[0] ==
        doctest::Approx(0.6).epsilon(1e-14));
  CHECK(orm::workload_step(arr1(0.4), arr1(0.0), arr1(0.9), arr1(0.6))[0] == 0.0);
  CHECK(orm::workload_step(arr1(0.2), arr1(0.1), arr1(0.0), arr1(0.6))[0] ==
        doctest::Approx(0.3).epsilon(1e-14));
  CHECK_THROWS_AS(orm::workload_step(arr1(0.2), arr1(-0.1), arr1(0.0), arr1(0.6)), ContractError);
}

TEST_CASE("step maps never leave the capacity box") {
  Rng rng(33);
  for (int i = 0; i < 100000; ++i) {
    const double b = 0.25 + rng.uniform();
    const double x = rng.uniform(0.0, b);
    const double a = rng.uniform(0.0, b);
    const double d = rng.uniform(0.0, 2.0);
    const double inv = orm::inventory_step(arr1(x), arr1(a), arr1(d), arr1(b))[0];
    CHECK(inv >= 0.0);
    CHECK(inv <= b);
    const double wl = orm::workload_step(arr1(x), arr1(d), arr1(a), arr1(b))[0];
    CHECK(wl >= 0.0);
    CHECK(wl <= b);
  }
}

TEST_CASE("lost-sales evaluators agree with the direct sample walk") {
  orm::LostSalesParams prm;
  auto model = orm::make_lost_sales_model(prm);
  model.validate();
  auto sample = orm::sample_uniform_demand(prm, 37, 5);

  fitq::ValueGrid g;
  g.nodes = Eigen::ArrayXd::LinSpaced(9, 0.0, prm.capacity);
  g.values = (3.0 * g.nodes).sin() + 0.5 * g.nodes;

  auto direct = fitq::make_direct_evaluator(model, sample);
  auto fast = orm::make_lost_sales_evaluator(prm, sample);
  Rng rng(6);
  for (int k = 0; k < 200; ++k) {
    const double x = rng.uniform(0.0, prm.capacity);
    const double a = rng.uniform(0.0, prm.capacity);
    CHECK(std::abs(direct(x, a, g) - fast(x, a, g)) <= 1e-9);
  }
}

TEST_CASE("population evaluator matches a fine stratified sample") {
  orm::LostSalesParams prm;
  auto model = orm::make_lost_sales_model(prm);
  const std::size_t big_n = 20000;
  std::vector<double> strat(big_n);
  for (std::size_t i = 0; i < big_n; ++i)
    strat[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(big_n) * prm.capacity;

  fitq::ValueGrid g;
  g.nodes = Eigen::ArrayXd::LinSpaced(9, 0.0, prm.capacity);
  g.values = (2.0 * g.nodes).cos() + g.nodes;

  auto pop = orm::make_lost_sales_uniform_evaluator(prm);
  auto dense = orm::make_lost_sales_evaluator(prm, strat);
  Rng rng(9);
  for (int k = 0; k < 50; ++k) {
    const double x = rng.uniform(0.0, prm.capacity);
    const double a = rng.uniform(0.0, prm.capacity);
    CHECK(std::abs(pop(x, a, g) - dense(x, a, g)) <= 1e-5);
  }
}

TEST_CASE("population evaluator reproduces the hand integral for a linear value") {
  orm::LostSalesParams prm;  // capacity 1, price 1, order 0.25, holding 0.1, gamma 0.5
  fitq::ValueGrid g;
  g.nodes = Eigen::ArrayXd::LinSpaced(2, 0.0, 1.0);
  g.values = g.nodes;  // V(t) = t
  auto pop = orm::make_lost_sales_uniform_evaluator(prm);
  const double x = 0.3, a = 0.4, u = 0.7;
  const double expected = prm.price * (u - u * u / 2.0) - prm.order_cost * a -
                          prm.holding_cost * (u * u / 2.0) + prm.gamma * (u * u / 2.0);
  CHECK(pop(x, a, g) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("uniform demand draws are deterministic and in range") {
  orm::LostSalesParams prm;
  auto a = orm::sample_uniform_demand(prm, 500, 11);
  auto b = orm::sample_uniform_demand(prm, 500, 11);
  CHECK(a == b);
  for (double w : a) {
    CHECK(w >= 0.0);
    CHECK(w <= prm.capacity);
  }
  CHECK(orm::sample_uniform_demand(prm, 500, 12) != a);
}

TEST_CASE("density grids evaluate, integrate, and round trip") {
  auto uni = orm::uniform_density(0.0, 1.0, 10);
  uni.validate();
  CHECK(uni.eval1(0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(uni.eval1(-0.1) == 0.0);
  CHECK(uni.eval1(1.1) == 0.0);
  CHECK(uni.mass() == doctest::Approx(1.0).epsilon(1e-10));

  auto gau = orm::gaussian_density(0.0, 1.0, 6.0, 800);
  CHECK(gau.mass() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(gau.eval1(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-4));

  auto atom = orm::atom_spike_density(0.0, 1.0, 100, 0.5, 0.5);
  CHECK(atom.mass() == doctest::Approx(1.0).epsilon(1e-3));

  auto scaled = uni;
  scaled.values *= 3.0;
  CHECK(scaled.mass() == doctest::Approx(3.0).epsilon(1e-9));
  scaled.normalize();
  CHECK(scaled.mass() == doctest::Approx(1.0).epsilon(1e-9));

  auto corr = orm::correlated_square_density(12);
  corr.validate();
  CHECK(corr.dim == 2);
  CHECK(corr.mass() == doctest::Approx(1.0).epsilon(1e-9));
  // Normalization rescales the plateau below the raw value 2; the interior
  // stays flat, so nearby band points agree exactly.
  CHECK(corr.eval2(0.5, 0.5) > 1.6);
  CHECK(corr.eval2(0.5, 0.5) < 2.0 + 1e-12);
  CHECK(corr.eval2(0.5, 0.45) == doctest::Approx(corr.eval2(0.5, 0.5)).epsilon(1e-12));
  CHECK(corr.eval2(0.5, 0.05) == 0.0);
  CHECK(corr.eval2(1.5, 0.5) == 0.0);

  const std::string path = "/tmp/greedyreg_test_density.csv";
  gau.save_csv(path);
  auto back = orm::DensityGrid::load_csv(path);
  REQUIRE(back.values.size() == gau.values.size());
  for (Eigen::Index i = 0; i < gau.values.size(); ++i) CHECK(back.values[i] == gau.values[i]);
  std::remove(path.c_str());

  auto bad = uni;
  bad.values[3] = -0.2;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("shift norm: exact uniform law, Gaussian value, symmetry") {
  auto uni = orm::uniform_density(0.0, 1.0, 400);
  CHECK(orm::tv_shift_norm(uni, arr1(0.0)) == 0.0);
  for (double h : {0.05, 0.1, 0.25, 0.4}) {
    CHECK(orm::tv_shift_norm(uni, arr1(h)) == doctest::Approx(2.0 * h).epsilon(1e-4));
    CHECK(orm::tv_shift_norm(uni, arr1(-h)) ==
          doctest::Approx(orm::tv_shift_norm(uni, arr1(h))).epsilon(1e-6));
  }

  auto gau = orm::gaussian_density(0.0, 1.0, 6.0, 1600);
  const double expect = 2.0 * (2.0 * 0.5199388058383725 - 1.0);  // two-sided mass inside h/2
  CHECK(orm::tv_shift_norm(gau, arr1(0.1)) == doctest::Approx(expect).epsilon(2e-3));
}

TEST_CASE("shift exponent fit separates regular laws from atoms") {
  const std::vector<double> hs{0.004, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4};

  auto uni = orm::uniform_density(0.0, 1.0, 200);
  auto fu = orm::fit_tv_exponent(uni, hs, arr1(1.0));
  CHECK(fu.q_bar == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(fu.ell == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(fu.regular);

  auto gau = orm::gaussian_density(0.0, 0.5, 3.0, 400);
  auto fg = orm::fit_tv_exponent(gau, hs, arr1(1.0));
  CHECK(fg.q_bar == doctest::Approx(1.0).epsilon(0.05));
  CHECK(fg.regular);

  auto atom = orm::atom_spike_density(0.0, 1.0, 200, 0.5, 0.5);
  auto fa = orm::fit_tv_exponent(atom, hs, arr1(1.0));
  CHECK_FALSE(fa.regular);
  CHECK(fa.q_bar < 0.25);

  CHECK_THROWS_AS(orm::fit_tv_exponent(uni, {0.1, 0.2}, arr1(1.0)), ContractError);
  CHECK_THROWS_AS(orm::fit_tv_exponent(uni, {0.1, 0.2, 0.3}, arr1(1.0)), ContractError);
  CHECK_THROWS_AS(orm::fit_tv_exponent(uni, hs, arr1(0.0)), ContractError);
  CHECK_THROWS_AS(orm::fit_tv_exponent(uni, hs, arr2(1.0, 0.0)), ContractError);
}

TEST_CASE("action regularity audit on the inventory transition") {
  auto uni = orm::uniform_density(0.0, 1.0, 200);
  auto res = orm::tv_action_regularity_audit(orm::TransitionKind::Inventory, uni, arr1(1.0),
                                             arr1(1.0), 2.0, 1.0, 40, 7);
  CHECK(res.pairs + res.skipped == 40);
  CHECK(res.pairs >= 30);
  // Uniform pre-clip law: the shifted L1 is exactly 2|a-a'|, so the ratio is 1.
  CHECK(res.max_ratio == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("action regularity audit on a correlated two-item law") {
  auto corr = orm::correlated_square_density(12);
  auto res = orm::tv_action_regularity_audit(orm::TransitionKind::Workload, corr, arr2(1.0, 1.0),
                                             arr2(0.5, 0.5), 8.0, 1.0, 10, 13);
  CHECK(res.pairs >= 8);
  CHECK(res.max_ratio <= 1.05);
  CHECK(res.max_ratio > 0.0);
}
