#include "greedyreg/core.hpp"

#include <atomic>
#include <thread>

namespace greedyreg {

Policy greedy_policy(const QSurface& q, const ActionInterval& actions, const MaximizeOptions& opt) {
  actions.validate();
  if (!q.eval) throw ContractError("greedy_policy: empty Q surface");
  Policy pi;
  pi.tie_break = "smallest-action";
  pi.act = [q, actions, opt](const Vec& x) {
    auto f = [&](double a) { return q.eval(x, a); };
    return maximize_on_interval(f, actions.lo, actions.hi, opt).arg;
  };
  return pi;
}

RegretValue regret_exact(const QSurface& q, const std::function<double(double)>& vstar,
                         const Policy& policy, const QuadratureSpec& spec) {
  if (!q.eval || !vstar || !policy.act) throw ContractError("regret_exact: missing callable");
  QuadratureSpec full = spec;
  for (double b : policy.state_breakpoints) full.breakpoints.push_back(b);
  auto gap = [&](double x) {
    const Vec xs = vec1(x);
    const double a = policy.act(xs);
    return vstar(x) - q.eval(xs, a);
  };
  const QuadResult r = integrate_adaptive(gap, 0.0, 1.0, full);
  if (r.err_estimate > full.abs_tol)
    throw NumericError("regret_exact: quadrature did not converge", r.err_estimate);
  return {r.value, "exact-quadrature", 0.0};
}

int rollout_horizon(double gamma, double r_max, double eps) {
  if (!(r_max > 0.0) || !std::isfinite(r_max))
    throw ContractError("rollout_horizon: reward bound unknown or invalid");
  if (!(eps > 0.0)) throw ContractError("rollout_horizon: eps > 0");
  if (gamma == 0.0) return 1;
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("rollout_horizon: gamma in [0,1)");
  const double t = std::log(eps * (1.0 - gamma) / r_max) / std::log(gamma);
  return std::max(1, static_cast<int>(std::ceil(t)));
}

namespace {

// One discounted rollout; also accumulates sum_t gamma^t * gap(x_t) when a
// gap function is supplied (performance-difference bookkeeping).
double rollout_return(const Simulator& sim, const Policy& policy, double gamma, int horizon,
                      Rng& rng, const std::function<double(double)>* gap, double* gap_sum) {
  Vec x = sim.sample_initial(rng);
  double ret = 0.0, disc = 1.0, gs = 0.0;
  for (int t = 0; t < horizon; ++t) {
    if (gap) gs += disc * (*gap)(x[0]);
    const double a = policy.act(x);
    auto [nx, r] = sim.step(x, a, rng);
    ret += disc * r;
    disc *= gamma;
    x = nx;
  }
  if (gap_sum) *gap_sum = gs;
  return ret;
}

}  // namespace

RegretValue regret_monte_carlo(const Simulator& sim, const Policy& policy, double gamma,
                               int n_paths, std::uint64_t seed, double eps, int workers) {
  if (!sim.sample_initial || !sim.step || !sim.vstar_mu)
    throw ContractError("regret_monte_carlo: incomplete simulator");
  if (n_paths < 2) throw ContractError("regret_monte_carlo: need n_paths >= 2");
  const int horizon = rollout_horizon(gamma, sim.r_max, eps);
  std::vector<double> returns(static_cast<std::size_t>(n_paths));
  parallel_for_indexed(static_cast<std::size_t>(n_paths), workers, [&](std::size_t i) {
    Rng rng(derive_seed(seed, 0x70617468ULL, i));
    returns[i] = rollout_return(sim, policy, gamma, horizon, rng, nullptr, nullptr);
  });
  const MeanSe st = mean_and_se(returns);
  return {sim.vstar_mu() - st.mean, "monte-carlo", st.std_error};
}

PdResidual performance_difference_residual(const Simulator& sim, const Policy& policy,
                                           const std::function<double(double)>& gap,
                                           const OccupancySpec& occupancy, double gamma,
                                           int n_paths, std::uint64_t seed, double eps) {
  if (!gap) throw ContractError("performance_difference_residual: missing gap function");
  if (n_paths < 2) throw ContractError("performance_difference_residual: need n_paths >= 2");
  const int horizon = rollout_horizon(gamma, sim.r_max, eps);
  const double vstar_mu = sim.vstar_mu();

  if (occupancy.kind == OccupancySpec::Kind::AbsorbingExact) {
    // Occupancy (1-gamma)*mu + gamma*delta_abs makes the identity collapse to
    // the one-stage integral of the gap under mu (the absorbing state has
    // zero gap), which regret_exact-style quadrature evaluates directly.
    QuadratureSpec spec;
    for (double b : policy.state_breakpoints) spec.breakpoints.push_back(b);
    const QuadResult r = integrate_adaptive([&](double x) { return gap(x); }, 0.0, 1.0, spec);
    std::vector<double> returns(static_cast<std::size_t>(n_paths));
    for (std::size_t i = 0; i < returns.size(); ++i) {
      Rng rng(derive_seed(seed, 0x70617468ULL, i));
      returns[i] = rollout_return(sim, policy, gamma, horizon, rng, nullptr, nullptr);
    }
    const MeanSe st = mean_and_se(returns);
    const double mc_regret = vstar_mu - st.mean;
    return {std::abs(mc_regret - r.value), st.std_error};
  }

  // Empirical occupancy from the same paths: per-path statistic
  //   s_i = discounted return + discounted gap sum
  // has expectation vstar_mu when the identity holds, so the residual is
  // |vstar_mu - mean(s)| with the per-path standard error.
  std::vector<double> stats(static_cast<std::size_t>(n_paths));
  for (std::size_t i = 0; i < stats.size(); ++i) {
    Rng rng(derive_seed(seed, 0x70617468ULL, i));
    double gs = 0.0;
    const double ret = rollout_return(sim, policy, gamma, horizon, rng, &gap, &gs);
    stats[i] = ret + gs;
  }
  const MeanSe st = mean_and_se(stats);
  return {std::abs(vstar_mu - st.mean), st.std_error};
}

OlsFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ContractError("ols_fit: size mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw ContractError("ols_fit: need >= 2 points");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractError("ols_fit: degenerate abscissae");
  OlsFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - fit.intercept - fit.slope * xs[i];
      rss += r * r;
    }
    fit.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

MeanSe mean_and_se(const std::vector<double>& xs) {
  if (xs.empty()) throw ContractError("mean_and_se: empty sample");
  const double n = static_cast<double>(xs.size());
  const double mean = pairwise_sum(xs) / n;
  if (xs.size() == 1) return {mean, 0.0, 1};
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(var / n), xs.size()};
}

void parallel_for_indexed(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  auto run = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
}

}  // namespace greedyreg
