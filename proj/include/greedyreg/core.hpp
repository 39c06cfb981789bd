#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "greedyreg/errors.hpp"
#include "greedyreg/quadrature.hpp"
#include "greedyreg/rng.hpp"

namespace greedyreg {

using Vec = Eigen::VectorXd;

inline Vec vec1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

// Compact action interval [lo, hi]; multi-dimensional boxes are handled as
// per-coordinate intervals by the modules that need them.
struct ActionInterval {
  double lo = -1.0;
  double hi = 1.0;
  void validate() const {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw ContractError("ActionInterval: need finite lo < hi");
  }
  double clamp(double a) const { return std::min(hi, std::max(lo, a)); }
  double width() const { return hi - lo; }
};

// Problem constants shared across instances: discount and the three
// smoothness/geometry exponents.
struct RateParams {
  double gamma = 0.9;
  double p = 2.0;
  double q = 1.0;
  double m = 1.0;
  void validate() const {
    if (!(gamma >= 0.0) || !(gamma < 1.0)) throw ContractError("RateParams: gamma in [0,1)");
    if (!(p > 0.0)) throw ContractError("RateParams: p > 0");
    if (!(q >= 0.0) || !(q <= 1.0)) throw ContractError("RateParams: q in [0,1]");
    if (!(m > 0.0)) throw ContractError("RateParams: m > 0");
  }
};

enum class QForm { ClosedFormPlus, ClosedFormMinus, GridBacked, Other };

// State-action value surface.  States are real vectors (dimension 1 in all
// desk experiments), actions are scalars from an ActionInterval.
struct QSurface {
  std::function<double(const Vec&, double)> eval;
  QForm form = QForm::Other;
};

// Measurable decision rule.  state_breakpoints are optional hints for exact
// quadrature: 1-d state abscissae where the rule may switch branches.
struct Policy {
  std::function<double(const Vec&)> act;
  std::string tie_break = "smallest-action";
  std::vector<double> state_breakpoints;
};

struct RegretValue {
  double value = 0.0;
  std::string method;  // "exact-quadrature" or "monte-carlo"
  double std_error = 0.0;
};

// Estimator quality envelopes: sup-error delta and action-Holder envelope
// lambda at exponent q (shared by the closed-form and fitted estimators).
struct EnvelopePair {
  double delta = 0.0;
  double lambda = 0.0;
  double q = 0.0;
};

// ---------------------------------------------------------------------------
// Continuous-action argmax

struct MaximizeOptions {
  int coarse_n = 257;      // uniform evaluation lattice size
  double refine_tol = 1e-10;  // value slack defining near-ties
  int refine_iters = 120;
};

struct MaxResult {
  double arg = 0.0;
  double value = 0.0;
};

// Maximize f over [lo,hi]: coarse uniform lattice, smallest-action near-tie
// resolution, then ternary refinement on the bracketing sub-interval.  The
// returned value is always >= (lattice max) - refine_tol.
template <class F>
MaxResult maximize_on_interval(F&& f, double lo, double hi, const MaximizeOptions& opt = {}) {
  if (!(lo < hi)) throw ContractError("maximize_on_interval: need lo < hi");
  const int n = std::max(2, opt.coarse_n);
  double best_val = -std::numeric_limits<double>::infinity();
  int best_i = 0;
  std::vector<double> vals(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    const double v = f(a);
    if (!std::isfinite(v))
      throw ContractError("maximize_on_interval: non-finite objective at a=" + std::to_string(a));
    vals[static_cast<std::size_t>(i)] = v;
    if (v > best_val) {
      best_val = v;
      best_i = i;
    }
  }
  // Smallest action among near-ties of the lattice maximum.
  int pick = best_i;
  for (int i = 0; i < n; ++i) {
    if (vals[static_cast<std::size_t>(i)] >= best_val - opt.refine_tol) {
      pick = i;
      break;
    }
  }
  const double step = (hi - lo) / (n - 1);
  double a_lo = std::max(lo, lo + step * (pick - 1));
  double a_hi = std::min(hi, lo + step * (pick + 1));
  double arg = lo + step * pick;
  double val = vals[static_cast<std::size_t>(pick)];
  // Ternary refinement inside the bracket; only ever improves the value.
  for (int it = 0; it < opt.refine_iters && (a_hi - a_lo) > 1e-15 * (hi - lo); ++it) {
    const double m1 = a_lo + (a_hi - a_lo) / 3.0;
    const double m2 = a_hi - (a_hi - a_lo) / 3.0;
    const double f1 = f(m1), f2 = f(m2);
    if (f1 > val) { val = f1; arg = m1; }
    if (f2 > val) { val = f2; arg = m2; }
    if (f1 < f2) a_lo = m1; else a_hi = m2;
  }
  // Refinement may climb a local bump only; fall back to the lattice pick if
  // it somehow regressed (flat or adversarial surfaces).
  if (val < vals[static_cast<std::size_t>(pick)]) {
    arg = lo + step * pick;
    val = vals[static_cast<std::size_t>(pick)];
  }
  return {arg, val};
}

// Greedy decision rule for a Q surface over an action interval.
Policy greedy_policy(const QSurface& q, const ActionInterval& actions, const MaximizeOptions& opt = {});

// ---------------------------------------------------------------------------
// Regret

// Exact one-stage regret under a uniform initial law on [0,1]:
//   integral of vstar(x) - q(x, policy(x)) dx
// by adaptive panels split at the supplied breakpoints plus the policy's own
// advertised switch points.  Throws NumericError if the achieved error
// estimate exceeds the tolerance.
RegretValue regret_exact(const QSurface& q, const std::function<double(double)>& vstar,
                         const Policy& policy, const QuadratureSpec& spec = {});

// Forward simulator for Monte Carlo evaluation: sample_initial draws x0, step
// returns (next state, reward).  vstar_mu must give the optimal value of the
// initial law (closed form or external quadrature).
struct Simulator {
  std::function<Vec(Rng&)> sample_initial;
  std::function<std::pair<Vec, double>(const Vec&, double, Rng&)> step;
  double r_max = std::numeric_limits<double>::quiet_NaN();
  std::function<double()> vstar_mu;
};

// Horizon for truncating discounted rollouts so the tail is below eps.
int rollout_horizon(double gamma, double r_max, double eps);

// Monte Carlo regret vstar_mu - mean discounted return, with per-path streams
// derived from (seed, path index) so results are independent of scheduling.
RegretValue regret_monte_carlo(const Simulator& sim, const Policy& policy, double gamma,
                               int n_paths, std::uint64_t seed, double eps = 1e-8,
                               int workers = 1);

// Occupancy specification for the performance-difference check: either the
// exact absorbing-family form (1-gamma) * Uniform[0,1] + gamma * delta_{x_abs},
// or the empirical discounted state distribution of the simulated paths.
struct OccupancySpec {
  enum class Kind { AbsorbingExact, Empirical } kind = Kind::Empirical;
  double absorbing_state = 2.0;
};

struct PdResidual {
  double residual = 0.0;   // | MC regret - occupancy-weighted gap sum |
  double std_error = 0.0;  // combined per-path standard error
};

// Performance-difference residual: compares Monte Carlo regret against
// (1/(1-gamma)) * integral of [vstar - qstar(x, policy(x))] d(occupancy).
// gap = x -> vstar(x) - qstar(x, policy(x)) must be evaluable everywhere the
// paths go (scalar states).
PdResidual performance_difference_residual(const Simulator& sim, const Policy& policy,
                                           const std::function<double(double)>& gap,
                                           const OccupancySpec& occupancy, double gamma,
                                           int n_paths, std::uint64_t seed, double eps = 1e-8);

// ---------------------------------------------------------------------------
// Shared statistics helpers

struct MeanSe {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

MeanSe mean_and_se(const std::vector<double>& xs);

// Simple least squares y ~ intercept + slope * x with the usual slope
// standard error (residual variance over Sxx).
struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t n = 0;
};
OlsFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys);

inline double ci95_halfwidth(double std_error) { return 1.959963984540054 * std_error; }

// Run fn(i) for i in [0, n) across `workers` threads; fn must write results
// into caller-owned per-index slots.  Deterministic by construction.
void parallel_for_indexed(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace greedyreg
